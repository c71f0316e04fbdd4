#include "qsub/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsub/errors.hpp"

namespace qsub {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void check_sum(const OutcomeDistribution &d) {
    double sum = 0.0;
    for (double p : d.probabilities) sum += p;
    if (!(std::abs(sum - 1.0) <= 1e-10)) {
        std::ostringstream os;
        os.precision(17);
        os << "outcome probabilities sum to " << sum
           << "; the state is not unit-norm or the basis is not orthonormal";
        throw DomainError(os.str());
    }
}

OutcomeDistribution density_distribution(const ComplexMatrix &rho, const CommonEigenbasis &b,
                                         BornVariant variant) {
    OutcomeDistribution d;
    d.probabilities.resize(b.size());
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(b.size()); ++k) {
        const auto beta = b.vectors.col(k);
        double p = 0.0;
        if (variant == BornVariant::standard) {
            p = beta.dot(rho * beta).real();
        } else {
            for (Eigen::Index i = 0; i < beta.size(); ++i) p += std::norm(beta[i]) * rho(i, i).real();
        }
        d.probabilities[static_cast<std::size_t>(k)] = std::clamp(p, 0.0, 1.0);
    }
    return d;
}

ComplexMatrix dephase(const CommonEigenbasis &b, const OutcomeDistribution &d) {
    ComplexMatrix rho = ComplexMatrix::Zero(b.vectors.rows(), b.vectors.rows());
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(b.size()); ++k)
        rho += d.probabilities[static_cast<std::size_t>(k)] * b.vectors.col(k) * b.vectors.col(k).adjoint();
    return rho;
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + kGolden))) {}

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

OutcomeDistribution born_distribution(const StateAmplitudes &alpha, const CommonEigenbasis &b,
                                      BornVariant variant) {
    if (alpha.dim() != b.dim())
        throw DimensionMismatch("born_distribution: state has dimension " + std::to_string(alpha.dim()) +
                                ", basis " + std::to_string(b.dim()));
    if (b.size() < b.dim())
        throw DomainError("born_distribution: incomplete basis, " + std::to_string(b.size()) +
                          " vectors for dimension " + std::to_string(b.dim()) + " (deficit " +
                          std::to_string(b.dim() - b.size()) + ")");
    OutcomeDistribution d;
    d.probabilities.resize(b.size());
    if (variant == BornVariant::standard) {
        const ComplexVector overlaps = b.vectors.adjoint() * alpha.values;
        for (std::size_t k = 0; k < b.size(); ++k)
            d.probabilities[k] = std::norm(overlaps[static_cast<Eigen::Index>(k)]);
    } else {
        const Eigen::VectorXd weights = alpha.values.cwiseAbs2();
        const Eigen::VectorXd p = b.vectors.cwiseAbs2().transpose() * weights;
        for (std::size_t k = 0; k < b.size(); ++k) d.probabilities[k] = p[static_cast<Eigen::Index>(k)];
    }
    check_sum(d);
    return d;
}

std::size_t sample_outcome(const OutcomeDistribution &d, RngStream &rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last_positive = 1;
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (d.probabilities[k] <= 0.0) continue;
        acc += d.probabilities[k];
        last_positive = k + 1;
        if (u < acc) return k + 1;
    }
    return last_positive;
}

Collapse collapse(const CommonEigenbasis &b, std::size_t label) {
    if (label < 1 || label > b.size())
        throw DomainError("collapse: outcome " + std::to_string(label) + " outside 1.." +
                          std::to_string(b.size()));
    return {StateAmplitudes{canonical_phase(b.vector(label))}, b.eigenvalue_tuples[label - 1]};
}

Fan build_fan(const StatePoint &z, double t1, const CommonEigenbasis &b,
              const OutcomeDistribution &d, const VelocityScale &v) {
    if (z.dim() != b.dim())
        throw DimensionMismatch("build_fan: point has dimension " + std::to_string(z.dim()) +
                                ", basis " + std::to_string(b.dim()));
    if (d.size() != b.size())
        throw DimensionMismatch("build_fan: distribution has " + std::to_string(d.size()) +
                                " outcomes, basis " + std::to_string(b.size()));
    Fan fan{z, t1, {}};
    for (std::size_t k = 0; k < b.size(); ++k)
        fan.branches.push_back({VelocityVector(v.value() * b.vector(k + 1)), d.probabilities[k]});
    return fan;
}

double fan_orthogonality(const Fan &fan, const VelocityScale &v) {
    double worst = 0.0;
    for (std::size_t a = 0; a < fan.branches.size(); ++a)
        for (std::size_t c = a + 1; c < fan.branches.size(); ++c)
            worst = std::max(worst, std::abs(fan.branches[a].w.components().dot(
                                        fan.branches[c].w.components())));
    return worst / (v.value() * v.value());
}

MixtureState mixture_from(const CommonEigenbasis &b, const OutcomeDistribution &d, double t) {
    MixtureState m{t, {}};
    for (std::size_t k = 0; k < b.size(); ++k)
        m.components.push_back({collapse(b, k + 1).state, d.probabilities[k]});
    return m;
}

PiecewiseTrajectory ChainTrace::trajectory() const {
    PiecewiseTrajectory out;
    for (const auto &r : records)
        if (const auto *seg = std::get_if<TrajectorySegment>(&r)) out.append(*seg);
    return out;
}

std::vector<const MeasurementEvent *> ChainTrace::events() const {
    std::vector<const MeasurementEvent *> out;
    for (const auto &r : records)
        if (const auto *e = std::get_if<MeasurementEvent>(&r)) out.push_back(e);
    return out;
}

ChainPlan::ChainPlan(const ScenarioSpec &spec) : spec_(spec) {
    for (const auto &issue : validate(spec))
        if (issue.is_error()) throw DomainError("invalid scenario: " + format_issue(issue));
    const Hamiltonian h{HermitianMatrix(spec.hamiltonian)};
    for (const auto &m : spec.schedule) {
        std::vector<HermitianMatrix> ops;
        for (const auto &o : m.observables) ops.emplace_back(o);
        bases_.push_back(evolve_eigenbasis(simultaneous_diagonalize(ops), h, m.time, 0.0, spec.hbar));
    }
}

ChainTrace run_chain(const ChainPlan &plan, RngStream &rng, bool resolve_unobserved) {
    const ScenarioSpec &spec = plan.spec();
    const VelocityScale scale(spec.velocity_scale);
    ChainTrace trace;

    StateAmplitudes alpha{spec.initial_state};
    VelocityVector v = velocity_from_state(alpha, scale);
    StatePoint z(spec.initial_point);
    double t_prev = 0.0;
    bool following = true;
    ComplexMatrix rho;

    for (std::size_t k = 0; k < plan.events(); ++k) {
        const auto &entry = spec.schedule[k];
        const CommonEigenbasis &b = plan.basis(k);
        if (!following) {
            const OutcomeDistribution d = density_distribution(rho, b, spec.born_variant);
            trace.records.emplace_back(MeasurementEvent{entry.time, k, d, std::nullopt, {}, z});
            rho = dephase(b, d);
            continue;
        }
        const OutcomeDistribution d = born_distribution(alpha, b, spec.born_variant);
        const StatePoint at = advance(z, v, t_prev, entry.time);
        if (entry.time > t_prev) trace.records.emplace_back(TrajectorySegment{z, v, t_prev, entry.time});
        z = at;
        t_prev = entry.time;
        if (entry.observed || resolve_unobserved) {
            const std::size_t outcome = sample_outcome(d, rng);
            Collapse c = collapse(b, outcome);
            trace.records.emplace_back(MeasurementEvent{entry.time, k, d, outcome, c.eigenvalues, z});
            alpha = std::move(c.state);
            v = velocity_from_state(alpha, scale);
        } else {
            trace.records.emplace_back(MeasurementEvent{entry.time, k, d, std::nullopt, {}, z});
            trace.records.emplace_back(build_fan(z, entry.time, b, d, scale));
            trace.records.emplace_back(mixture_from(b, d, entry.time));
            rho = dephase(b, d);
            following = false;
        }
    }
    if (following) trace.records.emplace_back(TrajectorySegment{z, v, t_prev, std::nullopt});
    return trace;
}

ChainTrace run_chain(const ScenarioSpec &spec, RngStream &rng, bool resolve_unobserved) {
    return run_chain(ChainPlan(spec), rng, resolve_unobserved);
}

std::vector<std::size_t> sample_chain_outcomes(const ChainPlan &plan, RngStream &rng) {
    const ScenarioSpec &spec = plan.spec();
    StateAmplitudes alpha{spec.initial_state};
    std::vector<std::size_t> out;
    out.reserve(plan.events());
    for (std::size_t k = 0; k < plan.events(); ++k) {
        const CommonEigenbasis &b = plan.basis(k);
        const std::size_t outcome = sample_outcome(born_distribution(alpha, b, spec.born_variant), rng);
        alpha = collapse(b, outcome).state;
        out.push_back(outcome);
    }
    return out;
}

std::vector<OutcomeDistribution> marginal_distributions(const ChainPlan &plan) {
    const ScenarioSpec &spec = plan.spec();
    ComplexMatrix rho = spec.initial_state * spec.initial_state.adjoint();
    std::vector<OutcomeDistribution> out;
    for (std::size_t k = 0; k < plan.events(); ++k) {
        const CommonEigenbasis &b = plan.basis(k);
        out.push_back(density_distribution(rho, b, spec.born_variant));
        rho = dephase(b, out.back());
    }
    return out;
}

} // namespace qsub
