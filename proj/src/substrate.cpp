#include "qsub/substrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>

#include "qsub/errors.hpp"

namespace qsub {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char *what) {
    if (a != b)
        throw DimensionMismatch(std::string(what) + ": dimensions " + std::to_string(a) + " and " +
                                std::to_string(b));
}

} // namespace

VelocityScale::VelocityScale(double v) : v_(v) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError("velocity scale must be positive and finite");
}

StatePoint StatePoint::origin(std::size_t dim) {
    return StatePoint(ComplexVector::Zero(static_cast<Eigen::Index>(dim)));
}

StatePoint TrajectorySegment::position(double t) const {
    return advance(start, velocity, t_begin, t);
}

StatePoint TrajectorySegment::end_point() const {
    if (!t_end) throw DomainError("open segment has no end point");
    return position(*t_end);
}

void PiecewiseTrajectory::append(TrajectorySegment segment) {
    if (segment.t_end && !(*segment.t_end > segment.t_begin))
        throw DomainError("closed segment must have t_end > t_begin");
    if (!segments_.empty()) {
        const auto &last = segments_.back();
        if (!last.t_end) throw DomainError("cannot append after an open segment");
        if (segment.t_begin != *last.t_end)
            throw DomainError("segment must start where the previous one ends");
        const ComplexVector end = last.end_point().coordinates();
        if (end.size() != segment.start.coordinates().size())
            throw DimensionMismatch("segment dimension differs from the trajectory");
        const double gap = (end - segment.start.coordinates()).norm();
        if (gap > 1e-9 * std::max(1.0, end.norm())) {
            std::ostringstream os;
            os << "segment starts " << gap << " away from the previous end point";
            throw DomainError(os.str());
        }
    }
    segments_.push_back(std::move(segment));
}

std::vector<double> PiecewiseTrajectory::breakpoints() const {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < segments_.size(); ++k) out.push_back(*segments_[k].t_end);
    return out;
}

StatePoint PiecewiseTrajectory::position(double t) const {
    for (const auto &s : segments_)
        if (t >= s.t_begin && (!s.t_end || t <= *s.t_end)) return s.position(t);
    throw DomainError("time outside the trajectory");
}

double PiecewiseTrajectory::junction_mismatch() const {
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < segments_.size(); ++k) {
        const ComplexVector gap =
            segments_[k].end_point().coordinates() - segments_[k + 1].start.coordinates();
        worst = std::max(worst, gap.norm());
    }
    return worst;
}

VelocityVector velocity_from_state(const StateAmplitudes &alpha, const VelocityScale &v) {
    const double n = alpha.values.norm();
    if (!(std::abs(n - 1.0) <= 1e-10)) {
        std::ostringstream os;
        os.precision(17);
        os << "state amplitudes are not normalized: norm " << n;
        throw DomainError(os.str());
    }
    return VelocityVector(v.value() * alpha.values);
}

StatePoint advance(const StatePoint &z0, const VelocityVector &v, double t0, double t) {
    require_same_dim(z0.dim(), v.dim(), "advance");
    if (t < t0) throw DomainError("advance: t precedes t0");
    if (t == t0) return z0;
    return StatePoint(z0.coordinates() + v.components() * (t - t0));
}

StatePoint post_measurement_path(const StatePoint &z0, const VelocityVector &v, double t0,
                                 double t1, const VelocityVector &w, double t) {
    if (t1 < t0 || t < t1) throw DomainError("post_measurement_path: require t >= t1 >= t0");
    return advance(advance(z0, v, t0, t1), w, t1, t);
}

double direction_probability(const VelocityVector &v, const VelocityVector &w) {
    require_same_dim(v.dim(), w.dim(), "direction_probability");
    const double nv = v.components().squaredNorm();
    const double nw = w.components().squaredNorm();
    if (!(nv > 0.0) || !(nw > 0.0)) throw DomainError("direction_probability: zero vector");
    const double p = std::norm(v.components().dot(w.components())) / (nv * nw);
    return std::min(p, 1.0);
}

StatePoint canonical_phase(const StatePoint &z) {
    return StatePoint(canonical_phase(z.coordinates()));
}

StateAmplitudes canonical_phase(const StateAmplitudes &a) {
    return StateAmplitudes{canonical_phase(a.values)};
}

VelocityVector canonical_phase(const VelocityVector &v) {
    return VelocityVector(canonical_phase(v.components()));
}

ComplexVector rebase(const UnitaryMatrix &u, const ComplexVector &x) {
    require_same_dim(u.dim(), static_cast<std::size_t>(x.size()), "rebase");
    return u.matrix().transpose() * x;
}

StateAmplitudes rebase(const UnitaryMatrix &u, const StateAmplitudes &x) {
    return StateAmplitudes{rebase(u, x.values)};
}

VelocityVector rebase(const UnitaryMatrix &u, const VelocityVector &x) {
    return VelocityVector(rebase(u, x.components()));
}

StatePoint rebase(const UnitaryMatrix &u, const StatePoint &x) {
    return StatePoint(rebase(u, x.coordinates()));
}

HermitianMatrix rebase(const UnitaryMatrix &u, const HermitianMatrix &a) {
    require_same_dim(u.dim(), a.dim(), "rebase");
    const ComplexMatrix t = u.matrix().transpose();
    return HermitianMatrix::hermitize(t * a.matrix() * t.adjoint());
}

ComplexVector apply_matrix(const HermitianMatrix &a, const VelocityVector &v) {
    require_same_dim(a.dim(), v.dim(), "apply_matrix");
    return a.matrix() * v.components();
}

std::size_t default_max_dimension() {
    if (const char *env = std::getenv("QSUB_MAX_DIM")) {
        char *end = nullptr;
        const unsigned long long n = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
    }
    return 4096;
}

StateAmplitudes tensor_compose(std::span<const StateAmplitudes> factors, std::size_t max_dim) {
    if (factors.empty()) throw DomainError("tensor_compose: empty factor list");
    std::size_t total = 1;
    for (const auto &f : factors) {
        if (f.dim() == 0) throw DomainError("tensor_compose: empty factor");
        if (!(std::abs(f.values.norm() - 1.0) <= 1e-10))
            throw DomainError("tensor_compose: factor is not unit-norm");
        if (total > max_dim / f.dim())
            throw DomainError("tensor_compose: composite dimension exceeds cap " +
                              std::to_string(max_dim));
        total *= f.dim();
    }
    ComplexVector out = factors.front().values;
    for (std::size_t k = 1; k < factors.size(); ++k) {
        const ComplexVector &f = factors[k].values;
        ComplexVector next(out.size() * f.size());
        for (Eigen::Index i = 0; i < out.size(); ++i)
            next.segment(i * f.size(), f.size()) = out[i] * f;
        out = std::move(next);
    }
    return StateAmplitudes{std::move(out)};
}

} // namespace qsub
