#include "qsub/commands.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "qsub/errors.hpp"

namespace qsub {

namespace {

std::optional<std::string> read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Reads and parses the scenario; prints issues to err. Returns the exit
// code to stop with, or nothing when the spec is usable.
std::optional<int> load(const CommandOptions &opts, std::ostream &err, ScenarioSpec &spec) {
    const auto text = read_file(opts.scenario);
    if (!text) {
        err << "error: cannot read scenario file " << opts.scenario << '\n';
        return exit_runtime;
    }
    ParseResult parsed = parse_scenario(*text);
    for (const auto &issue : parsed.issues) err << opts.scenario << ": " << format_issue(issue) << '\n';
    if (!parsed.ok()) return exit_validation;
    spec = std::move(*parsed.spec);
    if (opts.seed) spec.seed = *opts.seed;
    return std::nullopt;
}

int emit(const std::string &content, const CommandOptions &opts, std::ostream &out, std::ostream &err) {
    if (opts.out.empty()) {
        out << content;
        return out ? exit_ok : exit_runtime;
    }
    std::ofstream file(opts.out, std::ios::binary | std::ios::trunc);
    file << content;
    file.close();
    if (!file) {
        err << "error: cannot write " << opts.out << '\n';
        return exit_runtime;
    }
    return exit_ok;
}

template <class F> int guarded(std::ostream &err, F &&body) {
    try {
        return body();
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

} // namespace

ChiSquare chi_square_test(const std::vector<std::uint64_t> &counts, const std::vector<double> &probs) {
    if (counts.size() != probs.size())
        throw DimensionMismatch("chi_square_test: " + std::to_string(counts.size()) + " counts, " +
                                std::to_string(probs.size()) + " probabilities");
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    ChiSquare out;
    std::size_t cells = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (probs[k] > 0.0) {
            ++cells;
            const double expected = static_cast<double>(n) * probs[k];
            const double diff = static_cast<double>(counts[k]) - expected;
            out.statistic += diff * diff / expected;
        } else if (counts[k] > 0) {
            out.statistic = std::numeric_limits<double>::infinity();
        }
    }
    out.dof = cells > 0 ? cells - 1 : 0;
    if (std::isinf(out.statistic))
        out.p_value = 0.0;
    else if (out.dof == 0)
        out.p_value = 1.0;
    else
        out.p_value = boost::math::gamma_q(0.5 * static_cast<double>(out.dof), 0.5 * out.statistic);
    return out;
}

EnsembleSummary run_ensemble(const ChainPlan &plan, std::uint64_t seed, std::uint64_t samples,
                             std::size_t threads) {
    if (samples == 0) throw DomainError("ensemble needs at least one sample");
    threads = std::max<std::size_t>(1, threads);
    const std::size_t events = plan.events();
    std::vector<std::vector<std::uint64_t>> zero(events);
    for (std::size_t k = 0; k < events; ++k) zero[k].assign(plan.basis(k).size(), 0);
    auto totals = zero;

    constexpr std::uint64_t chunk = 4096;
    std::atomic<std::uint64_t> next{0};
    std::mutex merge;
    std::exception_ptr failure;

    auto worker = [&] {
        try {
            auto local = zero;
            for (std::uint64_t start; (start = next.fetch_add(chunk)) < samples;) {
                const std::uint64_t stop = std::min(samples, start + chunk);
                for (std::uint64_t i = start; i < stop; ++i) {
                    RngStream rng(seed, i);
                    const auto outcomes = sample_chain_outcomes(plan, rng);
                    for (std::size_t k = 0; k < events; ++k) ++local[k][outcomes[k] - 1];
                }
            }
            std::lock_guard lock(merge);
            for (std::size_t k = 0; k < events; ++k)
                for (std::size_t j = 0; j < local[k].size(); ++j) totals[k][j] += local[k][j];
        } catch (...) {
            std::lock_guard lock(merge);
            if (!failure) failure = std::current_exception();
            next = samples;
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    EnsembleSummary summary;
    summary.spec_sha256 = spec_sha256(plan.spec());
    summary.seed = seed;
    summary.samples = samples;
    const auto marginals = marginal_distributions(plan);
    for (std::size_t k = 0; k < events; ++k) {
        EventSummary e;
        e.index = k;
        e.t = plan.spec().schedule[k].time;
        e.observed = plan.spec().schedule[k].observed;
        e.counts = totals[k];
        for (auto c : e.counts) e.frequencies.push_back(static_cast<double>(c) / static_cast<double>(samples));
        e.probabilities = marginals[k].probabilities;
        const ChiSquare chi = chi_square_test(e.counts, e.probabilities);
        e.chi_square = chi.statistic;
        e.dof = chi.dof;
        e.p_value = chi.p_value;
        summary.events.push_back(std::move(e));
    }
    return summary;
}

std::string to_json(const EnsembleSummary &summary) {
    nlohmann::ordered_json j;
    j["summary_version"] = 1;
    j["spec_sha256"] = summary.spec_sha256;
    j["seed"] = summary.seed;
    j["samples"] = summary.samples;
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const auto &e : summary.events) {
        nlohmann::ordered_json o;
        o["index"] = e.index;
        o["t"] = e.t;
        o["observed"] = e.observed;
        o["counts"] = e.counts;
        o["frequencies"] = e.frequencies;
        o["probs"] = e.probabilities;
        o["chi_square"] = std::isinf(e.chi_square) ? nlohmann::ordered_json(nullptr)
                                                   : nlohmann::ordered_json(e.chi_square);
        o["dof"] = e.dof;
        o["p_value"] = e.p_value;
        events.push_back(std::move(o));
    }
    j["events"] = std::move(events);
    return j.dump(2) + "\n";
}

Trace geodesic_study(const ScenarioSpec &spec, double u_span) {
    if (!spec.metric) throw DomainError("scenario has no metric");
    if (!(u_span > 0.0) || !std::isfinite(u_span)) throw DomainError("u-span must be positive");
    const HermitianMetricField field = HermitianMetricField::from_spec(*spec.metric, spec.dim);
    const ComplexVector z0 = spec.initial_point;
    const ComplexVector launch = spec.velocity_scale * spec.initial_state;
    const ComplexVector p0 = (spec.velocity_scale / metric_speed(field, z0, launch)) * launch;
    const GeodesicPath path = integrate_geodesic(field, z0, p0, u_span, spec.integrator);

    const auto d = static_cast<Eigen::Index>(spec.dim);
    std::vector<ComplexVector> w0;
    for (Eigen::Index k = 0; k < d; ++k)
        w0.push_back(spec.velocity_scale * ComplexVector::Unit(d, k));
    const TransportFrame frame = parallel_transport(path, w0, spec.transport_variant);

    Trace trace;
    trace.header.spec_sha256 = spec_sha256(spec);
    trace.header.seed = spec.seed;
    const auto &samples = path.samples();
    for (std::size_t n = 0; n < samples.size(); ++n)
        trace.records.emplace_back(GeodesicSample{samples[n].u, samples[n].z, samples[n].p, frame.gram[n]});

    GeodesicReport report;
    report.metric = std::string(to_string(spec.metric->family));
    report.transport_variant = std::string(to_string(spec.transport_variant));
    report.u_span = u_span;
    report.step = path.step();
    report.samples = samples.size();
    report.path_length = path_length(path);
    report.drift = transport_drift(frame);
    if (spec.dim <= 2) {
        const DiscretePath oracle = variational_oracle(field, z0, path.back().z, kOracleSegments);
        report.oracle_segments = kOracleSegments;
        report.oracle_length = oracle.length;
        report.oracle_relative_difference =
            oracle.length > 0.0 ? std::abs(report.path_length - oracle.length) / oracle.length
                                : std::abs(report.path_length);
    }
    trace.records.emplace_back(std::move(report));
    return trace;
}

int cmd_run(const CommandOptions &opts, std::ostream &out, std::ostream &err) {
    ScenarioSpec spec;
    if (auto code = load(opts, err, spec)) return *code;
    return guarded(err, [&] {
        const ChainPlan plan(spec);
        RngStream rng(spec.seed, 0);
        const Trace trace = make_trace(spec, run_chain(plan, rng));
        std::ostringstream os;
        write_trace(trace, opts.format, os);
        return emit(os.str(), opts, out, err);
    });
}

int cmd_ensemble(const CommandOptions &opts, std::ostream &out, std::ostream &err) {
    if (opts.samples == 0) {
        err << "error: --samples must be at least 1\n";
        return exit_validation;
    }
    ScenarioSpec spec;
    if (auto code = load(opts, err, spec)) return *code;
    return guarded(err, [&] {
        const ChainPlan plan(spec);
        const EnsembleSummary summary = run_ensemble(plan, spec.seed, opts.samples, opts.threads);
        return emit(to_json(summary), opts, out, err);
    });
}

int cmd_geodesic(const CommandOptions &opts, std::ostream &out, std::ostream &err) {
    ScenarioSpec spec;
    if (auto code = load(opts, err, spec)) return *code;
    if (!spec.metric) {
        err << opts.scenario << ": error at /metric: geodesic study requires a metric\n";
        return exit_validation;
    }
    if (!(opts.u_span > 0.0) || !std::isfinite(opts.u_span)) {
        err << "error: --u-span must be positive\n";
        return exit_validation;
    }
    return guarded(err, [&] {
        const Trace trace = geodesic_study(spec, opts.u_span);
        std::ostringstream os;
        write_trace(trace, opts.format, os);
        return emit(os.str(), opts, out, err);
    });
}

int cmd_validate(const CommandOptions &opts, std::ostream &out, std::ostream &err) {
    const auto text = read_file(opts.scenario);
    if (!text) {
        err << "error: cannot read scenario file " << opts.scenario << '\n';
        return exit_runtime;
    }
    const ParseResult parsed = parse_scenario(*text);
    for (const auto &issue : parsed.issues) out << opts.scenario << ": " << format_issue(issue) << '\n';
    const std::size_t errors = parsed.error_count();
    const std::size_t warnings = parsed.warning_count();
    out << errors << (errors == 1 ? " error, " : " errors, ") << warnings
        << (warnings == 1 ? " warning" : " warnings") << '\n';
    return errors == 0 ? exit_ok : exit_validation;
}

} // namespace qsub
