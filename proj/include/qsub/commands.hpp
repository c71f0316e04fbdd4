#pragma once

// The four command-line operations, callable in-process. Each returns the
// process exit code: 0 ok, 1 validation errors, 2 runtime errors.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsub/measurement.hpp"
#include "qsub/trace.hpp"

namespace qsub {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

struct CommandOptions {
    std::string scenario;
    std::optional<std::uint64_t> seed; // overrides the scenario seed
    std::uint64_t samples = 1000;
    std::size_t threads = 1;
    double u_span = 1.0;
    std::string out; // empty: standard output
    TraceFormat format = TraceFormat::jsonl;
};

struct EventSummary {
    std::size_t index = 0;
    double t = 0.0;
    bool observed = true;
    std::vector<std::uint64_t> counts;
    std::vector<double> frequencies;
    std::vector<double> probabilities; // exact marginals
    double chi_square = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

struct EnsembleSummary {
    std::string spec_sha256;
    std::uint64_t seed = 0;
    std::uint64_t samples = 0;
    std::vector<EventSummary> events;
};

/// Pearson statistic against probs over cells with positive probability.
/// A count in a zero-probability cell gives an infinite statistic.
struct ChiSquare {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

ChiSquare chi_square_test(const std::vector<std::uint64_t> &counts, const std::vector<double> &probs);

/// Trajectory i uses RngStream(seed, i); the result does not depend on
/// the thread count.
EnsembleSummary run_ensemble(const ChainPlan &plan, std::uint64_t seed, std::uint64_t samples,
                             std::size_t threads);

std::string to_json(const EnsembleSummary &summary);

/// Geodesic from the initial point along alpha, launched with metric speed
/// |p0|_g = V; the frame V e_1..V e_n transported along it; length, drift
/// and, for dim <= 2, the variational oracle length between the endpoints.
Trace geodesic_study(const ScenarioSpec &spec, double u_span);

inline constexpr std::size_t kOracleSegments = 64;

int cmd_run(const CommandOptions &opts, std::ostream &out, std::ostream &err);
int cmd_ensemble(const CommandOptions &opts, std::ostream &out, std::ostream &err);
int cmd_geodesic(const CommandOptions &opts, std::ostream &out, std::ostream &err);
int cmd_validate(const CommandOptions &opts, std::ostream &out, std::ostream &err);

} // namespace qsub
