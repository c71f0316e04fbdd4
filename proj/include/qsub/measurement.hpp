#pragma once

// Born-rule outcome distributions, seeded sampling, collapse onto a common
// eigenvector, and the chain driver that alternates free segments with
// scheduled measurements.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "qsub/heisenberg.hpp"
#include "qsub/scenario.hpp"
#include "qsub/substrate.hpp"

namespace qsub {

/// probabilities[K-1] is the probability of outcome K.
struct OutcomeDistribution {
    std::vector<double> probabilities;

    std::size_t size() const noexcept { return probabilities.size(); }
    double probability(std::size_t label) const { return probabilities.at(label - 1); }
};

/// Counter-based generator: draw n of stream (seed, index) is a pure
/// function of (seed, index, n), so streams are reproducible on every
/// platform and independent of how they are scheduled.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    double uniform(); // [0, 1), 53 random bits
    std::uint64_t draws() const noexcept { return counter_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// P_K = |sum_i conj(beta_K^i) alpha^i|^2 (standard), or the termwise sum
/// sum_i |conj(beta_K^i) alpha^i|^2. Throws DomainError if the basis has
/// fewer vectors than the dimension.
OutcomeDistribution born_distribution(const StateAmplitudes &alpha, const CommonEigenbasis &b,
                                      BornVariant variant = BornVariant::standard);

/// Inverse CDF over ascending labels; consumes exactly one draw.
std::size_t sample_outcome(const OutcomeDistribution &d, RngStream &rng);

struct Collapse {
    StateAmplitudes state;            // beta_K in canonical phase
    std::vector<double> eigenvalues;  // (a, b, ...) for outcome K
};

Collapse collapse(const CommonEigenbasis &b, std::size_t label);

struct FanBranch {
    VelocityVector w;
    double p = 0.0;
};

struct Fan {
    StatePoint apex;
    double t = 0.0;
    std::vector<FanBranch> branches; // branch K-1 moves along V beta_K
};

/// Branches (V beta_K(t1), P_K).
Fan build_fan(const StatePoint &z, double t1, const CommonEigenbasis &b,
              const OutcomeDistribution &d, const VelocityScale &v);

/// max |<w_K, w_L>| / V^2 over K != L.
double fan_orthogonality(const Fan &fan, const VelocityScale &v);

struct MixtureComponent {
    StateAmplitudes state;
    double weight = 0.0;
};

struct MixtureState {
    double t = 0.0;
    std::vector<MixtureComponent> components;
};

MixtureState mixture_from(const CommonEigenbasis &b, const OutcomeDistribution &d, double t);

struct MeasurementEvent {
    double t = 0.0;
    std::size_t index = 0; // position in the schedule
    OutcomeDistribution distribution;
    std::optional<std::size_t> outcome; // absent when not resolved
    std::vector<double> eigenvalues;    // of the outcome; empty when absent
    StatePoint point;
};

using ChainRecord = std::variant<TrajectorySegment, MeasurementEvent, Fan, MixtureState>;

struct ChainTrace {
    std::vector<ChainRecord> records; // time-ordered

    PiecewiseTrajectory trajectory() const;
    std::vector<const MeasurementEvent *> events() const;
};

/// Evolved eigenbases of every scheduled set, computed once per scenario
/// and shared read-only by any number of chains.
class ChainPlan {
  public:
    explicit ChainPlan(const ScenarioSpec &spec);

    const ScenarioSpec &spec() const noexcept { return spec_; }
    const CommonEigenbasis &basis(std::size_t event) const { return bases_.at(event); }
    std::size_t events() const noexcept { return bases_.size(); }

  private:
    ScenarioSpec spec_;
    std::vector<CommonEigenbasis> bases_;
};

/// Runs one chain from t0 = 0. Observed events are sampled and collapse the
/// state; an unobserved event records its Fan and MixtureState and ends
/// branch-following, after which later events report mixture probabilities
/// without an outcome. With resolve_unobserved every event is sampled, which
/// is the per-trajectory model behind ensemble statistics.
ChainTrace run_chain(const ChainPlan &plan, RngStream &rng, bool resolve_unobserved = false);
ChainTrace run_chain(const ScenarioSpec &spec, RngStream &rng, bool resolve_unobserved = false);

/// Outcome labels of a fully resolved chain, without building records.
/// Consumes the same draws as run_chain(plan, rng, true).
std::vector<std::size_t> sample_chain_outcomes(const ChainPlan &plan, RngStream &rng);

/// Exact marginal outcome probabilities of every event for fully resolved
/// chains, by propagating the density matrix through non-selective
/// measurements.
std::vector<OutcomeDistribution> marginal_distributions(const ChainPlan &plan);

} // namespace qsub
