#pragma once

// Run descriptions (`.qsub.json`): parsing with located diagnostics,
// validation of the physical invariants, canonical serialization.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsub/hilbert.hpp"
#include "qsub/riemann.hpp"

namespace qsub {

enum class BornVariant { standard, termwise };

std::string_view to_string(BornVariant v);

struct ScheduledMeasurement {
    double time = 0.0;
    std::vector<ComplexMatrix> observables; // values at the reference time t0 = 0
    bool observed = true;
};

struct ScenarioSpec {
    std::size_t dim = 0;
    double hbar = 1.0;
    double velocity_scale = 1.0;
    ComplexMatrix hamiltonian;
    ComplexVector initial_state;
    ComplexVector initial_point; // origin when omitted
    std::vector<ScheduledMeasurement> schedule;
    std::optional<MetricSpec> metric;
    IntegratorSettings integrator;
    BornVariant born_variant = BornVariant::standard;
    TransportVariant transport_variant = TransportVariant::conjugate_slot;
    std::uint64_t seed = 0;
};

/// Field-by-field equality (exact for numbers).
bool operator==(const ScenarioSpec &a, const ScenarioSpec &b);

struct ParseIssue {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string path; // JSON pointer into the document
    std::string message;
    std::size_t line = 0; // 1-based; 0 when unknown
    std::size_t column = 0;

    bool is_error() const noexcept { return severity == Severity::error; }
};

std::string format_issue(const ParseIssue &issue);

struct ParseResult {
    std::optional<ScenarioSpec> spec; // present when structurally complete
    std::vector<ParseIssue> issues;

    bool ok() const; // spec present and no error issues
    std::size_t error_count() const;
    std::size_t warning_count() const;
};

/// Parses a scenario document, fills defaults and runs validate().
ParseResult parse_scenario(std::string_view text);

/// Issues for every invariant the spec violates; empty iff none.
std::vector<ParseIssue> validate(const ScenarioSpec &spec);

/// Canonical document: fixed key order, shortest round-trip floats.
std::string serialize(const ScenarioSpec &spec);

/// SHA-256 of serialize(spec), lowercase hex.
std::string spec_sha256(const ScenarioSpec &spec);

} // namespace qsub
