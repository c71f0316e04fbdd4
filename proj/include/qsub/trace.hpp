#pragma once

// Trace records and their JSON Lines / CSV encodings.
//
// JSONL grammar, one object per line:
//   {"trace_version":1,"spec_sha256":"…","seed":N}                 header
//   {"type":"segment","t0":…,"t1":…|null,"z0":[[re,im]…],"v":[[re,im]…]}
//   {"type":"measurement","t":…,"index":k,"probs":[…],"outcome":K|null,
//    "eigenvalues":[…],"z":[[re,im]…]}
//   {"type":"fan","t":…,"apex":[[re,im]…],"branches":[{"w":[[re,im]…],"p":…}…]}
//   {"type":"mixture","t":…,"components":[{"alpha":[[re,im]…],"weight":…}…]}
//   {"type":"gsample","u":…,"z":[[re,im]…],"p":[[re,im]…],"gram":[[[re,im]…]…]}
//   {"type":"geodesic_report",…}
// Numbers are printed in shortest round-trip form.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qsub/measurement.hpp"
#include "qsub/riemann.hpp"

namespace qsub {

struct TraceHeader {
    int version = 1;
    std::string spec_sha256;
    std::uint64_t seed = 0;
};

struct GeodesicSample {
    double u = 0.0;
    ComplexVector z;
    ComplexVector p;
    ComplexMatrix gram; // metric Gram matrix of the transported frame
};

struct GeodesicReport {
    std::string metric;
    std::string transport_variant;
    double u_span = 0.0;
    double step = 0.0;
    std::size_t samples = 0;
    double path_length = 0.0;
    double drift = 0.0;
    std::optional<std::size_t> oracle_segments;
    std::optional<double> oracle_length;
    std::optional<double> oracle_relative_difference;
};

using TraceRecord =
    std::variant<TrajectorySegment, MeasurementEvent, Fan, MixtureState, GeodesicSample, GeodesicReport>;

struct Trace {
    TraceHeader header;
    std::vector<TraceRecord> records;
};

/// Header from the executed spec (whose seed field is the seed used).
Trace make_trace(const ScenarioSpec &executed, const ChainTrace &chain);

enum class TraceFormat { jsonl, csv };

TraceFormat trace_format_from_string(std::string_view name); // throws DomainError

void write_jsonl(const Trace &trace, std::ostream &out);
/// Long format: one row per scalar, columns
/// record,type,t0,t1,field,branch,component,re,im, after '#' header lines.
void write_csv(const Trace &trace, std::ostream &out);
void write_trace(const Trace &trace, TraceFormat format, std::ostream &out);

/// Throws Error naming the offending line.
Trace read_jsonl(std::istream &in);

/// The segments of a trace joined back into a trajectory.
PiecewiseTrajectory reconstruct_trajectory(const Trace &trace);

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

} // namespace qsub
