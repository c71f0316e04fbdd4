#include "qsub/trace.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qsub/errors.hpp"

namespace qsub {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

namespace {

ordered_json cvec(const ComplexVector &v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v[i].real(), v[i].imag()});
    return out;
}

ordered_json cmat(const ComplexMatrix &m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
        out.push_back(std::move(row));
    }
    return out;
}

template <class T> ordered_json optional_json(const std::optional<T> &x) {
    return x ? ordered_json(*x) : ordered_json(nullptr);
}

struct JsonEncoder {
    ordered_json operator()(const TrajectorySegment &s) const {
        ordered_json j;
        j["type"] = "segment";
        j["t0"] = s.t_begin;
        j["t1"] = optional_json(s.t_end);
        j["z0"] = cvec(s.start.coordinates());
        j["v"] = cvec(s.velocity.components());
        return j;
    }
    ordered_json operator()(const MeasurementEvent &e) const {
        ordered_json j;
        j["type"] = "measurement";
        j["t"] = e.t;
        j["index"] = e.index;
        j["probs"] = e.distribution.probabilities;
        j["outcome"] = optional_json(e.outcome);
        j["eigenvalues"] = e.eigenvalues;
        j["z"] = cvec(e.point.coordinates());
        return j;
    }
    ordered_json operator()(const Fan &f) const {
        ordered_json j;
        j["type"] = "fan";
        j["t"] = f.t;
        j["apex"] = cvec(f.apex.coordinates());
        ordered_json branches = ordered_json::array();
        for (const auto &b : f.branches) {
            ordered_json o;
            o["w"] = cvec(b.w.components());
            o["p"] = b.p;
            branches.push_back(std::move(o));
        }
        j["branches"] = std::move(branches);
        return j;
    }
    ordered_json operator()(const MixtureState &m) const {
        ordered_json j;
        j["type"] = "mixture";
        j["t"] = m.t;
        ordered_json comps = ordered_json::array();
        for (const auto &c : m.components) {
            ordered_json o;
            o["alpha"] = cvec(c.state.values);
            o["weight"] = c.weight;
            comps.push_back(std::move(o));
        }
        j["components"] = std::move(comps);
        return j;
    }
    ordered_json operator()(const GeodesicSample &g) const {
        ordered_json j;
        j["type"] = "gsample";
        j["u"] = g.u;
        j["z"] = cvec(g.z);
        j["p"] = cvec(g.p);
        j["gram"] = cmat(g.gram);
        return j;
    }
    ordered_json operator()(const GeodesicReport &r) const {
        ordered_json j;
        j["type"] = "geodesic_report";
        j["metric"] = r.metric;
        j["transport_variant"] = r.transport_variant;
        j["u_span"] = r.u_span;
        j["step"] = r.step;
        j["samples"] = r.samples;
        j["path_length"] = r.path_length;
        j["drift"] = r.drift;
        j["oracle_segments"] = optional_json(r.oracle_segments);
        j["oracle_length"] = optional_json(r.oracle_length);
        j["oracle_relative_difference"] = optional_json(r.oracle_relative_difference);
        return j;
    }
};

ComplexVector read_cvec(const json &j) {
    ComplexVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = Complex(j[i].at(0).get<double>(), j[i].at(1).get<double>());
    return v;
}

ComplexMatrix read_cmat(const json &j) {
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j[0].size() : 0;
    ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        m.row(static_cast<Eigen::Index>(r)) = read_cvec(j[r]).transpose();
    return m;
}

template <class T> std::optional<T> read_optional(const json &j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

TraceRecord decode(const json &j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "segment")
        return TrajectorySegment{StatePoint(read_cvec(j.at("z0"))), VelocityVector(read_cvec(j.at("v"))),
                                 j.at("t0").get<double>(), read_optional<double>(j.at("t1"))};
    if (type == "measurement") {
        MeasurementEvent e;
        e.t = j.at("t").get<double>();
        e.index = j.at("index").get<std::size_t>();
        e.distribution.probabilities = j.at("probs").get<std::vector<double>>();
        e.outcome = read_optional<std::size_t>(j.at("outcome"));
        e.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        e.point = StatePoint(read_cvec(j.at("z")));
        return e;
    }
    if (type == "fan") {
        Fan f{StatePoint(read_cvec(j.at("apex"))), j.at("t").get<double>(), {}};
        for (const auto &b : j.at("branches"))
            f.branches.push_back({VelocityVector(read_cvec(b.at("w"))), b.at("p").get<double>()});
        return f;
    }
    if (type == "mixture") {
        MixtureState m{j.at("t").get<double>(), {}};
        for (const auto &c : j.at("components"))
            m.components.push_back({StateAmplitudes{read_cvec(c.at("alpha"))}, c.at("weight").get<double>()});
        return m;
    }
    if (type == "gsample")
        return GeodesicSample{j.at("u").get<double>(), read_cvec(j.at("z")), read_cvec(j.at("p")),
                              read_cmat(j.at("gram"))};
    if (type == "geodesic_report") {
        GeodesicReport r;
        r.metric = j.at("metric").get<std::string>();
        r.transport_variant = j.at("transport_variant").get<std::string>();
        r.u_span = j.at("u_span").get<double>();
        r.step = j.at("step").get<double>();
        r.samples = j.at("samples").get<std::size_t>();
        r.path_length = j.at("path_length").get<double>();
        r.drift = j.at("drift").get<double>();
        r.oracle_segments = read_optional<std::size_t>(j.at("oracle_segments"));
        r.oracle_length = read_optional<double>(j.at("oracle_length"));
        r.oracle_relative_difference = read_optional<double>(j.at("oracle_relative_difference"));
        return r;
    }
    throw Error("unknown record type \"" + type + "\"");
}

class CsvWriter {
  public:
    explicit CsvWriter(std::ostream &out) : out_(out) {}

    void row(std::size_t record, std::string_view type, const std::string &t0, const std::string &t1,
             std::string_view field, const std::string &branch, const std::string &component,
             const std::string &re, const std::string &im) {
        out_ << record << ',' << type << ',' << t0 << ',' << t1 << ',' << field << ',' << branch << ','
             << component << ',' << re << ',' << im << '\n';
    }
    void complex_rows(std::size_t record, std::string_view type, const std::string &t0,
                      const std::string &t1, std::string_view field, const std::string &branch,
                      const ComplexVector &v) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            row(record, type, t0, t1, field, branch, std::to_string(i + 1), format_double(v[i].real()),
                format_double(v[i].imag()));
    }
    void real_row(std::size_t record, std::string_view type, const std::string &t0, std::string_view field,
                  const std::string &branch, const std::string &component, double x) {
        row(record, type, t0, "", field, branch, component, format_double(x), "0");
    }

  private:
    std::ostream &out_;
};

} // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Trace make_trace(const ScenarioSpec &executed, const ChainTrace &chain) {
    Trace t;
    t.header.spec_sha256 = spec_sha256(executed);
    t.header.seed = executed.seed;
    for (const auto &r : chain.records)
        std::visit([&](const auto &x) { t.records.emplace_back(x); }, r);
    return t;
}

TraceFormat trace_format_from_string(std::string_view name) {
    if (name == "jsonl") return TraceFormat::jsonl;
    if (name == "csv") return TraceFormat::csv;
    throw DomainError("unknown trace format \"" + std::string(name) + "\" (expected jsonl or csv)");
}

void write_jsonl(const Trace &trace, std::ostream &out) {
    ordered_json header;
    header["trace_version"] = trace.header.version;
    header["spec_sha256"] = trace.header.spec_sha256;
    header["seed"] = trace.header.seed;
    out << header.dump() << '\n';
    for (const auto &r : trace.records) out << std::visit(JsonEncoder{}, r).dump() << '\n';
}

void write_csv(const Trace &trace, std::ostream &out) {
    out << "# trace_version=" << trace.header.version << '\n'
        << "# spec_sha256=" << trace.header.spec_sha256 << '\n'
        << "# seed=" << trace.header.seed << '\n'
        << "record,type,t0,t1,field,branch,component,re,im\n";
    CsvWriter w(out);
    for (std::size_t n = 0; n < trace.records.size(); ++n) {
        const auto &rec = trace.records[n];
        if (const auto *s = std::get_if<TrajectorySegment>(&rec)) {
            const std::string t0 = format_double(s->t_begin);
            const std::string t1 = s->t_end ? format_double(*s->t_end) : "";
            w.complex_rows(n, "segment", t0, t1, "z0", "", s->start.coordinates());
            w.complex_rows(n, "segment", t0, t1, "v", "", s->velocity.components());
        } else if (const auto *e = std::get_if<MeasurementEvent>(&rec)) {
            const std::string t = format_double(e->t);
            for (std::size_t k = 0; k < e->distribution.size(); ++k)
                w.real_row(n, "measurement", t, "prob", "", std::to_string(k + 1), e->distribution.probabilities[k]);
            if (e->outcome) w.row(n, "measurement", t, "", "outcome", "", "", std::to_string(*e->outcome), "0");
            for (std::size_t m = 0; m < e->eigenvalues.size(); ++m)
                w.real_row(n, "measurement", t, "eigenvalue", "", std::to_string(m + 1), e->eigenvalues[m]);
            w.complex_rows(n, "measurement", t, "", "z", "", e->point.coordinates());
        } else if (const auto *f = std::get_if<Fan>(&rec)) {
            const std::string t = format_double(f->t);
            w.complex_rows(n, "fan", t, "", "apex", "", f->apex.coordinates());
            for (std::size_t k = 0; k < f->branches.size(); ++k) {
                const std::string branch = std::to_string(k + 1);
                w.complex_rows(n, "fan", t, "", "w", branch, f->branches[k].w.components());
                w.real_row(n, "fan", t, "p", branch, "", f->branches[k].p);
            }
        } else if (const auto *m = std::get_if<MixtureState>(&rec)) {
            const std::string t = format_double(m->t);
            for (std::size_t k = 0; k < m->components.size(); ++k) {
                const std::string branch = std::to_string(k + 1);
                w.complex_rows(n, "mixture", t, "", "alpha", branch, m->components[k].state.values);
                w.real_row(n, "mixture", t, "weight", branch, "", m->components[k].weight);
            }
        } else if (const auto *g = std::get_if<GeodesicSample>(&rec)) {
            const std::string u = format_double(g->u);
            w.complex_rows(n, "gsample", u, "", "z", "", g->z);
            w.complex_rows(n, "gsample", u, "", "p", "", g->p);
            for (Eigen::Index a = 0; a < g->gram.rows(); ++a)
                for (Eigen::Index b = 0; b < g->gram.cols(); ++b)
                    w.row(n, "gsample", u, "", "gram", "", std::to_string(a + 1) + ":" + std::to_string(b + 1),
                          format_double(g->gram(a, b).real()), format_double(g->gram(a, b).imag()));
        } else if (const auto *r = std::get_if<GeodesicReport>(&rec)) {
            auto scalar = [&](std::string_view field, double x) { w.real_row(n, "geodesic_report", "", field, "", "", x); };
            scalar("u_span", r->u_span);
            scalar("step", r->step);
            scalar("samples", static_cast<double>(r->samples));
            scalar("path_length", r->path_length);
            scalar("drift", r->drift);
            if (r->oracle_segments) scalar("oracle_segments", static_cast<double>(*r->oracle_segments));
            if (r->oracle_length) scalar("oracle_length", *r->oracle_length);
            if (r->oracle_relative_difference)
                scalar("oracle_relative_difference", *r->oracle_relative_difference);
        }
    }
}

void write_trace(const Trace &trace, TraceFormat format, std::ostream &out) {
    if (format == TraceFormat::jsonl)
        write_jsonl(trace, out);
    else
        write_csv(trace, out);
}

Trace read_jsonl(std::istream &in) {
    Trace trace;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (!have_header) {
                trace.header.version = j.at("trace_version").get<int>();
                trace.header.spec_sha256 = j.at("spec_sha256").get<std::string>();
                trace.header.seed = j.at("seed").get<std::uint64_t>();
                have_header = true;
            } else {
                trace.records.push_back(decode(j));
            }
        } catch (const json::exception &e) {
            throw Error("trace line " + std::to_string(number) + ": " + e.what());
        } catch (const Error &e) {
            throw Error("trace line " + std::to_string(number) + ": " + e.what());
        }
    }
    if (!have_header) throw Error("trace has no header line");
    return trace;
}

PiecewiseTrajectory reconstruct_trajectory(const Trace &trace) {
    PiecewiseTrajectory out;
    for (const auto &r : trace.records)
        if (const auto *s = std::get_if<TrajectorySegment>(&r)) out.append(*s);
    return out;
}

} // namespace qsub
