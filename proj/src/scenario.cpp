#include "qsub/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iterator>
#include <map>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "qsub/errors.hpp"
#include "qsub/substrate.hpp"

namespace qsub {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Source locations: a SAX pass over the text records, for every JSON pointer,
// the byte offset reached when the parser emitted that key or value.

class CountingIterator {
  public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char *;
    using reference = const char &;

    CountingIterator() = default;
    CountingIterator(const char *p, const char **cursor) : p_(p), cursor_(cursor) {}
    reference operator*() const { return *p_; }
    CountingIterator &operator++() {
        ++p_;
        if (cursor_ && p_ > *cursor_) *cursor_ = p_;
        return *this;
    }
    CountingIterator operator++(int) {
        auto copy = *this;
        ++*this;
        return copy;
    }
    bool operator==(const CountingIterator &o) const { return p_ == o.p_; }
    bool operator!=(const CountingIterator &o) const { return p_ != o.p_; }

  private:
    const char *p_ = nullptr;
    const char **cursor_ = nullptr;
};

std::string escape_pointer_token(const std::string &s) {
    std::string out;
    for (char c : s) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

class LocationRecorder : public nlohmann::json_sax<json> {
  public:
    LocationRecorder(const char *begin, const char **cursor) : begin_(begin), cursor_(cursor) {}

    std::map<std::string, std::size_t> offsets;

    bool null() override { return scalar(); }
    bool boolean(bool) override { return scalar(); }
    bool number_integer(number_integer_t) override { return scalar(); }
    bool number_unsigned(number_unsigned_t) override { return scalar(); }
    bool number_float(number_float_t, const string_t &) override { return scalar(); }
    bool string(string_t &) override { return scalar(); }
    bool binary(binary_t &) override { return scalar(); }
    bool start_object(std::size_t) override { return open(false); }
    bool end_object() override { return close(); }
    bool start_array(std::size_t) override { return open(true); }
    bool end_array() override { return close(); }
    bool key(string_t &k) override {
        stack_.back().key = k;
        offsets.emplace(child_path(), here());
        return true;
    }
    bool parse_error(std::size_t, const std::string &, const nlohmann::detail::exception &) override {
        return false;
    }

  private:
    struct Frame {
        bool array;
        std::size_t index = 0;
        std::string key;
        std::string path;
    };

    std::size_t here() const {
        const auto pos = static_cast<std::size_t>(*cursor_ - begin_);
        return pos == 0 ? 0 : pos - 1;
    }
    std::string child_path() const {
        if (stack_.empty()) return "";
        const Frame &top = stack_.back();
        return top.path + "/" +
               (top.array ? std::to_string(top.index) : escape_pointer_token(top.key));
    }
    void after_value() {
        if (!stack_.empty() && stack_.back().array) ++stack_.back().index;
    }
    bool scalar() {
        offsets.emplace(child_path(), here());
        after_value();
        return true;
    }
    bool open(bool array) {
        std::string path = child_path();
        offsets.emplace(path, here());
        stack_.push_back({array, 0, {}, std::move(path)});
        return true;
    }
    bool close() {
        stack_.pop_back();
        after_value();
        return true;
    }

    const char *begin_;
    const char **cursor_;
    std::vector<Frame> stack_;
};

struct LineColumn {
    std::size_t line = 1;
    std::size_t column = 1;
};

LineColumn line_column(std::string_view text, std::size_t offset) {
    LineColumn lc;
    offset = std::min(offset, text.size());
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++lc.line;
            lc.column = 1;
        } else {
            ++lc.column;
        }
    }
    return lc;
}

class SourceMap {
  public:
    explicit SourceMap(std::string_view text) : text_(text) {
        const char *cursor = text.data();
        LocationRecorder rec(text.data(), &cursor);
        CountingIterator first(text.data(), &cursor);
        CountingIterator last(text.data() + text.size(), nullptr);
        json::sax_parse(first, last, &rec);
        offsets_ = std::move(rec.offsets);
    }

    // Resolves the pointer, or its longest existing prefix.
    void locate(ParseIssue &issue) const {
        std::string path = issue.path;
        while (true) {
            if (auto it = offsets_.find(path); it != offsets_.end()) {
                const LineColumn lc = line_column(text_, it->second);
                issue.line = lc.line;
                issue.column = lc.column;
                return;
            }
            if (path.empty()) return;
            path.erase(path.rfind('/'));
        }
    }

  private:
    std::string_view text_;
    std::map<std::string, std::size_t> offsets_;
};

// ---------------------------------------------------------------------------
// Structural reading

class Reader {
  public:
    std::vector<ParseIssue> issues;

    void error(std::string path, std::string message) {
        issues.push_back({ParseIssue::Severity::error, std::move(path), std::move(message)});
    }
    void warning(std::string path, std::string message) {
        issues.push_back({ParseIssue::Severity::warning, std::move(path), std::move(message)});
    }

    void check_keys(const json &obj, const std::string &path,
                    std::initializer_list<std::string_view> known) {
        for (const auto &[key, value] : obj.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                warning(path + "/" + escape_pointer_token(key), "unknown key \"" + key + "\" ignored");
        }
    }

    const json *required(const json &obj, const std::string &path, const char *key) {
        auto it = obj.find(key);
        if (it == obj.end()) {
            error(path + "/" + key, std::string("missing required key \"") + key + "\"");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json &v, const std::string &path) {
        if (!v.is_number()) {
            error(path, "expected a number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<std::uint64_t> unsigned_integer(const json &v, const std::string &path) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            error(path, "expected a non-negative integer");
            return std::nullopt;
        }
        return v.get<std::uint64_t>();
    }

    std::optional<Complex> complex(const json &v, const std::string &path) {
        if (v.is_number()) return Complex(v.get<double>(), 0.0);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            error(path, "expected a complex number [re, im]");
            return std::nullopt;
        }
        return Complex(v[0].get<double>(), v[1].get<double>());
    }

    std::optional<ComplexVector> vector(const json &v, const std::string &path) {
        if (!v.is_array() || v.empty()) {
            error(path, "expected a non-empty array of complex numbers");
            return std::nullopt;
        }
        ComplexVector out(static_cast<Eigen::Index>(v.size()));
        bool ok = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto c = complex(v[i], path + "/" + std::to_string(i));
            if (c)
                out[static_cast<Eigen::Index>(i)] = *c;
            else
                ok = false;
        }
        return ok ? std::optional(out) : std::nullopt;
    }

    std::optional<ComplexMatrix> matrix(const json &v, const std::string &path) {
        if (!v.is_array() || v.empty() || !v[0].is_array()) {
            error(path, "expected a matrix (array of rows)");
            return std::nullopt;
        }
        const std::size_t rows = v.size();
        const std::size_t cols = v[0].size();
        ComplexMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        bool ok = true;
        for (std::size_t i = 0; i < rows; ++i) {
            const std::string row_path = path + "/" + std::to_string(i);
            if (!v[i].is_array() || v[i].size() != cols) {
                error(row_path, "matrix rows must all have " + std::to_string(cols) + " entries");
                ok = false;
                continue;
            }
            for (std::size_t j = 0; j < cols; ++j) {
                auto c = complex(v[i][j], row_path + "/" + std::to_string(j));
                if (c)
                    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *c;
                else
                    ok = false;
            }
        }
        return ok ? std::optional(out) : std::nullopt;
    }

    std::optional<std::vector<double>> reals(const json &v, const std::string &path) {
        if (!v.is_array()) {
            error(path, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        bool ok = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto x = number(v[i], path + "/" + std::to_string(i));
            if (x)
                out.push_back(*x);
            else
                ok = false;
        }
        return ok ? std::optional(out) : std::nullopt;
    }
};

std::optional<TabulatedGrid> read_grid(Reader &r, const json &g, const std::string &path) {
    if (!g.is_object()) {
        r.error(path, "grid must be an object");
        return std::nullopt;
    }
    r.check_keys(g, path, {"lower", "upper", "counts", "values"});
    TabulatedGrid grid;
    bool ok = true;
    if (const json *v = r.required(g, path, "lower")) {
        if (auto x = r.reals(*v, path + "/lower")) grid.lower = *x; else ok = false;
    } else ok = false;
    if (const json *v = r.required(g, path, "upper")) {
        if (auto x = r.reals(*v, path + "/upper")) grid.upper = *x; else ok = false;
    } else ok = false;
    if (const json *v = r.required(g, path, "counts")) {
        if (!v->is_array()) {
            r.error(path + "/counts", "expected an array of integers");
            ok = false;
        } else {
            for (std::size_t i = 0; i < v->size(); ++i) {
                auto n = r.unsigned_integer((*v)[i], path + "/counts/" + std::to_string(i));
                if (n) grid.counts.push_back(static_cast<std::size_t>(*n)); else ok = false;
            }
        }
    } else ok = false;
    if (const json *v = r.required(g, path, "values")) {
        if (!v->is_array()) {
            r.error(path + "/values", "expected an array of matrices");
            ok = false;
        } else {
            for (std::size_t i = 0; i < v->size(); ++i) {
                auto m = r.matrix((*v)[i], path + "/values/" + std::to_string(i));
                if (m) grid.values.push_back(*m); else ok = false;
            }
        }
    } else ok = false;
    return ok ? std::optional(grid) : std::nullopt;
}

std::optional<ScenarioSpec> read_spec(Reader &r, const json &doc) {
    if (!doc.is_object()) {
        r.error("", "scenario document must be a JSON object");
        return std::nullopt;
    }
    r.check_keys(doc, "", {"dim", "hbar", "velocity_scale", "hamiltonian", "initial_state",
                           "initial_point", "schedule", "metric", "integrator", "born_variant",
                           "transport_variant", "seed"});
    ScenarioSpec spec;
    bool ok = true;

    if (const json *v = r.required(doc, "", "dim")) {
        if (auto n = r.unsigned_integer(*v, "/dim")) spec.dim = static_cast<std::size_t>(*n); else ok = false;
    } else ok = false;
    if (const json *v = r.required(doc, "", "hbar")) {
        if (auto x = r.number(*v, "/hbar")) spec.hbar = *x; else ok = false;
    } else ok = false;
    if (const json *v = r.required(doc, "", "velocity_scale")) {
        if (auto x = r.number(*v, "/velocity_scale")) spec.velocity_scale = *x; else ok = false;
    } else ok = false;
    if (const json *v = r.required(doc, "", "hamiltonian")) {
        if (auto m = r.matrix(*v, "/hamiltonian")) spec.hamiltonian = *m; else ok = false;
    } else ok = false;
    if (const json *v = r.required(doc, "", "initial_state")) {
        if (auto x = r.vector(*v, "/initial_state")) spec.initial_state = *x; else ok = false;
    } else ok = false;

    if (auto it = doc.find("initial_point"); it != doc.end()) {
        if (auto x = r.vector(*it, "/initial_point")) spec.initial_point = *x; else ok = false;
    } else {
        spec.initial_point = ComplexVector::Zero(static_cast<Eigen::Index>(spec.dim));
    }

    if (const json *v = r.required(doc, "", "schedule")) {
        if (!v->is_array()) {
            r.error("/schedule", "schedule must be an array");
            ok = false;
        } else {
            for (std::size_t k = 0; k < v->size(); ++k) {
                const std::string path = "/schedule/" + std::to_string(k);
                const json &entry = (*v)[k];
                if (!entry.is_object()) {
                    r.error(path, "schedule entry must be an object");
                    ok = false;
                    continue;
                }
                r.check_keys(entry, path, {"time", "observables", "observed"});
                ScheduledMeasurement m;
                if (const json *t = r.required(entry, path, "time")) {
                    if (auto x = r.number(*t, path + "/time")) m.time = *x; else ok = false;
                } else ok = false;
                if (const json *obs = r.required(entry, path, "observables")) {
                    if (!obs->is_array() || obs->empty()) {
                        r.error(path + "/observables", "observables must be a non-empty array of matrices");
                        ok = false;
                    } else {
                        for (std::size_t i = 0; i < obs->size(); ++i) {
                            auto mat = r.matrix((*obs)[i], path + "/observables/" + std::to_string(i));
                            if (mat) m.observables.push_back(*mat); else ok = false;
                        }
                    }
                } else ok = false;
                if (const json *o = r.required(entry, path, "observed")) {
                    if (o->is_boolean())
                        m.observed = o->get<bool>();
                    else {
                        r.error(path + "/observed", "expected a boolean");
                        ok = false;
                    }
                } else ok = false;
                spec.schedule.push_back(std::move(m));
            }
        }
    } else ok = false;

    if (auto it = doc.find("metric"); it != doc.end()) {
        const json &m = *it;
        if (!m.is_object()) {
            r.error("/metric", "metric must be an object");
            ok = false;
        } else {
            r.check_keys(m, "/metric", {"family", "params", "grid"});
            MetricSpec metric;
            if (const json *f = r.required(m, "/metric", "family")) {
                try {
                    if (!f->is_string()) throw DomainError("metric family must be a string");
                    metric.family = metric_family_from_string(f->get<std::string>());
                } catch (const DomainError &e) {
                    r.error("/metric/family", e.what());
                    ok = false;
                }
            } else ok = false;
            if (auto p = m.find("params"); p != m.end()) {
                if (auto x = r.reals(*p, "/metric/params")) metric.params = *x; else ok = false;
            }
            if (auto g = m.find("grid"); g != m.end()) {
                if (auto grid = read_grid(r, *g, "/metric/grid")) metric.grid = std::move(grid); else ok = false;
            }
            spec.metric = std::move(metric);
        }
    }

    if (auto it = doc.find("integrator"); it != doc.end()) {
        if (!it->is_object()) {
            r.error("/integrator", "integrator must be an object");
            ok = false;
        } else {
            r.check_keys(*it, "/integrator", {"h", "max_steps"});
            if (auto h = it->find("h"); h != it->end()) {
                if (auto x = r.number(*h, "/integrator/h")) spec.integrator.h = *x; else ok = false;
            }
            if (auto n = it->find("max_steps"); n != it->end()) {
                if (auto x = r.unsigned_integer(*n, "/integrator/max_steps")) spec.integrator.max_steps = *x; else ok = false;
            }
        }
    }

    if (auto it = doc.find("born_variant"); it != doc.end()) {
        const std::string s = it->is_string() ? it->get<std::string>() : "";
        if (s == "standard")
            spec.born_variant = BornVariant::standard;
        else if (s == "termwise")
            spec.born_variant = BornVariant::termwise;
        else {
            r.error("/born_variant", "born_variant must be \"standard\" or \"termwise\"");
            ok = false;
        }
    }
    if (auto it = doc.find("transport_variant"); it != doc.end()) {
        try {
            if (!it->is_string()) throw DomainError("transport_variant must be a string");
            spec.transport_variant = transport_variant_from_string(it->get<std::string>());
        } catch (const DomainError &e) {
            r.error("/transport_variant", e.what());
            ok = false;
        }
    }
    if (auto it = doc.find("seed"); it != doc.end()) {
        if (auto x = r.unsigned_integer(*it, "/seed")) spec.seed = *x; else ok = false;
    }
    return ok ? std::optional(spec) : std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization

ordered_json complex_json(Complex c) { return ordered_json::array({c.real(), c.imag()}); }

ordered_json vector_json(const ComplexVector &v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v[i]));
    return out;
}

ordered_json matrix_json(const ComplexMatrix &m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

bool same(const ComplexMatrix &a, const ComplexMatrix &b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const ComplexVector &a, const ComplexVector &b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
}

bool same(const TabulatedGrid &a, const TabulatedGrid &b) {
    if (a.lower != b.lower || a.upper != b.upper || a.counts != b.counts ||
        a.values.size() != b.values.size())
        return false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (!same(a.values[i], b.values[i])) return false;
    return true;
}

ParseIssue make_issue(ParseIssue::Severity s, std::string path, std::string message) {
    return {s, std::move(path), std::move(message)};
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

void check_hermitian(std::vector<ParseIssue> &out, const ComplexMatrix &m, std::size_t dim,
                     const std::string &path) {
    if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
        out.push_back(make_issue(ParseIssue::Severity::error, path,
                                 "matrix is " + std::to_string(m.rows()) + "x" +
                                     std::to_string(m.cols()) + ", expected " +
                                     std::to_string(dim) + "x" + std::to_string(dim)));
        return;
    }
    if (!m.allFinite()) {
        out.push_back(make_issue(ParseIssue::Severity::error, path, "matrix has non-finite entries"));
        return;
    }
    const double asym = hermitian_asymmetry(m);
    if (asym > Tolerances{}.hermiticity * std::max(1.0, max_abs(m)))
        out.push_back(make_issue(ParseIssue::Severity::error, path,
                                 "matrix at " + path + " is not Hermitian: max asymmetry " + fmt(asym)));
}

} // namespace

std::string_view to_string(BornVariant v) {
    return v == BornVariant::standard ? "standard" : "termwise";
}

bool operator==(const ScenarioSpec &a, const ScenarioSpec &b) {
    if (a.dim != b.dim || a.hbar != b.hbar || a.velocity_scale != b.velocity_scale ||
        !same(a.hamiltonian, b.hamiltonian) || !same(a.initial_state, b.initial_state) ||
        !same(a.initial_point, b.initial_point) || a.schedule.size() != b.schedule.size() ||
        a.integrator.h != b.integrator.h || a.integrator.max_steps != b.integrator.max_steps ||
        a.born_variant != b.born_variant || a.transport_variant != b.transport_variant ||
        a.seed != b.seed || a.metric.has_value() != b.metric.has_value())
        return false;
    for (std::size_t k = 0; k < a.schedule.size(); ++k) {
        const auto &x = a.schedule[k];
        const auto &y = b.schedule[k];
        if (x.time != y.time || x.observed != y.observed || x.observables.size() != y.observables.size())
            return false;
        for (std::size_t i = 0; i < x.observables.size(); ++i)
            if (!same(x.observables[i], y.observables[i])) return false;
    }
    if (a.metric) {
        const auto &x = *a.metric;
        const auto &y = *b.metric;
        if (x.family != y.family || x.params != y.params || x.grid.has_value() != y.grid.has_value())
            return false;
        if (x.grid && !same(*x.grid, *y.grid)) return false;
    }
    return true;
}

std::string format_issue(const ParseIssue &issue) {
    std::ostringstream os;
    os << (issue.is_error() ? "error" : "warning");
    if (issue.line) os << " (line " << issue.line << ", column " << issue.column << ")";
    os << " at " << (issue.path.empty() ? "/" : issue.path) << ": " << issue.message;
    return os.str();
}

bool ParseResult::ok() const { return spec.has_value() && error_count() == 0; }

std::size_t ParseResult::error_count() const {
    return static_cast<std::size_t>(
        std::count_if(issues.begin(), issues.end(), [](const auto &i) { return i.is_error(); }));
}

std::size_t ParseResult::warning_count() const { return issues.size() - error_count(); }

ParseResult parse_scenario(std::string_view text) {
    ParseResult result;
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        ParseIssue issue{ParseIssue::Severity::error, "", std::string("malformed JSON: ") + e.what()};
        const LineColumn lc = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        issue.line = lc.line;
        issue.column = lc.column;
        result.issues.push_back(std::move(issue));
        return result;
    }

    Reader reader;
    result.spec = read_spec(reader, doc);
    result.issues = std::move(reader.issues);
    if (result.spec) {
        auto more = validate(*result.spec);
        result.issues.insert(result.issues.end(), more.begin(), more.end());
    }
    const SourceMap map(text);
    for (auto &issue : result.issues) map.locate(issue);
    return result;
}

std::vector<ParseIssue> validate(const ScenarioSpec &spec) {
    using S = ParseIssue::Severity;
    std::vector<ParseIssue> out;
    const std::size_t max_dim = default_max_dimension();
    if (spec.dim == 0) {
        out.push_back(make_issue(S::error, "/dim", "dim must be at least 1"));
        return out;
    }
    if (spec.dim > max_dim)
        out.push_back(make_issue(S::error, "/dim",
                                 "dim " + std::to_string(spec.dim) + " exceeds the cap " +
                                     std::to_string(max_dim) + " (QSUB_MAX_DIM)"));
    if (!(spec.hbar > 0.0) || !std::isfinite(spec.hbar))
        out.push_back(make_issue(S::error, "/hbar", "hbar must be positive and finite"));
    if (!(spec.velocity_scale > 0.0) || !std::isfinite(spec.velocity_scale))
        out.push_back(make_issue(S::error, "/velocity_scale", "velocity_scale must be positive and finite"));

    check_hermitian(out, spec.hamiltonian, spec.dim, "/hamiltonian");

    if (static_cast<std::size_t>(spec.initial_state.size()) != spec.dim) {
        out.push_back(make_issue(S::error, "/initial_state",
                                 "initial_state has " + std::to_string(spec.initial_state.size()) +
                                     " entries, expected " + std::to_string(spec.dim)));
    } else {
        const double n = spec.initial_state.norm();
        if (!(std::abs(n - 1.0) <= Tolerances{}.orthonormality))
            out.push_back(make_issue(S::error, "/initial_state",
                                     "initial_state norm " + fmt(n) + " differs from 1"));
    }
    if (static_cast<std::size_t>(spec.initial_point.size()) != spec.dim)
        out.push_back(make_issue(S::error, "/initial_point",
                                 "initial_point has " + std::to_string(spec.initial_point.size()) +
                                     " entries, expected " + std::to_string(spec.dim)));
    else if (!spec.initial_point.allFinite())
        out.push_back(make_issue(S::error, "/initial_point", "initial_point has non-finite entries"));

    for (std::size_t k = 0; k < spec.schedule.size(); ++k) {
        const auto &m = spec.schedule[k];
        const std::string path = "/schedule/" + std::to_string(k);
        if (!std::isfinite(m.time) || m.time < 0.0)
            out.push_back(make_issue(S::error, path + "/time", "measurement time must be finite and >= 0"));
        if (k > 0 && !(m.time > spec.schedule[k - 1].time))
            out.push_back(make_issue(S::error, path + "/time", "schedule times must be strictly increasing"));
        if (m.observables.empty()) {
            out.push_back(make_issue(S::error, path + "/observables", "observable set is empty"));
            continue;
        }
        const std::size_t before = out.size();
        for (std::size_t i = 0; i < m.observables.size(); ++i)
            check_hermitian(out, m.observables[i], spec.dim, path + "/observables/" + std::to_string(i));
        if (out.size() != before) continue;

        std::vector<HermitianMatrix> ops;
        for (const auto &o : m.observables) ops.push_back(HermitianMatrix(o));
        double largest = 0.0;
        for (const auto &o : ops) largest = std::max(largest, o.norm());
        const auto report = verify_commuting(ops, Tolerances{}.commuting * largest);
        if (!report.within_tolerance) {
            out.push_back(make_issue(S::error, path + "/observables",
                                     "observables " + std::to_string(report.first) + " and " +
                                         std::to_string(report.second) +
                                         " do not commute: commutator norm " + fmt(report.max_norm)));
            continue;
        }
        try {
            const CommonEigenbasis basis = simultaneous_diagonalize(ops);
            if (!basis.maximal()) {
                std::string sizes;
                for (auto s : basis.residual_degeneracies)
                    sizes += (sizes.empty() ? "" : ", ") + std::to_string(s);
                out.push_back(make_issue(S::warning, path + "/observables",
                                         "observable set is not maximal: unresolved degenerate "
                                         "subspaces of dimension " + sizes +
                                             " completed from the reference basis"));
            }
        } catch (const Error &e) {
            out.push_back(make_issue(S::error, path + "/observables", e.what()));
        }
    }

    if (spec.metric) {
        const MetricSpec &metric = *spec.metric;
        switch (metric.family) {
        case MetricFamily::flat:
            if (!metric.params.empty())
                out.push_back(make_issue(S::warning, "/metric/params", "flat metric takes no parameters"));
            break;
        case MetricFamily::diagonal_conformal:
            if (metric.params.size() > 1)
                out.push_back(make_issue(S::error, "/metric/params",
                                         "diagonal-conformal metric takes one parameter (kappa)"));
            else if (!metric.params.empty() &&
                     (!std::isfinite(metric.params[0]) || metric.params[0] < 0.0))
                out.push_back(make_issue(S::error, "/metric/params/0", "kappa must be finite and >= 0"));
            break;
        case MetricFamily::tabulated:
            if (!metric.grid) {
                out.push_back(make_issue(S::error, "/metric", "tabulated metric requires a grid"));
            } else if (spec.dim > 2) {
                out.push_back(make_issue(S::error, "/metric/family",
                                         "tabulated metrics support dim <= 2 only"));
            } else {
                try {
                    (void)HermitianMetricField::from_spec(metric, spec.dim);
                } catch (const Error &e) {
                    out.push_back(make_issue(S::error, "/metric/grid", e.what()));
                }
            }
            break;
        }
        if (metric.grid && metric.family != MetricFamily::tabulated)
            out.push_back(make_issue(S::warning, "/metric/grid", "grid is only used by the tabulated family"));
    }

    if (!(spec.integrator.h > 0.0) || !std::isfinite(spec.integrator.h))
        out.push_back(make_issue(S::error, "/integrator/h", "integrator step must be positive"));
    if (spec.integrator.max_steps == 0)
        out.push_back(make_issue(S::error, "/integrator/max_steps", "max_steps must be at least 1"));

    if (spec.born_variant == BornVariant::termwise)
        out.push_back(make_issue(S::warning, "/born_variant",
                                 "termwise Born variant sums |conj(beta_K^i) alpha^i|^2 term by term "
                                 "instead of squaring the modulus of the sum; for comparison only"));
    return out;
}

std::string serialize(const ScenarioSpec &spec) {
    ordered_json doc;
    doc["dim"] = spec.dim;
    doc["hbar"] = spec.hbar;
    doc["velocity_scale"] = spec.velocity_scale;
    doc["hamiltonian"] = matrix_json(spec.hamiltonian);
    doc["initial_state"] = vector_json(spec.initial_state);
    doc["initial_point"] = vector_json(spec.initial_point);
    ordered_json schedule = ordered_json::array();
    for (const auto &m : spec.schedule) {
        ordered_json entry;
        entry["time"] = m.time;
        ordered_json obs = ordered_json::array();
        for (const auto &o : m.observables) obs.push_back(matrix_json(o));
        entry["observables"] = std::move(obs);
        entry["observed"] = m.observed;
        schedule.push_back(std::move(entry));
    }
    doc["schedule"] = std::move(schedule);
    if (spec.metric) {
        ordered_json metric;
        metric["family"] = std::string(to_string(spec.metric->family));
        metric["params"] = spec.metric->params;
        if (spec.metric->grid) {
            const auto &g = *spec.metric->grid;
            ordered_json grid;
            grid["lower"] = g.lower;
            grid["upper"] = g.upper;
            grid["counts"] = g.counts;
            ordered_json values = ordered_json::array();
            for (const auto &v : g.values) values.push_back(matrix_json(v));
            grid["values"] = std::move(values);
            metric["grid"] = std::move(grid);
        }
        doc["metric"] = std::move(metric);
    }
    doc["integrator"] = {{"h", spec.integrator.h}, {"max_steps", spec.integrator.max_steps}};
    doc["born_variant"] = std::string(to_string(spec.born_variant));
    doc["transport_variant"] = std::string(to_string(spec.transport_variant));
    doc["seed"] = spec.seed;
    return doc.dump(2) + "\n";
}

std::string spec_sha256(const ScenarioSpec &spec) {
    const std::string text = serialize(spec);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

} // namespace qsub
