#include "qsub/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "qsub/errors.hpp"

namespace qsub {

namespace {

constexpr double kMaxCondition = 1e12;

std::string describe(const ComplexVector &z) {
    std::ostringstream os;
    os.precision(17);
    os << "z = (";
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (i) os << ", ";
        os << z[i].real() << (z[i].imag() < 0 ? "-" : "+") << std::abs(z[i].imag()) << "i";
    }
    os << ")";
    return os.str();
}

void require_dim(std::size_t expected, Eigen::Index got, const char *what) {
    if (static_cast<Eigen::Index>(expected) != got)
        throw DimensionMismatch(std::string(what) + ": expected dimension " +
                                std::to_string(expected) + ", got " + std::to_string(got));
}

// Multilinear interpolation over the real coordinates of z. Fills `value`
// and, when `grad` is non-null, the partial derivative along every real axis.
void interpolate(const TabulatedGrid &grid, const ComplexVector &z, ComplexMatrix &value,
                 std::vector<ComplexMatrix> *grad) {
    const std::size_t axes = grid.counts.size();
    std::vector<std::size_t> cell(axes);
    std::vector<double> frac(axes);
    std::vector<double> inv_spacing(axes);
    std::vector<bool> inside(axes);
    for (std::size_t a = 0; a < axes; ++a) {
        const Complex c = z[static_cast<Eigen::Index>(a / 2)];
        const double x = (a % 2 == 0) ? c.real() : c.imag();
        const double span = grid.upper[a] - grid.lower[a];
        const double n1 = static_cast<double>(grid.counts[a] - 1);
        double pos = (x - grid.lower[a]) / span * n1;
        inside[a] = pos >= 0.0 && pos <= n1;
        pos = std::clamp(pos, 0.0, n1);
        const auto i = std::min(static_cast<std::size_t>(pos), grid.counts[a] - 2);
        cell[a] = i;
        frac[a] = pos - static_cast<double>(i);
        inv_spacing[a] = n1 / span;
    }
    const auto dim = grid.values.front().rows();
    value = ComplexMatrix::Zero(dim, dim);
    if (grad) grad->assign(axes, ComplexMatrix::Zero(dim, dim));
    const std::size_t corners = std::size_t{1} << axes;
    for (std::size_t corner = 0; corner < corners; ++corner) {
        std::size_t node = 0;
        double weight = 1.0;
        for (std::size_t a = 0; a < axes; ++a) {
            const bool upper = (corner >> (axes - 1 - a)) & 1U;
            node = node * grid.counts[a] + cell[a] + (upper ? 1 : 0);
            weight *= upper ? frac[a] : 1.0 - frac[a];
        }
        const ComplexMatrix &g = grid.values[node];
        value += weight * g;
        if (!grad) continue;
        for (std::size_t d = 0; d < axes; ++d) {
            if (!inside[d]) continue;
            double w = 1.0;
            for (std::size_t a = 0; a < axes; ++a) {
                const bool upper = (corner >> (axes - 1 - a)) & 1U;
                if (a == d)
                    w *= (upper ? 1.0 : -1.0) * inv_spacing[a];
                else
                    w *= upper ? frac[a] : 1.0 - frac[a];
            }
            (*grad)[d] += w * g;
        }
    }
}

template <class F> ComplexVector rk4_step(const ComplexVector &y, double h, F &&f) {
    const ComplexVector k1 = f(y);
    const ComplexVector k2 = f(ComplexVector(y + 0.5 * h * k1));
    const ComplexVector k3 = f(ComplexVector(y + 0.5 * h * k2));
    const ComplexVector k4 = f(ComplexVector(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Bracket of the absolute derivative, before contraction with g^{mi}.
ComplexVector bracket(const std::vector<ComplexMatrix> &dg, const ComplexVector &w,
                      const ComplexVector &v, TransportVariant variant) {
    const Eigen::Index n = w.size();
    ComplexVector out = ComplexVector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ComplexMatrix &di = dg[static_cast<std::size_t>(i)];
        // d_i g_kl (conj-slot)^k (linear-slot)^l
        out[i] += variant == TransportVariant::conjugate_slot ? w.dot(di * v) : v.dot(di * w);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const ComplexMatrix &dk = dg[static_cast<std::size_t>(k)];
        // d_k g_ji (conj-slot)^j (linear-slot)^k
        if (variant == TransportVariant::conjugate_slot)
            out -= v[k] * (dk.transpose() * w.conjugate());
        else
            out -= w[k] * (dk.transpose() * v.conjugate());
        // d_k g_ij w^j v^k
        out -= v[k] * (dk * w);
    }
    return out;
}

[[noreturn]] void rethrow_at(const SingularMetricError &e, double u) {
    std::ostringstream os;
    os.precision(17);
    os << e.what() << " (u = " << u << ")";
    throw SingularMetricError(os.str());
}

std::size_t step_count(double span, double h, std::uint64_t max_steps) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("integrator step must be positive");
    if (!(span >= 0.0) || !std::isfinite(span)) throw DomainError("integration span must be >= 0");
    if (span == 0.0) return 0;
    const double ratio = span / h;
    double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) n = std::ceil(ratio);
    n = std::max(n, 1.0);
    if (n > static_cast<double>(max_steps))
        throw DomainError("integration needs " + std::to_string(static_cast<long long>(n)) +
                          " steps, above the configured maximum " + std::to_string(max_steps));
    return static_cast<std::size_t>(n);
}

double simpson(const std::vector<double> &f, double h) {
    const std::size_t n = f.size() - 1; // intervals
    if (n == 0) return 0.0;
    if (n == 1) return 0.5 * h * (f[0] + f[1]);
    auto simpson_even = [&](std::size_t begin, std::size_t end) {
        double s = f[begin] + f[end];
        for (std::size_t k = begin + 1; k < end; ++k) s += ((k - begin) % 2 ? 4.0 : 2.0) * f[k];
        return s * h / 3.0;
    };
    if (n % 2 == 0) return simpson_even(0, n);
    // odd interval count: 3/8 rule on the last three intervals
    const double tail = 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]);
    return (n > 3 ? simpson_even(0, n - 3) : 0.0) + tail;
}

} // namespace

std::string_view to_string(MetricFamily f) {
    switch (f) {
    case MetricFamily::flat: return "flat";
    case MetricFamily::diagonal_conformal: return "diagonal-conformal";
    case MetricFamily::tabulated: return "tabulated";
    }
    return "unknown";
}

MetricFamily metric_family_from_string(std::string_view name) {
    if (name == "flat") return MetricFamily::flat;
    if (name == "diagonal-conformal") return MetricFamily::diagonal_conformal;
    if (name == "tabulated") return MetricFamily::tabulated;
    throw DomainError("unknown metric family '" + std::string(name) + "'");
}

std::string_view to_string(TransportVariant v) {
    return v == TransportVariant::conjugate_slot ? "conjugate-slot" : "linear-slot";
}

TransportVariant transport_variant_from_string(std::string_view name) {
    if (name == "conjugate-slot") return TransportVariant::conjugate_slot;
    if (name == "linear-slot") return TransportVariant::linear_slot;
    throw DomainError("unknown transport variant '" + std::string(name) + "'");
}

HermitianMetricField HermitianMetricField::flat(std::size_t dim) {
    if (dim == 0) throw DomainError("metric dimension must be positive");
    return {dim, Flat{}};
}

HermitianMetricField HermitianMetricField::conformal(std::size_t dim, double kappa) {
    if (dim == 0) throw DomainError("metric dimension must be positive");
    if (!std::isfinite(kappa) || kappa < 0.0) throw DomainError("conformal exponent must be >= 0");
    return {dim, Conformal{kappa}};
}

HermitianMetricField HermitianMetricField::tabulated(TabulatedGrid grid) {
    const std::size_t axes = grid.counts.size();
    if (axes == 0 || axes % 2 != 0 || axes > 4)
        throw DomainError("tabulated metric needs 2 or 4 real axes (dim 1 or 2)");
    if (grid.lower.size() != axes || grid.upper.size() != axes)
        throw DomainError("tabulated metric: lower/upper must have one entry per axis");
    std::size_t nodes = 1;
    for (std::size_t a = 0; a < axes; ++a) {
        if (grid.counts[a] < 2) throw DomainError("tabulated metric: every axis needs >= 2 nodes");
        if (!(grid.upper[a] > grid.lower[a]))
            throw DomainError("tabulated metric: upper bound must exceed lower bound");
        nodes *= grid.counts[a];
    }
    if (grid.values.size() != nodes)
        throw DomainError("tabulated metric: expected " + std::to_string(nodes) + " node values, got " +
                          std::to_string(grid.values.size()));
    const std::size_t dim = axes / 2;
    for (std::size_t k = 0; k < nodes; ++k) {
        const ComplexMatrix &g = grid.values[k];
        require_dim(dim, g.rows(), "tabulated metric node");
        require_dim(dim, g.cols(), "tabulated metric node");
        if (hermitian_asymmetry(g) > 1e-10 * std::max(1.0, max_abs(g)))
            throw DomainError("tabulated metric node " + std::to_string(k) + " is not Hermitian");
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(g, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > 0.0))
            throw DomainError("tabulated metric node " + std::to_string(k) +
                              " is not positive-definite");
    }
    return {dim, Tabulated{std::make_shared<const TabulatedGrid>(std::move(grid))}};
}

HermitianMetricField HermitianMetricField::from_spec(const MetricSpec &spec, std::size_t dim) {
    switch (spec.family) {
    case MetricFamily::flat: return flat(dim);
    case MetricFamily::diagonal_conformal:
        return conformal(dim, spec.params.empty() ? 1.0 : spec.params.front());
    case MetricFamily::tabulated: {
        if (!spec.grid) throw DomainError("tabulated metric requires a grid");
        auto field = tabulated(*spec.grid);
        if (field.dim() != dim)
            throw DimensionMismatch("tabulated metric grid has dimension " +
                                    std::to_string(field.dim()) + ", scenario has " +
                                    std::to_string(dim));
        return field;
    }
    }
    throw DomainError("unknown metric family");
}

MetricFamily HermitianMetricField::family() const noexcept {
    if (std::holds_alternative<Flat>(impl_)) return MetricFamily::flat;
    if (std::holds_alternative<Conformal>(impl_)) return MetricFamily::diagonal_conformal;
    return MetricFamily::tabulated;
}

double HermitianMetricField::kappa() const noexcept {
    if (const auto *c = std::get_if<Conformal>(&impl_)) return c->kappa;
    return 0.0;
}

ComplexMatrix HermitianMetricField::metric(const ComplexVector &z) const {
    require_dim(dim_, z.size(), "metric");
    const auto n = static_cast<Eigen::Index>(dim_);
    if (std::holds_alternative<Flat>(impl_)) return ComplexMatrix::Identity(n, n);
    if (const auto *c = std::get_if<Conformal>(&impl_)) {
        const double f = std::pow(1.0 + z.squaredNorm(), -c->kappa);
        return f * ComplexMatrix::Identity(n, n);
    }
    ComplexMatrix value;
    interpolate(*std::get<Tabulated>(impl_).grid, z, value, nullptr);
    return value;
}

std::vector<ComplexMatrix> HermitianMetricField::derivatives(const ComplexVector &z) const {
    require_dim(dim_, z.size(), "metric derivatives");
    const auto n = static_cast<Eigen::Index>(dim_);
    std::vector<ComplexMatrix> out(dim_, ComplexMatrix::Zero(n, n));
    if (std::holds_alternative<Flat>(impl_)) return out;
    if (const auto *c = std::get_if<Conformal>(&impl_)) {
        if (c->kappa == 0.0) return out;
        // d/dz^m f(conj(z).z) = f'(s) conj(z^m)
        const double fprime = -c->kappa * std::pow(1.0 + z.squaredNorm(), -c->kappa - 1.0);
        for (Eigen::Index m = 0; m < n; ++m)
            out[static_cast<std::size_t>(m)] = (fprime * std::conj(z[m])) * ComplexMatrix::Identity(n, n);
        return out;
    }
    ComplexMatrix value;
    std::vector<ComplexMatrix> grad;
    interpolate(*std::get<Tabulated>(impl_).grid, z, value, &grad);
    const Complex half_i(0.0, 0.5);
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto m2 = static_cast<std::size_t>(2 * m);
        out[static_cast<std::size_t>(m)] = 0.5 * grad[m2] - half_i * grad[m2 + 1];
    }
    return out;
}

MetricSample metric_eval(const HermitianMetricField &field, const ComplexVector &z) {
    if (!z.allFinite()) throw DomainError("metric_eval: non-finite location");
    MetricSample s;
    s.g = field.metric(z);
    s.dg = field.derivatives(z);
    const auto n = s.g.rows();
    switch (field.family()) {
    case MetricFamily::flat:
        s.ginv = ComplexMatrix::Identity(n, n);
        return s;
    case MetricFamily::diagonal_conformal: {
        const double f = s.g(0, 0).real();
        if (!(f > 0.0) || !std::isfinite(1.0 / f))
            throw SingularMetricError("metric is singular at " + describe(z));
        s.ginv = (1.0 / f) * ComplexMatrix::Identity(n, n);
        return s;
    }
    case MetricFamily::tabulated: break;
    }
    if (hermitian_asymmetry(s.g) > 1e-10 * std::max(1.0, max_abs(s.g)))
        throw SingularMetricError("metric is not Hermitian at " + describe(z));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(s.g);
    const Eigen::VectorXd &lambda = eig.eigenvalues();
    if (eig.info() != Eigen::Success || !(lambda.minCoeff() > 0.0) ||
        lambda.maxCoeff() / lambda.minCoeff() > kMaxCondition)
        throw SingularMetricError("metric is singular or not positive-definite at " + describe(z));
    s.ginv = eig.eigenvectors() * lambda.cwiseInverse().cast<Complex>().asDiagonal() *
             eig.eigenvectors().adjoint();
    return s;
}

double derivative_check(const HermitianMetricField &field, const ComplexVector &z, double step) {
    const auto analytic = field.derivatives(z);
    double worst = 0.0;
    for (Eigen::Index m = 0; m < z.size(); ++m) {
        ComplexVector zx_p = z, zx_m = z, zy_p = z, zy_m = z;
        zx_p[m] += step;
        zx_m[m] -= step;
        zy_p[m] += Complex(0.0, step);
        zy_m[m] -= Complex(0.0, step);
        const ComplexMatrix dx = (field.metric(zx_p) - field.metric(zx_m)) / (2.0 * step);
        const ComplexMatrix dy = (field.metric(zy_p) - field.metric(zy_m)) / (2.0 * step);
        const ComplexMatrix fd = 0.5 * (dx - Complex(0.0, 1.0) * dy);
        worst = std::max(worst, max_abs(fd - analytic[static_cast<std::size_t>(m)]));
    }
    return worst;
}

ComplexVector transport_rhs(const MetricSample &sample, const ComplexVector &w,
                            const ComplexVector &v, TransportVariant variant) {
    return sample.ginv * bracket(sample.dg, w, v, variant);
}

ComplexVector geodesic_rhs(const HermitianMetricField &field, const ComplexVector &z,
                           const ComplexVector &p) {
    require_dim(field.dim(), p.size(), "geodesic_rhs");
    if (field.family() == MetricFamily::flat) return ComplexVector::Zero(p.size());
    return transport_rhs(metric_eval(field, z), p, p, TransportVariant::conjugate_slot);
}

ComplexMatrix transport_generator(const MetricSample &sample, const ComplexVector &v,
                                  TransportVariant variant) {
    const Eigen::Index n = v.size();
    ComplexMatrix lin = ComplexMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) lin -= v[k] * sample.dg[static_cast<std::size_t>(k)];
    if (variant == TransportVariant::linear_slot) {
        for (Eigen::Index i = 0; i < n; ++i) {
            // d_i g_kl conj(v^k) w^l
            lin.row(i) += v.adjoint() * sample.dg[static_cast<std::size_t>(i)];
            // - d_k g_ji conj(v^j) w^k
            for (Eigen::Index k = 0; k < n; ++k)
                lin(i, k) -= v.dot(sample.dg[static_cast<std::size_t>(k)].col(i));
        }
    }
    return sample.ginv * lin;
}

GeodesicPath::GeodesicPath(HermitianMetricField field, double h, std::vector<GeodesicState> samples)
    : field_(std::move(field)), h_(h), samples_(std::move(samples)) {
    if (samples_.empty()) throw DomainError("geodesic path needs at least one sample");
    if (!(h_ > 0.0)) throw DomainError("geodesic path step must be positive");
    for (std::size_t k = 1; k < samples_.size(); ++k)
        if (!(samples_[k].u > samples_[k - 1].u))
            throw DomainError("geodesic path samples must have increasing u");
}

GeodesicPath integrate_geodesic(const HermitianMetricField &field, const ComplexVector &z0,
                                const ComplexVector &p0, double u_span,
                                const IntegratorSettings &settings) {
    require_dim(field.dim(), z0.size(), "integrate_geodesic");
    require_dim(field.dim(), p0.size(), "integrate_geodesic");
    const std::size_t n = step_count(u_span, settings.h, settings.max_steps);
    const double h = n == 0 ? settings.h : u_span / static_cast<double>(n);
    const Eigen::Index d = z0.size();

    std::vector<GeodesicState> samples;
    samples.reserve(n + 1);
    samples.push_back({z0, p0, 0.0});
    ComplexVector y(2 * d);
    y << z0, p0;
    auto rhs = [&](const ComplexVector &s) {
        ComplexVector out(2 * d);
        out << s.tail(d), geodesic_rhs(field, s.head(d), s.tail(d));
        return out;
    };
    for (std::size_t k = 1; k <= n; ++k) {
        try {
            y = rk4_step(y, h, rhs);
        } catch (const SingularMetricError &e) {
            rethrow_at(e, static_cast<double>(k - 1) * h);
        }
        if (!y.allFinite())
            throw DomainError("geodesic integration diverged at u = " +
                              std::to_string(static_cast<double>(k) * h));
        samples.push_back({y.head(d), y.tail(d), static_cast<double>(k) * h});
    }
    return GeodesicPath(field, h, std::move(samples));
}

TransportFrame parallel_transport(const GeodesicPath &path, std::span<const ComplexVector> w0,
                                  TransportVariant variant) {
    const HermitianMetricField &field = path.field();
    const auto d = static_cast<Eigen::Index>(field.dim());
    for (const auto &w : w0) require_dim(field.dim(), w.size(), "parallel_transport");
    const auto nw = static_cast<Eigen::Index>(w0.size());

    ComplexVector y(2 * d + nw * d);
    y.head(d) = path.front().z;
    y.segment(d, d) = path.front().p;
    for (Eigen::Index a = 0; a < nw; ++a) y.segment(2 * d + a * d, d) = w0[static_cast<std::size_t>(a)];

    auto rhs = [&](const ComplexVector &s) {
        ComplexVector out(s.size());
        const ComplexVector z = s.head(d);
        const ComplexVector p = s.segment(d, d);
        out.head(d) = p;
        if (field.family() == MetricFamily::flat) {
            out.tail(out.size() - d).setZero();
            return out;
        }
        const MetricSample m = metric_eval(field, z);
        out.segment(d, d) = transport_rhs(m, p, p, TransportVariant::conjugate_slot);
        for (Eigen::Index a = 0; a < nw; ++a)
            out.segment(2 * d + a * d, d) =
                transport_rhs(m, ComplexVector(s.segment(2 * d + a * d, d)), p, variant);
        return out;
    };

    TransportFrame frame;
    auto record = [&](const ComplexVector &s, const ComplexVector &z) {
        std::vector<ComplexVector> ws;
        ComplexMatrix cols(d, nw);
        for (Eigen::Index a = 0; a < nw; ++a) {
            ws.emplace_back(s.segment(2 * d + a * d, d));
            cols.col(a) = ws.back();
        }
        frame.gram.push_back(cols.adjoint() * field.metric(z) * cols);
        frame.vectors.push_back(std::move(ws));
    };
    record(y, path.front().z);
    const auto &samples = path.samples();
    for (std::size_t k = 1; k < samples.size(); ++k) {
        y = rk4_step(y, path.step(), rhs);
        const ComplexVector z = y.head(d);
        const double scale = std::max(1.0, samples[k].z.norm());
        if ((z - samples[k].z).norm() > 1e-9 * scale)
            throw DomainError("parallel_transport: path is not a geodesic of its metric field");
        record(y, z);
    }
    return frame;
}

double transport_drift(const TransportFrame &frame) {
    double worst = 0.0;
    for (const auto &g : frame.gram) worst = std::max(worst, max_abs(g - frame.gram.front()));
    return worst;
}

std::vector<ComplexMatrix> transport_operator(const GeodesicPath &path, const ComplexMatrix &h0,
                                              TransportVariant variant) {
    const HermitianMetricField &field = path.field();
    const auto d = static_cast<Eigen::Index>(field.dim());
    require_dim(field.dim(), h0.rows(), "transport_operator");
    require_dim(field.dim(), h0.cols(), "transport_operator");

    ComplexVector y(2 * d + d * d);
    y.head(d) = path.front().z;
    y.segment(d, d) = path.front().p;
    y.tail(d * d) = h0.reshaped();

    auto rhs = [&](const ComplexVector &s) {
        ComplexVector out = ComplexVector::Zero(s.size());
        const ComplexVector z = s.head(d);
        const ComplexVector p = s.segment(d, d);
        out.head(d) = p;
        if (field.family() == MetricFamily::flat) return out;
        const MetricSample m = metric_eval(field, z);
        out.segment(d, d) = transport_rhs(m, p, p, TransportVariant::conjugate_slot);
        const ComplexMatrix gen = transport_generator(m, p, variant);
        const ComplexMatrix h = s.tail(d * d).reshaped(d, d);
        out.tail(d * d) = (gen * h - h * gen).reshaped();
        return out;
    };

    std::vector<ComplexMatrix> out;
    out.push_back(h0);
    for (std::size_t k = 1; k < path.samples().size(); ++k) {
        y = rk4_step(y, path.step(), rhs);
        out.emplace_back(y.tail(d * d).reshaped(d, d));
    }
    return out;
}

double metric_speed(const HermitianMetricField &field, const ComplexVector &z,
                    const ComplexVector &v) {
    const double sq = v.dot(field.metric(z) * v).real();
    if (sq < 0.0) throw SingularMetricError("negative squared speed at " + describe(z));
    return std::sqrt(sq);
}

double path_length(const GeodesicPath &path) {
    std::vector<double> integrand;
    integrand.reserve(path.samples().size());
    for (const auto &s : path.samples()) {
        const double sq = s.p.dot(path.field().metric(s.z) * s.p).real();
        if (sq < 0.0) {
            std::ostringstream os;
            os << "negative squared line element at u = " << s.u;
            throw SingularMetricError(os.str());
        }
        integrand.push_back(std::sqrt(sq));
    }
    return simpson(integrand, path.step());
}

namespace {

double segment_length(const HermitianMetricField &field, const ComplexVector &a,
                      const ComplexVector &b) {
    const ComplexVector dz = b - a;
    const ComplexVector mid = 0.5 * (a + b);
    return std::sqrt(std::max(0.0, dz.dot(field.metric(mid) * dz).real()));
}

} // namespace

double discrete_length(const HermitianMetricField &field, std::span<const ComplexVector> points) {
    double total = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k)
        total += segment_length(field, points[k - 1], points[k]);
    return total;
}

DiscretePath variational_oracle(const HermitianMetricField &field, const ComplexVector &zp,
                                const ComplexVector &zq, std::size_t n_segments,
                                const OracleSettings &settings) {
    if (n_segments < 2) throw DomainError("variational_oracle needs at least 2 segments");
    require_dim(field.dim(), zp.size(), "variational_oracle");
    require_dim(field.dim(), zq.size(), "variational_oracle");
    DiscretePath out;
    out.points.reserve(n_segments + 1);
    for (std::size_t k = 0; k <= n_segments; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(n_segments);
        out.points.emplace_back(zp + s * (zq - zp));
    }
    out.length = discrete_length(field, out.points);
    if ((zq - zp).norm() == 0.0) return out;

    constexpr double kInvPhi = 0.6180339887498949;
    const auto d = static_cast<Eigen::Index>(field.dim());
    auto &pts = out.points;

    for (out.sweeps = 1; out.sweeps <= settings.max_sweeps; ++out.sweeps) {
        const double before = out.length;
        for (std::size_t k = 1; k < n_segments; ++k) {
            for (Eigen::Index c = 0; c < 2 * d; ++c) {
                const Complex unit = (c % 2 == 0) ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
                const Eigen::Index comp = c / 2;
                const ComplexVector base = pts[k];
                auto local = [&](double x) {
                    ComplexVector trial = base;
                    trial[comp] += x * unit;
                    return segment_length(field, pts[k - 1], trial) +
                           segment_length(field, trial, pts[k + 1]);
                };
                const double reach =
                    0.5 * std::max((pts[k + 1] - pts[k - 1]).norm(), 1e-300);
                double a = -reach, b = reach;
                double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
                double f1 = local(x1), f2 = local(x2);
                for (int it = 0; it < 60 && (b - a) > 1e-14 * reach; ++it) {
                    if (f1 < f2) {
                        b = x2; x2 = x1; f2 = f1;
                        x1 = b - kInvPhi * (b - a);
                        f1 = local(x1);
                    } else {
                        a = x1; x1 = x2; f1 = f2;
                        x2 = a + kInvPhi * (b - a);
                        f2 = local(x2);
                    }
                }
                const double x = f1 < f2 ? x1 : x2;
                const double fx = std::min(f1, f2);
                if (fx < local(0.0)) pts[k][comp] += x * unit;
            }
        }
        out.length = discrete_length(field, pts);
        if (before - out.length <= settings.relative_tolerance * out.length) return out;
    }
    std::ostringstream os;
    os << "variational oracle did not converge in " << settings.max_sweeps << " sweeps";
    throw ConvergenceError(os.str(), out.length);
}

ShootingResult shoot_geodesic(const HermitianMetricField &field, const ComplexVector &zp,
                              const ComplexVector &zq, const IntegratorSettings &settings,
                              double tolerance, std::size_t max_iterations) {
    require_dim(field.dim(), zp.size(), "shoot_geodesic");
    require_dim(field.dim(), zq.size(), "shoot_geodesic");
    const auto d = static_cast<Eigen::Index>(field.dim());
    auto endpoint = [&](const ComplexVector &p0) {
        return integrate_geodesic(field, zp, p0, 1.0, settings).back().z;
    };
    auto to_real = [&](const ComplexVector &c) {
        Eigen::VectorXd r(2 * d);
        for (Eigen::Index i = 0; i < d; ++i) {
            r[2 * i] = c[i].real();
            r[2 * i + 1] = c[i].imag();
        }
        return r;
    };
    auto to_complex = [&](const Eigen::VectorXd &r) {
        ComplexVector c(d);
        for (Eigen::Index i = 0; i < d; ++i) c[i] = Complex(r[2 * i], r[2 * i + 1]);
        return c;
    };

    ComplexVector p0 = zq - zp;
    Eigen::VectorXd miss = to_real(ComplexVector(endpoint(p0) - zq));
    std::size_t it = 0;
    for (; it < max_iterations && miss.norm() > tolerance; ++it) {
        Eigen::MatrixXd jac(2 * d, 2 * d);
        const Eigen::VectorXd base = to_real(p0);
        for (Eigen::Index c = 0; c < 2 * d; ++c) {
            const double step = 1e-7 * std::max(1.0, base.norm());
            Eigen::VectorXd plus = base, minus = base;
            plus[c] += step;
            minus[c] -= step;
            jac.col(c) = (to_real(endpoint(to_complex(plus))) - to_real(endpoint(to_complex(minus)))) /
                         (2.0 * step);
        }
        const Eigen::VectorXd delta = jac.fullPivLu().solve(-miss);
        double damping = 1.0;
        for (int tries = 0; tries < 30; ++tries, damping *= 0.5) {
            const ComplexVector candidate = to_complex(base + damping * delta);
            const Eigen::VectorXd cm = to_real(ComplexVector(endpoint(candidate) - zq));
            if (cm.norm() < miss.norm()) {
                p0 = candidate;
                miss = cm;
                break;
            }
        }
        if (damping < 1e-8) break;
    }
    if (miss.norm() > tolerance * 1e3)
        throw ConvergenceError("geodesic shooting did not converge", miss.norm());
    return {integrate_geodesic(field, zp, p0, 1.0, settings), p0, miss.norm(), it};
}

} // namespace qsub
