#pragma once

// Curved generalization of the state-point kinematics: Hermitian metric
// fields g_ij(conj z, z), geodesics, parallel transport of vectors and of
// operator matrices (mixed tensors), path lengths and an independent
// discrete minimizer of the length functional.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qsub/hilbert.hpp"

namespace qsub {

enum class MetricFamily { flat, diagonal_conformal, tabulated };

std::string_view to_string(MetricFamily f);
MetricFamily metric_family_from_string(std::string_view name); // throws DomainError

/// Metric samples on a regular grid over the real coordinates
/// (Re z1, Im z1, Re z2, Im z2, ...), interpolated multilinearly and held
/// constant outside the grid. Only dim <= 2 is supported.
struct TabulatedGrid {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::size_t> counts;  // >= 2 per axis
    std::vector<ComplexMatrix> values; // row-major over nodes, last axis fastest
};

struct MetricSpec {
    MetricFamily family = MetricFamily::flat;
    std::vector<double> params; // diagonal-conformal: [kappa] (default 1)
    std::optional<TabulatedGrid> grid;
};

/// Which slot the transported vector w occupies in the quadratic bracket
/// of the absolute derivative; both reduce to the geodesic equation for w = v.
enum class TransportVariant {
    conjugate_slot, // w conjugated in the first two terms, linear in the third
    linear_slot,    // w linear in every term (transport is complex-linear)
};

std::string_view to_string(TransportVariant v);
TransportVariant transport_variant_from_string(std::string_view name);

class HermitianMetricField {
  public:
    static HermitianMetricField flat(std::size_t dim);
    /// g_ij = delta_ij (1 + conj(z).z)^(-kappa).
    static HermitianMetricField conformal(std::size_t dim, double kappa = 1.0);
    static HermitianMetricField tabulated(TabulatedGrid grid);
    static HermitianMetricField from_spec(const MetricSpec &spec, std::size_t dim);

    MetricFamily family() const noexcept;
    std::size_t dim() const noexcept { return dim_; }
    /// Conformal exponent; 0 for other families.
    double kappa() const noexcept;

    ComplexMatrix metric(const ComplexVector &z) const;
    /// Holomorphic partials: element m is the matrix dg_kl / dz^m.
    std::vector<ComplexMatrix> derivatives(const ComplexVector &z) const;

  private:
    struct Flat {};
    struct Conformal {
        double kappa;
    };
    struct Tabulated {
        std::shared_ptr<const TabulatedGrid> grid;
    };
    using Impl = std::variant<Flat, Conformal, Tabulated>;

    HermitianMetricField(std::size_t dim, Impl impl) : dim_(dim), impl_(std::move(impl)) {}

    std::size_t dim_;
    Impl impl_;
};

struct MetricSample {
    ComplexMatrix g;
    ComplexMatrix ginv;
    std::vector<ComplexMatrix> dg; // dg[m](k, l) = dg_kl / dz^m
};

/// Throws SingularMetricError (naming z) when g is not positive-definite or
/// its condition number exceeds 1e12.
MetricSample metric_eval(const HermitianMetricField &field, const ComplexVector &z);

/// Largest deviation between the analytic holomorphic derivatives and
/// central finite differences 1/2 (d/dx - i d/dy) at z.
double derivative_check(const HermitianMetricField &field, const ComplexVector &z,
                        double step = 1e-5);

/// dp^m/du = g^{mi} (d_i g_kl conj(p^k) p^l - d_k g_ji conj(p^j) p^k - d_k g_ij p^j p^k).
ComplexVector geodesic_rhs(const HermitianMetricField &field, const ComplexVector &z,
                           const ComplexVector &p);

/// Right-hand side for a vector w carried along tangent v.
ComplexVector transport_rhs(const MetricSample &sample, const ComplexVector &w,
                            const ComplexVector &v, TransportVariant variant);

/// Complex-linear part L of the transport generator, so dw/du contains L w.
ComplexMatrix transport_generator(const MetricSample &sample, const ComplexVector &v,
                                  TransportVariant variant);

struct GeodesicState {
    ComplexVector z;
    ComplexVector p; // dz/du
    double u = 0.0;
};

class GeodesicPath {
  public:
    GeodesicPath(HermitianMetricField field, double h, std::vector<GeodesicState> samples);

    const HermitianMetricField &field() const noexcept { return field_; }
    double step() const noexcept { return h_; }
    const std::vector<GeodesicState> &samples() const noexcept { return samples_; }
    const GeodesicState &front() const { return samples_.front(); }
    const GeodesicState &back() const { return samples_.back(); }

  private:
    HermitianMetricField field_;
    double h_;
    std::vector<GeodesicState> samples_;
};

struct IntegratorSettings {
    double h = 1e-3;
    std::uint64_t max_steps = 10'000'000;
};

/// Classic RK4 on (z, p) from u = 0 to u_span. The step is shortened to
/// u_span / ceil(u_span / h) so samples are evenly spaced.
GeodesicPath integrate_geodesic(const HermitianMetricField &field, const ComplexVector &z0,
                                const ComplexVector &p0, double u_span,
                                const IntegratorSettings &settings);

/// Vectors carried along a path, with the metric Gram matrix
/// g_ij conj(w_A^i) w_B^j recorded at every sample.
struct TransportFrame {
    std::vector<std::vector<ComplexVector>> vectors; // [sample][vector]
    std::vector<ComplexMatrix> gram;                 // [sample]
};

/// Integrates the transport equation jointly with the geodesic equation
/// from the path's first sample, with the path's step. Throws DomainError if
/// the path is not reproduced (it was not a geodesic of this field).
TransportFrame parallel_transport(const GeodesicPath &path, std::span<const ComplexVector> w0,
                                  TransportVariant variant = TransportVariant::conjugate_slot);

/// max over samples of maxabs(G(u) - G(0)).
double transport_drift(const TransportFrame &frame);

/// dH/du = L H - H L with L the complex-linear transport generator.
std::vector<ComplexMatrix> transport_operator(const GeodesicPath &path, const ComplexMatrix &h0,
                                              TransportVariant variant = TransportVariant::conjugate_slot);

/// Composite Simpson over the samples of sqrt(g_ij conj(p^i) p^j).
double path_length(const GeodesicPath &path);

struct DiscretePath {
    std::vector<ComplexVector> points; // includes both endpoints
    double length = 0.0;
    std::size_t sweeps = 0;
};

/// sum_k sqrt(g(mid_k)(conj dz_k, dz_k)) over a polyline.
double discrete_length(const HermitianMetricField &field, std::span<const ComplexVector> points);

struct OracleSettings {
    double relative_tolerance = 1e-10;
    std::size_t max_sweeps = 200'000;
};

/// Minimizes discrete_length over the interior points by coordinate descent
/// with golden-section line searches, starting from the straight chord.
DiscretePath variational_oracle(const HermitianMetricField &field, const ComplexVector &zp,
                                const ComplexVector &zq, std::size_t n_segments,
                                const OracleSettings &settings = {});

struct ShootingResult {
    GeodesicPath path;
    ComplexVector p0;
    double miss = 0.0; // |z(1) - zq|
    std::size_t iterations = 0;
};

/// Geodesic from zp reaching zq at u = 1, by damped Newton iteration on
/// the initial tangent with a finite-difference Jacobian.
ShootingResult shoot_geodesic(const HermitianMetricField &field, const ComplexVector &zp,
                              const ComplexVector &zq, const IntegratorSettings &settings,
                              double tolerance = 1e-12, std::size_t max_iterations = 50);

/// sqrt(g_ij conj(v^i) v^j) at z.
double metric_speed(const HermitianMetricField &field, const ComplexVector &z,
                    const ComplexVector &v);

} // namespace qsub
