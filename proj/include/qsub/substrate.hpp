#pragma once

// Flat-space kinematics of the state point. The state vector alpha is read
// as a velocity v = V alpha of a point z moving in C^n; between measurements
// the point moves in a straight line and at a measurement it turns onto one
// of the orthogonal directions V beta_K.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qsub/hilbert.hpp"

namespace qsub {

/// Unit-norm amplitudes in the reference basis.
struct StateAmplitudes {
    ComplexVector values;
    std::size_t dim() const noexcept { return static_cast<std::size_t>(values.size()); }
};

/// The constant V (length / time) converting amplitudes into velocities.
class VelocityScale {
  public:
    explicit VelocityScale(double v);
    double value() const noexcept { return v_; }

  private:
    double v_;
};

class VelocityVector {
  public:
    VelocityVector() = default;
    explicit VelocityVector(ComplexVector components) : c_(std::move(components)) {}
    const ComplexVector &components() const noexcept { return c_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(c_.size()); }
    double norm() const { return c_.norm(); }

  private:
    ComplexVector c_;
};

class StatePoint {
  public:
    StatePoint() = default;
    explicit StatePoint(ComplexVector coordinates) : z_(std::move(coordinates)) {}
    static StatePoint origin(std::size_t dim);
    const ComplexVector &coordinates() const noexcept { return z_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(z_.size()); }

  private:
    ComplexVector z_;
};

struct TrajectorySegment {
    StatePoint start;
    VelocityVector velocity;
    double t_begin = 0.0;
    std::optional<double> t_end; // empty: open-ended final segment

    StatePoint position(double t) const;
    StatePoint end_point() const; // requires t_end
};

/// Contiguous segments joined at measurement times.
class PiecewiseTrajectory {
  public:
    /// Throws DomainError if the segment starts before the previous one ends
    /// or if the previous segment is open.
    void append(TrajectorySegment segment);

    const std::vector<TrajectorySegment> &segments() const noexcept { return segments_; }
    std::vector<double> breakpoints() const;
    /// Position at time t; t must lie in the covered range.
    StatePoint position(double t) const;
    /// Largest |end(k) - start(k+1)| over junctions.
    double junction_mismatch() const;

  private:
    std::vector<TrajectorySegment> segments_;
};

/// v = V alpha; alpha must have unit norm to 1e-10.
VelocityVector velocity_from_state(const StateAmplitudes &alpha, const VelocityScale &v);

/// z(t) = z0 + v (t - t0), t >= t0.
StatePoint advance(const StatePoint &z0, const VelocityVector &v, double t0, double t);

/// z(t) = z0 + v (t1 - t0) + w (t - t1), t >= t1 >= t0.
StatePoint post_measurement_path(const StatePoint &z0, const VelocityVector &v, double t0,
                                 double t1, const VelocityVector &w, double t);

/// |<v, w>|^2 / (|v|^2 |w|^2): the squared generalized direction cosine.
double direction_probability(const VelocityVector &v, const VelocityVector &w);

StatePoint canonical_phase(const StatePoint &z);
StateAmplitudes canonical_phase(const StateAmplitudes &a);
VelocityVector canonical_phase(const VelocityVector &v);

/// z'^i = sum_j U_j^i z^j, with U_i^j stored at row i, column j; this is
/// the transpose of U applied to the component column.
ComplexVector rebase(const UnitaryMatrix &u, const ComplexVector &x);
StateAmplitudes rebase(const UnitaryMatrix &u, const StateAmplitudes &x);
VelocityVector rebase(const UnitaryMatrix &u, const VelocityVector &x);
StatePoint rebase(const UnitaryMatrix &u, const StatePoint &x);
/// The matching change of operator matrices, so expectation values agree.
HermitianMatrix rebase(const UnitaryMatrix &u, const HermitianMatrix &a);

/// (Av)^i = sum_j A_j^i v^j.
ComplexVector apply_matrix(const HermitianMatrix &a, const VelocityVector &v);

/// Dimension cap for composite systems: QSUB_MAX_DIM if set, else 4096.
std::size_t default_max_dimension();

/// Kronecker product, first factor most significant: for three factors of
/// dims (P, Q, R) the flat index of (i, j, k) is (i Q + j) R + k.
StateAmplitudes tensor_compose(std::span<const StateAmplitudes> factors,
                               std::size_t max_dim = default_max_dimension());

} // namespace qsub
