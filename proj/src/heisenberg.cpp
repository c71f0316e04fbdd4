#include "qsub/heisenberg.hpp"

#include <cmath>
#include <sstream>

#include "qsub/errors.hpp"
#include "qsub/substrate.hpp"

namespace qsub {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char *what) {
    if (a != b)
        throw DimensionMismatch(std::string(what) + ": dimensions " + std::to_string(a) + " and " +
                                std::to_string(b));
}

} // namespace

HermitianMatrix evolve_observable(const Observable &a, const Hamiltonian &h, double t, double t0,
                                  double hbar) {
    require_same_dim(a.matrix0.dim(), h.matrix.dim(), "evolve_observable");
    if (t == t0) return a.matrix0;
    const ComplexMatrix u = unitary_exp(h.matrix, t - t0, hbar).matrix();
    return HermitianMatrix::hermitize(u.adjoint() * a.matrix0.matrix() * u);
}

CommonEigenbasis evolve_eigenbasis(const CommonEigenbasis &b, const Hamiltonian &h, double t,
                                   double t0, double hbar) {
    require_same_dim(b.dim(), h.matrix.dim(), "evolve_eigenbasis");
    if (t == t0) return b;
    const ComplexMatrix carry = unitary_exp(h.matrix, t - t0, hbar).matrix().adjoint();
    CommonEigenbasis out = b;
    for (Eigen::Index k = 0; k < out.vectors.cols(); ++k)
        out.vectors.col(k) = canonical_phase(ComplexVector(carry * b.vectors.col(k)));
    return out;
}

double expectation(const VelocityVector &v, const HermitianMatrix &a, double velocity_scale) {
    require_same_dim(v.dim(), a.dim(), "expectation");
    const VelocityScale scale(velocity_scale);
    const double vn = v.norm();
    if (!(std::abs(vn - scale.value()) <= 1e-9 * scale.value())) {
        std::ostringstream os;
        os.precision(17);
        os << "expectation: |v| = " << vn << " differs from V = " << scale.value();
        throw DomainError(os.str());
    }
    const Complex value =
        v.components().dot(a.matrix() * v.components()) / (scale.value() * scale.value());
    if (!(std::abs(value.imag()) <= 1e-10 * std::max(1.0, a.norm()))) {
        std::ostringstream os;
        os << "expectation: imaginary residue " << value.imag();
        throw DomainError(os.str());
    }
    return value.real();
}

double commutator_norm(const Observable &a, const Hamiltonian &h) {
    require_same_dim(a.matrix0.dim(), h.matrix.dim(), "commutator_norm");
    return max_abs(commutator(a.matrix0.matrix(), h.matrix.matrix()));
}

} // namespace qsub
