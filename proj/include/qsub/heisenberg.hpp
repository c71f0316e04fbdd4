#pragma once

// Heisenberg-picture evolution for a closed system with a time-independent
// Hamiltonian: observables and their common eigenvectors rotate, the state
// stays fixed between measurements.

#include <string>

#include "qsub/hilbert.hpp"

namespace qsub {

class VelocityVector;

struct Observable {
    HermitianMatrix matrix0; // value at the reference time t0
    std::string label;
};

struct Hamiltonian {
    HermitianMatrix matrix;
};

/// A(t) = e^{iH(t-t0)/hbar} A(t0) e^{-iH(t-t0)/hbar}.
HermitianMatrix evolve_observable(const Observable &a, const Hamiltonian &h, double t, double t0,
                                  double hbar);

/// Carries every vector by e^{iH(t-t0)/hbar} so it stays an eigenvector of
/// the evolved operators. Labels and eigenvalue tuples are unchanged;
/// vectors are returned in canonical phase.
CommonEigenbasis evolve_eigenbasis(const CommonEigenbasis &b, const Hamiltonian &h, double t,
                                   double t0, double hbar);

/// (1/V^2) sum_ij conj(v^j) A_j^i v^i. Requires |v| = V to 1e-9 relative.
double expectation(const VelocityVector &v, const HermitianMatrix &a, double velocity_scale);

/// maxabs of [A(t0), H]; zero marks a constant of the motion.
double commutator_norm(const Observable &a, const Hamiltonian &h);

} // namespace qsub
