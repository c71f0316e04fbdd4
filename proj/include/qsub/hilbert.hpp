#pragma once

// Dense complex linear algebra for finite-dimensional Hilbert spaces:
// Hermitian/unitary matrix types, eigendecomposition, propagators and
// simultaneous diagonalization of commuting observable sets.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qsub {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Numerical budgets used across the library. Defaults are the documented
/// contract; callers may override them per call.
struct Tolerances {
    double hermiticity = 1e-12;    // relative to max(1, maxabs)
    double unitarity = 1e-10;      // maxabs of U U^dagger - I
    double commuting = 1e-8;       // relative to the largest operator norm
    double orthonormality = 1e-10; // Gram matrix deviation
    double degeneracy = 1e-8;      // eigenvalue clustering, relative
};

double max_abs(const ComplexMatrix &m);

/// Largest |m(i,j) - conj(m(j,i))|.
double hermitian_asymmetry(const ComplexMatrix &m);

class HermitianMatrix {
  public:
    /// Throws StructureError when the asymmetry exceeds
    /// tol * max(1, maxabs(m)); entries are stored as given.
    explicit HermitianMatrix(ComplexMatrix m, double tol = Tolerances{}.hermiticity);

    static HermitianMatrix identity(std::size_t dim);
    static HermitianMatrix diagonal(std::span<const double> values);
    /// Symmetrizes (m + m^dagger)/2; for results of exact conjugations.
    static HermitianMatrix hermitize(const ComplexMatrix &m);

    const ComplexMatrix &matrix() const noexcept { return m_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    double norm() const { return max_abs(m_); }

  private:
    ComplexMatrix m_;
};

class UnitaryMatrix {
  public:
    explicit UnitaryMatrix(ComplexMatrix m, double tol = Tolerances{}.unitarity);

    static UnitaryMatrix identity(std::size_t dim);

    const ComplexMatrix &matrix() const noexcept { return m_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    UnitaryMatrix adjoint() const;

  private:
    struct Unchecked {};
    UnitaryMatrix(ComplexMatrix m, Unchecked) : m_(std::move(m)) {}
    ComplexMatrix m_;
};

struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;   // ascending
    ComplexMatrix eigenvectors;    // column k pairs with eigenvalues[k]
};

/// Orthonormal common eigenvectors of a commuting set. Column K-1 of
/// `vectors` is the vector labelled K; `eigenvalue_tuples[K-1][m]` is its
/// eigenvalue under operator m.
struct CommonEigenbasis {
    ComplexMatrix vectors;
    std::vector<std::vector<double>> eigenvalue_tuples;
    /// Sizes of subspaces that no operator in the set resolved. Non-empty
    /// means the set was not maximal; those bases were completed by
    /// Gram-Schmidt against the reference basis.
    std::vector<std::size_t> residual_degeneracies;

    std::size_t size() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.rows()); }
    bool maximal() const noexcept { return residual_degeneracies.empty(); }
    ComplexVector vector(std::size_t label) const; // 1-based
};

/// Multiplies by a unit phase so that the largest-modulus entry (lowest
/// index among ties) is real and positive. Throws DomainError on zero input.
ComplexVector canonical_phase(const ComplexVector &z);

/// Ascending eigenvalues; eigenvectors in canonical phase.
EigenDecomposition eig_hermitian(const HermitianMatrix &a);

/// exp(-i H t / hbar).
UnitaryMatrix unitary_exp(const HermitianMatrix &h, double t, double hbar);

struct CommutationReport {
    double max_norm = 0.0;
    std::size_t first = 0;  // pair attaining max_norm
    std::size_t second = 0;
    bool within_tolerance = true;
};

/// Largest maxabs norm of [A, B] over all pairs. Throws DimensionMismatch
/// naming the first offending pair.
CommutationReport verify_commuting(std::span<const HermitianMatrix> ops, double tol);

ComplexMatrix commutator(const ComplexMatrix &a, const ComplexMatrix &b);

/// Diagonalizes ops[0], then each following operator restricted to every
/// degenerate eigenspace of the previous ones. Labels are ordered
/// lexicographically by ascending eigenvalue tuple.
CommonEigenbasis simultaneous_diagonalize(std::span<const HermitianMatrix> ops,
                                          const Tolerances &tol = {});

} // namespace qsub
