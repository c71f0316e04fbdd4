#include "qsub/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include <Eigen/Eigenvalues>

#include "qsub/errors.hpp"

namespace qsub {

namespace {

// Moduli within this relative margin of the maximum count as tied when the
// canonical phase picks its reference entry.
constexpr double kPhaseTieMargin = 1e-10;

double off_diagonal_residual(const ComplexMatrix &m) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (i != j) r = std::max(r, std::abs(m(i, j)));
    return r;
}

// Orthonormal basis of the subspace spanned by the columns of q, built by
// projecting reference basis vectors e_0, e_1, ... in index order.
ComplexMatrix gram_schmidt_reference_completion(const ComplexMatrix &q) {
    const Eigen::Index dim = q.rows();
    const Eigen::Index m = q.cols();
    ComplexMatrix out(dim, m);
    Eigen::Index accepted = 0;
    for (Eigen::Index i = 0; i < dim && accepted < m; ++i) {
        ComplexVector v = q * q.row(i).adjoint(); // P e_i with P = q q^dagger
        for (Eigen::Index k = 0; k < accepted; ++k)
            v -= out.col(k) * out.col(k).dot(v);
        const double n = v.norm();
        if (n > 1e-8) out.col(accepted++) = v / n;
    }
    if (accepted < m)
        throw ConvergenceError("degenerate subspace completion produced fewer vectors than its dimension",
                               static_cast<double>(m - accepted));
    return out;
}

struct Leaf {
    ComplexMatrix basis; // dim x m, orthonormal columns
    bool degenerate;
};

// Splits the span of `basis` into eigenspaces of ops[level..], appending
// leaves in ascending eigenvalue order.
void refine(std::span<const HermitianMatrix> ops, std::size_t level, const ComplexMatrix &basis,
            const Tolerances &tol, std::vector<Leaf> &leaves) {
    if (basis.cols() == 1) {
        leaves.push_back({basis, false});
        return;
    }
    if (level == ops.size()) {
        leaves.push_back({basis, true});
        return;
    }
    const ComplexMatrix &op = ops[level].matrix();
    const ComplexMatrix restricted = basis.adjoint() * op * basis;
    const ComplexMatrix sym = 0.5 * (restricted + restricted.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eigensolver failed on restricted operator " << level << " (subspace dim "
           << basis.cols() << ")";
        throw ConvergenceError(os.str(), off_diagonal_residual(sym));
    }
    const Eigen::VectorXd &values = solver.eigenvalues();
    const ComplexMatrix rotated = basis * solver.eigenvectors();
    const double scale = std::max(ops[level].norm(), 1e-300);

    Eigen::Index start = 0;
    const Eigen::Index n = values.size();
    for (Eigen::Index k = 1; k <= n; ++k) {
        if (k == n || values[k] - values[k - 1] > tol.degeneracy * scale) {
            refine(ops, level + 1, rotated.middleCols(start, k - start), tol, leaves);
            start = k;
        }
    }
}

} // namespace

double max_abs(const ComplexMatrix &m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double hermitian_asymmetry(const ComplexMatrix &m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    return m.size() == 0 ? 0.0 : (m - m.adjoint()).cwiseAbs().maxCoeff();
}

HermitianMatrix::HermitianMatrix(ComplexMatrix m, double tol) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols())
        throw DimensionMismatch("Hermitian matrix must be square and non-empty, got " +
                                std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
    const double asym = hermitian_asymmetry(m_);
    if (!(asym <= tol * std::max(1.0, max_abs(m_)))) {
        std::ostringstream os;
        os << "matrix is not Hermitian: max asymmetry " << asym;
        throw StructureError(os.str(), asym);
    }
}

HermitianMatrix HermitianMatrix::identity(std::size_t dim) {
    return HermitianMatrix(ComplexMatrix::Identity(static_cast<Eigen::Index>(dim),
                                                   static_cast<Eigen::Index>(dim)));
}

HermitianMatrix HermitianMatrix::diagonal(std::span<const double> values) {
    ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(values.size()),
                                          static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = values[i];
    return HermitianMatrix(std::move(m));
}

HermitianMatrix HermitianMatrix::hermitize(const ComplexMatrix &m) {
    return HermitianMatrix(ComplexMatrix(0.5 * (m + m.adjoint())));
}

UnitaryMatrix::UnitaryMatrix(ComplexMatrix m, double tol) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols())
        throw DimensionMismatch("unitary matrix must be square and non-empty");
    const ComplexMatrix id = ComplexMatrix::Identity(m_.rows(), m_.cols());
    const double dev = max_abs(m_ * m_.adjoint() - id);
    if (!(dev <= tol)) {
        std::ostringstream os;
        os << "matrix is not unitary: max |U U^dagger - I| = " << dev;
        throw StructureError(os.str(), dev);
    }
}

UnitaryMatrix UnitaryMatrix::identity(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return UnitaryMatrix(ComplexMatrix::Identity(n, n), Unchecked{});
}

UnitaryMatrix UnitaryMatrix::adjoint() const { return UnitaryMatrix(m_.adjoint(), Unchecked{}); }

ComplexVector CommonEigenbasis::vector(std::size_t label) const {
    if (label < 1 || label > size())
        throw DomainError("eigenbasis label " + std::to_string(label) + " out of range 1.." +
                          std::to_string(size()));
    return vectors.col(static_cast<Eigen::Index>(label - 1));
}

ComplexVector canonical_phase(const ComplexVector &z) {
    if (z.size() == 0) throw DomainError("canonical phase of an empty vector");
    const double top = z.cwiseAbs().maxCoeff();
    if (!(top > 0.0)) throw DomainError("canonical phase of a zero vector");
    Eigen::Index ref = 0;
    while (std::abs(z[ref]) < top * (1.0 - kPhaseTieMargin)) ++ref;
    const double mod = std::abs(z[ref]);
    const Complex phase = std::conj(z[ref]) / mod;
    ComplexVector out = z * phase;
    out[ref] = Complex(mod, 0.0);
    return out;
}

EigenDecomposition eig_hermitian(const HermitianMatrix &a) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(a.matrix());
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "Hermitian eigensolver did not converge (dim " << a.dim()
           << ", off-diagonal residual " << off_diagonal_residual(a.matrix()) << ")";
        throw ConvergenceError(os.str(), off_diagonal_residual(a.matrix()));
    }
    EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index k = 0; k < out.eigenvectors.cols(); ++k)
        out.eigenvectors.col(k) = canonical_phase(out.eigenvectors.col(k));
    return out;
}

UnitaryMatrix unitary_exp(const HermitianMatrix &h, double t, double hbar) {
    if (!(hbar > 0.0) || !std::isfinite(hbar))
        throw DomainError("hbar must be positive and finite");
    const auto n = static_cast<Eigen::Index>(h.dim());
    if (t == 0.0) return UnitaryMatrix::identity(h.dim());
    const EigenDecomposition eig = eig_hermitian(h);
    ComplexVector phases(n);
    for (Eigen::Index k = 0; k < n; ++k)
        phases[k] = std::polar(1.0, -eig.eigenvalues[k] * t / hbar);
    const ComplexMatrix &v = eig.eigenvectors;
    return UnitaryMatrix(v * phases.asDiagonal() * v.adjoint());
}

ComplexMatrix commutator(const ComplexMatrix &a, const ComplexMatrix &b) { return a * b - b * a; }

CommutationReport verify_commuting(std::span<const HermitianMatrix> ops, double tol) {
    CommutationReport report;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        for (std::size_t j = i + 1; j < ops.size(); ++j) {
            if (ops[i].dim() != ops[j].dim())
                throw DimensionMismatch("operators " + std::to_string(i) + " and " +
                                        std::to_string(j) + " have dimensions " +
                                        std::to_string(ops[i].dim()) + " and " +
                                        std::to_string(ops[j].dim()));
            const double c = max_abs(commutator(ops[i].matrix(), ops[j].matrix()));
            if (c > report.max_norm) {
                report.max_norm = c;
                report.first = i;
                report.second = j;
            }
        }
    }
    report.within_tolerance = report.max_norm <= tol;
    return report;
}

CommonEigenbasis simultaneous_diagonalize(std::span<const HermitianMatrix> ops,
                                          const Tolerances &tol) {
    if (ops.empty()) throw DomainError("simultaneous_diagonalize needs at least one operator");
    double largest = 0.0;
    for (const auto &op : ops) largest = std::max(largest, op.norm());
    const CommutationReport report = verify_commuting(ops, tol.commuting * largest);
    if (!report.within_tolerance) {
        std::ostringstream os;
        os << "operators " << report.first << " and " << report.second
           << " do not commute: max |[A,B]| = " << report.max_norm;
        throw NonCommutingError(os.str(), report.max_norm);
    }

    const auto dim = static_cast<Eigen::Index>(ops.front().dim());
    std::vector<Leaf> leaves;
    refine(ops, 0, ComplexMatrix::Identity(dim, dim), tol, leaves);

    CommonEigenbasis out;
    out.vectors.resize(dim, dim);
    Eigen::Index col = 0;
    for (const Leaf &leaf : leaves) {
        const ComplexMatrix block =
            leaf.degenerate ? gram_schmidt_reference_completion(leaf.basis) : leaf.basis;
        if (leaf.degenerate) out.residual_degeneracies.push_back(static_cast<std::size_t>(block.cols()));
        for (Eigen::Index k = 0; k < block.cols(); ++k) out.vectors.col(col++) = canonical_phase(block.col(k));
    }
    out.eigenvalue_tuples.resize(static_cast<std::size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k) {
        auto &tuple = out.eigenvalue_tuples[static_cast<std::size_t>(k)];
        const ComplexVector v = out.vectors.col(k);
        for (const auto &op : ops) tuple.push_back(v.dot(op.matrix() * v).real());
    }
    return out;
}

} // namespace qsub
