#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qsub/errors.hpp"
#include "qsub/hilbert.hpp"
#include "support/random_matrices.hpp"

using namespace qsub;

namespace {

const Complex I(0.0, 1.0);

ComplexMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
    ComplexMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

HermitianMatrix sigma_x() { return HermitianMatrix(mat2(0, 1, 1, 0)); }
HermitianMatrix sigma_y() { return HermitianMatrix(mat2(0, -I, I, 0)); }
HermitianMatrix sigma_z() { return HermitianMatrix(mat2(1, 0, 0, -1)); }

HermitianMatrix diag(std::vector<double> v) { return HermitianMatrix::diagonal(v); }

double residual(const HermitianMatrix &a, const ComplexVector &v, double lambda) {
    return (a.matrix() * v - lambda * v).cwiseAbs().maxCoeff();
}

// Lexicographic order with entries equal to 1e-9 treated as ties.
bool lex_leq(const std::vector<double> &a, const std::vector<double> &b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i] - 1e-9) return true;
        if (a[i] > b[i] + 1e-9) return false;
    }
    return true;
}

} // namespace

TEST(HermitianMatrix, RejectsNonHermitianInput) {
    EXPECT_THROW(HermitianMatrix(mat2(1, 2, 0, 1)), StructureError);
    EXPECT_NO_THROW(HermitianMatrix(mat2(1, 2.0 + 1e-14, 2, 1)));
}

TEST(UnitaryMatrix, RejectsNonUnitaryInput) {
    EXPECT_THROW(UnitaryMatrix(mat2(1, 1, 0, 1)), StructureError);
    EXPECT_NO_THROW(UnitaryMatrix(sigma_x().matrix()));
}

TEST(EigHermitian, PauliZ) {
    const auto e = eig_hermitian(sigma_z());
    EXPECT_DOUBLE_EQ(e.eigenvalues[0], -1.0);
    EXPECT_DOUBLE_EQ(e.eigenvalues[1], 1.0);
}

TEST(EigHermitian, IdentityGivesOrthonormalBasis) {
    const auto e = eig_hermitian(HermitianMatrix::identity(3));
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(e.eigenvalues[k], 1.0, 1e-15);
    const ComplexMatrix gram = e.eigenvectors.adjoint() * e.eigenvectors;
    EXPECT_LE(max_abs(gram - ComplexMatrix::Identity(3, 3)), 1e-10);
}

TEST(EigHermitian, PauliXVectors) {
    const auto e = eig_hermitian(sigma_x());
    EXPECT_NEAR(e.eigenvalues[0], -1.0, 1e-14);
    EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-14);
    const double s = 1.0 / std::sqrt(2.0);
    // up to phase: compare moduli of overlaps with (1, -1)/sqrt2 and (1, 1)/sqrt2
    ComplexVector minus(2), plus(2);
    minus << s, -s;
    plus << s, s;
    EXPECT_NEAR(std::abs(minus.dot(e.eigenvectors.col(0))), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(plus.dot(e.eigenvectors.col(1))), 1.0, 1e-12);
    for (int k = 0; k < 2; ++k)
        EXPECT_LE(residual(sigma_x(), e.eigenvectors.col(k), e.eigenvalues[k]), 1e-12);
}

TEST(EigHermitian, Deterministic) {
    testkit::RandomMatrices rnd(11);
    const HermitianMatrix a(rnd.hermitian(6));
    const auto e1 = eig_hermitian(a);
    const auto e2 = eig_hermitian(a);
    EXPECT_EQ(e1.eigenvalues, e2.eigenvalues);
    EXPECT_EQ(e1.eigenvectors, e2.eigenvectors);
}

TEST(EigHermitian, ReconstructionRandomUpToDim16) {
    testkit::RandomMatrices rnd(2024);
    for (Eigen::Index n = 1; n <= 16; ++n) {
        const HermitianMatrix a(rnd.hermitian(n));
        const auto e = eig_hermitian(a);
        ComplexMatrix rebuilt = ComplexMatrix::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k)
            rebuilt += e.eigenvalues[k] * e.eigenvectors.col(k) * e.eigenvectors.col(k).adjoint();
        EXPECT_LE(max_abs(rebuilt - a.matrix()), 1e-9 * a.norm()) << "dim " << n;
        for (Eigen::Index k = 1; k < n; ++k) EXPECT_LE(e.eigenvalues[k - 1], e.eigenvalues[k]);
        const ComplexMatrix gram = e.eigenvectors.adjoint() * e.eigenvectors;
        EXPECT_LE(max_abs(gram - ComplexMatrix::Identity(n, n)), 1e-10);
    }
}

TEST(CanonicalPhase, LargestComponentRealPositive) {
    ComplexVector z(2);
    z << I, 0.0;
    const ComplexVector c = canonical_phase(z);
    EXPECT_NEAR(c[0].real(), 1.0, 1e-15);
    EXPECT_EQ(c[0].imag(), 0.0);
    EXPECT_THROW(canonical_phase(ComplexVector::Zero(3)), DomainError);
}

TEST(UnitaryExp, ZeroTimeIsIdentity) {
    testkit::RandomMatrices rnd(3);
    const HermitianMatrix h(rnd.hermitian(4));
    EXPECT_EQ(unitary_exp(h, 0.0, 1.0).matrix(), ComplexMatrix::Identity(4, 4));
}

TEST(UnitaryExp, HalfPeriodDiagonal) {
    const double hbar = 0.7, omega = 2.3;
    const HermitianMatrix h = diag({0.0, hbar * omega});
    const ComplexMatrix u = unitary_exp(h, std::numbers::pi / omega, hbar).matrix();
    EXPECT_LE(max_abs(u - mat2(1, 0, 0, -1)), 1e-12);
}

TEST(UnitaryExp, FullPeriodOfSpinIsMinusIdentity) {
    const double hbar = 1.3, omega = 0.9;
    const HermitianMatrix h(0.5 * hbar * omega * sigma_z().matrix());
    const ComplexMatrix u = unitary_exp(h, 2.0 * std::numbers::pi / omega, hbar).matrix();
    EXPECT_LE(max_abs(u + ComplexMatrix::Identity(2, 2)), 1e-12);
}

TEST(UnitaryExp, RejectsNonPositiveHbar) {
    EXPECT_THROW(unitary_exp(sigma_z(), 1.0, 0.0), DomainError);
    EXPECT_THROW(unitary_exp(sigma_z(), 1.0, -1.0), DomainError);
}

TEST(UnitaryExp, GroupPropertyRandom) {
    testkit::RandomMatrices rnd(77);
    for (int trial = 0; trial < 40; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + trial % 8);
        const HermitianMatrix h(rnd.hermitian(n));
        const double s = rnd.uniform(-3, 3), t = rnd.uniform(-3, 3);
        const ComplexMatrix lhs = unitary_exp(h, s, 1.0).matrix() * unitary_exp(h, t, 1.0).matrix();
        EXPECT_LE(max_abs(lhs - unitary_exp(h, s + t, 1.0).matrix()), 1e-9);
        const ComplexMatrix u = unitary_exp(h, t, 1.0).matrix();
        EXPECT_LE(max_abs(u * u.adjoint() - ComplexMatrix::Identity(n, n)), 1e-10);
    }
}

TEST(VerifyCommuting, Examples) {
    const std::vector<HermitianMatrix> zi{sigma_z(), HermitianMatrix::identity(2)};
    EXPECT_EQ(verify_commuting(zi, 1e-8).max_norm, 0.0);

    const std::vector<HermitianMatrix> xz{sigma_x(), sigma_z()};
    const auto r = verify_commuting(xz, 1e-8);
    EXPECT_NEAR(r.max_norm, 2.0, 1e-15);
    EXPECT_FALSE(r.within_tolerance);
    // [sigma_x, sigma_z] = -2i sigma_y
    EXPECT_LE(max_abs(commutator(sigma_x().matrix(), sigma_z().matrix()) + 2.0 * I * sigma_y().matrix()), 1e-15);

    const std::vector<HermitianMatrix> dd{diag({1, 2}), diag({3, 4})};
    EXPECT_EQ(verify_commuting(dd, 1e-8).max_norm, 0.0);
}

TEST(VerifyCommuting, DimensionMismatchNamesPair) {
    const std::vector<HermitianMatrix> ops{sigma_z(), sigma_x(), HermitianMatrix::identity(3)};
    try {
        verify_commuting(ops, 1e-8);
        FAIL() << "expected DimensionMismatch";
    } catch (const DimensionMismatch &e) {
        EXPECT_NE(std::string(e.what()).find("0 and 2"), std::string::npos) << e.what();
    }
}

TEST(SimultaneousDiagonalize, DegeneracyResolvedBySecondOperator) {
    const std::vector<HermitianMatrix> ops{diag({1, 1, 2}), diag({3, 4, 5})};
    const auto b = simultaneous_diagonalize(ops);
    EXPECT_TRUE(b.maximal());
    EXPECT_LE(max_abs(b.vectors - ComplexMatrix::Identity(3, 3)), 1e-12);
    const std::vector<std::vector<double>> expected{{1, 3}, {1, 4}, {2, 5}};
    ASSERT_EQ(b.eigenvalue_tuples.size(), 3u);
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < 2; ++m) EXPECT_NEAR(b.eigenvalue_tuples[k][m], expected[k][m], 1e-12);
}

TEST(SimultaneousDiagonalize, SinglePauliZOrdersAscending) {
    const std::vector<HermitianMatrix> ops{sigma_z()};
    const auto b = simultaneous_diagonalize(ops);
    EXPECT_NEAR(b.eigenvalue_tuples[0][0], -1.0, 1e-14);
    EXPECT_NEAR(b.eigenvalue_tuples[1][0], 1.0, 1e-14);
    EXPECT_NEAR(std::abs(b.vector(1)[1]), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(b.vector(2)[0]), 1.0, 1e-14);
}

TEST(SimultaneousDiagonalize, PauliXWithIdentity) {
    const std::vector<HermitianMatrix> ops{sigma_x(), HermitianMatrix::identity(2)};
    const auto b = simultaneous_diagonalize(ops);
    const double s = 1.0 / std::sqrt(2.0);
    // canonical phase: first component of largest modulus is real positive
    EXPECT_NEAR(std::abs(b.vector(1)[0] - s), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(b.vector(1)[1] + s), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(b.vector(2)[0] - s), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(b.vector(2)[1] - s), 0.0, 1e-12);
    EXPECT_NEAR(b.eigenvalue_tuples[0][0], -1.0, 1e-12);
    EXPECT_NEAR(b.eigenvalue_tuples[0][1], 1.0, 1e-12);
    EXPECT_NEAR(b.eigenvalue_tuples[1][0], 1.0, 1e-12);
    EXPECT_NEAR(b.eigenvalue_tuples[1][1], 1.0, 1e-12);
}

TEST(SimultaneousDiagonalize, NonCommutingCarriesNorm) {
    const std::vector<HermitianMatrix> ops{sigma_x(), sigma_z()};
    try {
        simultaneous_diagonalize(ops);
        FAIL() << "expected NonCommutingError";
    } catch (const NonCommutingError &e) {
        EXPECT_NEAR(e.commutator_norm(), 2.0, 1e-15);
    }
}

TEST(SimultaneousDiagonalize, ResidualDegeneracyCompletedFromReferenceBasis) {
    const std::vector<HermitianMatrix> ops{HermitianMatrix::identity(2)};
    const auto b = simultaneous_diagonalize(ops);
    EXPECT_FALSE(b.maximal());
    ASSERT_EQ(b.residual_degeneracies.size(), 1u);
    EXPECT_EQ(b.residual_degeneracies[0], 2u);
    EXPECT_LE(max_abs(b.vectors - ComplexMatrix::Identity(2, 2)), 1e-15);
}

// Random commuting families: A = U diag(a) U^dagger, B = U diag(b) U^dagger
// with degeneracies in a resolved by b.
TEST(SimultaneousDiagonalize, RandomCommutingFamiliesSatisfyResiduals) {
    testkit::RandomMatrices rnd(5150);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = 2 + trial % 7;
        const ComplexMatrix u = rnd.unitary(n);
        Eigen::VectorXd a(n), c(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            a[i] = static_cast<double>(i / 2); // pairs degenerate
            c[i] = static_cast<double>(i % 2) + 0.25 * static_cast<double>(i);
        }
        const std::vector<HermitianMatrix> ops{
            HermitianMatrix::hermitize(u * a.cast<Complex>().asDiagonal() * u.adjoint()),
            HermitianMatrix::hermitize(u * c.cast<Complex>().asDiagonal() * u.adjoint())};
        const auto b = simultaneous_diagonalize(ops);
        EXPECT_TRUE(b.maximal());
        const ComplexMatrix gram = b.vectors.adjoint() * b.vectors;
        EXPECT_LE(max_abs(gram - ComplexMatrix::Identity(n, n)), 1e-10);
        for (std::size_t m = 0; m < ops.size(); ++m)
            for (std::size_t k = 1; k <= b.size(); ++k)
                EXPECT_LE(residual(ops[m], b.vector(k), b.eigenvalue_tuples[k - 1][m]), 1e-8 * ops[m].norm());
        for (std::size_t k = 1; k < b.size(); ++k)
            EXPECT_TRUE(lex_leq(b.eigenvalue_tuples[k - 1], b.eigenvalue_tuples[k]));
    }
}
