#pragma once

// Seeded random test inputs: Hermitian matrices, Haar-like unitaries (QR of
// a complex Gaussian matrix with the R-diagonal phases stripped) and states.

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "qsub/hilbert.hpp"

namespace qsub::testkit {

class RandomMatrices {
  public:
    explicit RandomMatrices(std::uint64_t seed) : gen_(seed) {}

    double real() { return normal_(gen_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    Complex complex() { return {real(), real()}; }

    ComplexMatrix gaussian(Eigen::Index n) {
        ComplexMatrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) = complex();
        return m;
    }

    ComplexVector vector(Eigen::Index n) {
        ComplexVector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = complex();
        return v;
    }

    ComplexMatrix hermitian(Eigen::Index n) {
        const ComplexMatrix g = gaussian(n);
        return 0.5 * (g + g.adjoint());
    }

    ComplexMatrix unitary(Eigen::Index n) {
        Eigen::HouseholderQR<ComplexMatrix> qr(gaussian(n));
        ComplexMatrix q = qr.householderQ();
        const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index k = 0; k < n; ++k) {
            const Complex d = r(k, k);
            q.col(k) *= std::abs(d) > 0 ? d / std::abs(d) : Complex(1.0);
        }
        return q;
    }

    ComplexVector state(Eigen::Index n) {
        ComplexVector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = complex();
        return v / v.norm();
    }

    std::mt19937_64 &engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace qsub::testkit
