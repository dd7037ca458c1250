#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>

#include "hkrm/errors.hpp"

namespace hkrm {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Normalized trace (1/N) Tr(A).
inline cplx normalized_trace(const CMatrix& a) {
    return a.trace() / static_cast<double>(a.rows());
}

/// A^k for k >= 0 by repeated squaring.
inline CMatrix matrix_power(const CMatrix& a, std::int64_t k) {
    CMatrix result = CMatrix::Identity(a.rows(), a.cols());
    CMatrix base = a;
    while (k > 0) {
        if (k & 1) result = result * base;
        k >>= 1;
        if (k > 0) base = base * base;
    }
    return result;
}

/// Estimated 1-norm condition number of a square matrix (inf when singular).
inline double condition_estimate(const CMatrix& a) {
    Eigen::PartialPivLU<CMatrix> lu(a);
    double rc = lu.rcond();
    if (!(rc > 0.0)) return std::numeric_limits<double>::infinity();
    return 1.0 / rc;
}

/// Max absolute column sum.
inline double column_sum_norm(const CMatrix& a) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        best = std::max(best, a.col(j).cwiseAbs().sum());
    }
    return best;
}

/// exp(i * H) for Hermitian H via eigendecomposition; exactly unitary up to roundoff.
inline CMatrix expi_hermitian(const CMatrix& h, double scale) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    if (es.info() != Eigen::Success) throw EigFailure("Hermitian eigensolver did not converge");
    CVector phases(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        phases(i) = std::polar(1.0, scale * es.eigenvalues()(i));
    }
    const CMatrix& v = es.eigenvectors();
    return v * phases.asDiagonal() * v.adjoint();
}

/// Closest unitary matrix (polar factor). Near-unitary input uses the
/// Newton-Schulz iteration X <- X (3I - X^*X) / 2; anything else goes through an SVD.
inline CMatrix polar_unitary(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    const CMatrix id = CMatrix::Identity(n, n);
    CMatrix x = a;
    CMatrix defect = x.adjoint() * x - id;
    if (defect.cwiseAbs().maxCoeff() < 0.1) {
        for (int it = 0; it < 8 && defect.cwiseAbs().maxCoeff() > 1e-15; ++it) {
            x = x * (id - 0.5 * defect);
            defect = x.adjoint() * x - id;
        }
        if (defect.cwiseAbs().maxCoeff() <= 1e-14) return x;
    }
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

} // namespace hkrm
