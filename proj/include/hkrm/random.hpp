#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hkrm/linalg.hpp"

namespace hkrm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream for (seed, stream): depends on nothing else, so paths can run in any order.
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t attempt = 0) {
    std::uint64_t key = splitmix64(seed);
    key = splitmix64(key ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
    key = splitmix64(key ^ (attempt * 0xd1b54a32d192ed03ULL));
    return std::mt19937_64(key);
}

/// GUE with entry variance 1/N: E[(1/N) Tr H^2] = 1.
template <class Rng>
CMatrix sample_gue(int n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double diag_sd = 1.0 / std::sqrt(static_cast<double>(n));
    const double off_sd = 1.0 / std::sqrt(2.0 * n);
    CMatrix h(n, n);
    for (int j = 0; j < n; ++j) {
        h(j, j) = diag_sd * normal(rng);
        for (int i = j + 1; i < n; ++i) {
            const double re = off_sd * normal(rng);
            const double im = off_sd * normal(rng);
            h(i, j) = cplx(re, im);
            h(j, i) = cplx(re, -im);
        }
    }
    return h;
}

/// Haar unitary from QR of a complex Ginibre matrix with phase correction.
template <class Rng>
CMatrix sample_haar_unitary(int n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    CMatrix g(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) g(i, j) = cplx(normal(rng), normal(rng));
    }
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ();
    const CMatrix& r = qr.matrixQR();
    for (int j = 0; j < n; ++j) {
        const cplx d = r(j, j);
        const double a = std::abs(d);
        if (a > 0.0) q.col(j) *= d / a;
    }
    return q;
}

} // namespace hkrm
