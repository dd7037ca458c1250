#pragma once

// Finite-difference Laplacian on U_N against the intertwined image
//   Delta_{U_N} (P o V_N) = -2 [(D + N^-2 L) P] o V_N.

#include <cstdint>
#include <string>
#include <vector>

#include "hkrm/errors.hpp"
#include "hkrm/flow.hpp"
#include "hkrm/linalg.hpp"
#include "hkrm/random.hpp"
#include "hkrm/trace_poly.hpp"

namespace hkrm {

/// Hermitian generators H with X = iH running over an orthonormal basis of u_N
/// for <X, Y> = -N Tr(XY).
inline std::vector<CMatrix> unitary_lie_basis_hermitian(int n) {
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(n) * n);
    const double d = 1.0 / std::sqrt(static_cast<double>(n));
    const double o = 1.0 / std::sqrt(2.0 * n);
    for (int j = 0; j < n; ++j) {
        CMatrix h = CMatrix::Zero(n, n);
        h(j, j) = d;
        out.push_back(std::move(h));
    }
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            CMatrix re = CMatrix::Zero(n, n);
            re(j, k) = o;
            re(k, j) = o;
            out.push_back(std::move(re));
            CMatrix im = CMatrix::Zero(n, n);
            im(j, k) = cplx(0.0, o);
            im(k, j) = cplx(0.0, -o);
            out.push_back(std::move(im));
        }
    }
    return out;
}

/// sum_X d^2/de^2 P(V_N(U e^{eX})) at e = 0 by central differences of step h.
inline cplx laplacian_fd(const TracePoly& p, const CMatrix& u, double h) {
    if (!(h > 0.0)) throw InvalidConfig("finite-difference step must be positive");
    const int n = static_cast<int>(u.rows());
    const cplx center = eval_on_matrix(p, u);
    cplx total = 0.0;
    for (const auto& gen : unitary_lie_basis_hermitian(n)) {
        const cplx plus = eval_on_matrix(p, u * expi_hermitian(gen, h));
        const cplx minus = eval_on_matrix(p, u * expi_hermitian(gen, -h));
        total += (plus - 2.0 * center + minus) / (h * h);
    }
    return total;
}

/// -2 [(D + N^-2 L) P](V_N(U)).
inline cplx intertwined_laplacian(const TracePoly& p, const CMatrix& u) {
    const double n = static_cast<double>(u.rows());
    return -2.0 * eval_on_matrix(apply_D10(p) + apply_L10(p) * (1.0 / (n * n)), u);
}

struct IntertwineCase {
    std::string poly;
    cplx finite_difference;
    cplx intertwined;
    double relative_error;
    bool pass;
};

struct IntertwineReport {
    int N;
    std::uint64_t seed;
    double hstep;
    double tolerance;
    std::vector<IntertwineCase> cases;

    bool all_pass() const {
        for (const auto& c : cases) {
            if (!c.pass) return false;
        }
        return true;
    }
};

inline IntertwineReport check_intertwine(int N, std::uint64_t seed, double hstep, const std::vector<TracePoly>& polys,
                                         double tolerance = 1e-4) {
    if (N < 1) throw InvalidConfig("N must be >= 1");
    if (!(hstep > 0.0)) throw InvalidConfig("hstep must be positive");
    auto rng = derived_rng(seed, 0);
    const CMatrix u = sample_haar_unitary(N, rng);
    IntertwineReport report{N, seed, hstep, tolerance, {}};
    for (const auto& p : polys) {
        const cplx fd = laplacian_fd(p, u, hstep);
        const cplx exact = intertwined_laplacian(p, u);
        const double rel = std::abs(fd - exact) / std::max(std::abs(exact), 1e-300);
        report.cases.push_back({p.to_string(), fd, exact, rel, rel < tolerance});
    }
    return report;
}

} // namespace hkrm
