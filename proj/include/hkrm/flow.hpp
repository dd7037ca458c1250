#pragma once

// Intertwining operators D_{1,0} and L_{1,0} on HP, their matrices on
// invariant subspaces, and the heat-kernel expectations they generate.
//
//   E[P(V_N)] = (exp(-u (D + N^-2 L)) P)(1)
//
// with u = t on U_N, u = s - t for GL_N eigenvalues and u = -2t for the
// eigenvalues of Z Z^*.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "hkrm/errors.hpp"
#include "hkrm/linalg.hpp"
#include "hkrm/trace_poly.hpp"

namespace hkrm {

inline constexpr int kDefaultDegreeCap = 12;

/// D_{1,0}|HP = 1/2 sum |k| v_k d_k + 1/2 sum_{k>=2} k [ (sum_j v_j v_{k-j}) d_k + (sum_j v_{-j} v_{-(k-j)}) d_{-k} ].
inline TracePoly apply_D10(const TracePoly& p) {
    TracePoly out;
    for (const auto& [m, c] : p.terms()) {
        if (m.is_one()) continue;
        out.add_term(m, 0.5 * m.degree() * c);
        for (auto [k, e] : m.factors()) {
            const int a = std::abs(k);
            if (a < 2) continue;
            const int sign = k > 0 ? 1 : -1;
            const Monomial rest = m.divided_by_var(k);
            const cplx weight = 0.5 * a * e * c;
            for (int j = 1; j < a; ++j) {
                out.add_term(rest.times_var(sign * j).times_var(sign * (a - j)), weight);
            }
        }
    }
    return out;
}

/// L_{1,0}|HP = 1/2 sum_{j,k} j k v_{j+k} d_j d_k, with v_0 = 1.
inline TracePoly apply_L10(const TracePoly& p) {
    TracePoly out;
    for (const auto& [m, c] : p.terms()) {
        const auto& f = m.factors();
        for (std::size_t a = 0; a < f.size(); ++a) {
            for (std::size_t b = 0; b < f.size(); ++b) {
                const auto [j, ej] = f[a];
                const auto [k, ek] = f[b];
                double mult = 0.0;
                Monomial rest;
                if (a == b) {
                    if (ej < 2) continue;
                    mult = static_cast<double>(ej) * (ej - 1);
                    rest = m.divided_by_var(j, 2);
                } else {
                    mult = static_cast<double>(ej) * ek;
                    rest = m.divided_by_var(j).divided_by_var(k);
                }
                out.add_term(rest.times_var(j + k), 0.5 * j * k * mult * c);
            }
        }
    }
    return out;
}

/// Parameters of u (D_{1,0} + inv_N_sq L_{1,0}) restricted to HP_n.
struct GeneratorSpec {
    double u = 0.0;
    double inv_N_sq = 0.0; // 0 encodes the N -> infinity limit
    int degree_cap = 1;
    int max_degree_cap = kDefaultDegreeCap;
};

/// Dense operator in a monomial basis; column j is the image of basis[j].
struct OperatorMatrix {
    std::vector<Monomial> basis;
    CMatrix entries;

    std::size_t index_of(const Monomial& m) const {
        for (std::size_t i = 0; i < basis.size(); ++i) {
            if (basis[i] == m) return i;
        }
        throw InvalidParameter("OperatorMatrix: monomial " + m.to_string() + " not in basis");
    }

    CVector coordinates(const TracePoly& p) const {
        CVector x = CVector::Zero(static_cast<Eigen::Index>(basis.size()));
        for (const auto& [m, c] : p.terms()) x(static_cast<Eigen::Index>(index_of(m))) += c;
        return x;
    }

    /// Polynomial with coordinates x; entries below prune_below in magnitude dropped.
    TracePoly polynomial(const CVector& x, double prune_below = 0.0) const {
        TracePoly out;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const cplx c = x(static_cast<Eigen::Index>(i));
            if (std::abs(c) > prune_below) out.add_term(basis[i], c);
        }
        return out;
    }
};

/// All monomials of trace degree <= n, ascending in monomial order.
inline std::vector<Monomial> enumerate_basis(int n) {
    // Each monomial is a multiset of nonzero indices with total |index| <= n.
    std::vector<Monomial> out;
    std::vector<int> indices;
    for (int k = -n; k <= n; ++k) {
        if (k != 0) indices.push_back(k);
    }
    std::vector<Monomial::Factor> current;
    auto rec = [&](auto&& self, std::size_t from, int budget) -> void {
        out.push_back(Monomial::from_factors(current));
        for (std::size_t i = from; i < indices.size(); ++i) {
            const int k = indices[i];
            const int cost = std::abs(k);
            for (int e = 1; e * cost <= budget; ++e) {
                current.emplace_back(k, e);
                self(self, i + 1, budget - e * cost);
                current.pop_back();
            }
        }
    };
    rec(rec, 0, n);
    std::sort(out.begin(), out.end());
    return out;
}

/// Smallest set of monomials containing those of p and closed under D and L.
inline std::vector<Monomial> invariant_basis(const TracePoly& p, bool include_L = true) {
    std::set<Monomial> seen;
    std::queue<Monomial> work;
    for (const auto& [m, c] : p.terms()) {
        if (seen.insert(m).second) work.push(m);
    }
    while (!work.empty()) {
        Monomial m = work.front();
        work.pop();
        TracePoly single = TracePoly::monomial(m);
        TracePoly image = apply_D10(single);
        if (include_L) image += apply_L10(single);
        for (const auto& [mm, cc] : image.terms()) {
            if (seen.insert(mm).second) work.push(mm);
        }
    }
    return {seen.begin(), seen.end()};
}

/// Matrix of u (D + inv_N_sq L) on the given basis, which must be invariant.
inline OperatorMatrix build_generator_on(const GeneratorSpec& spec, std::vector<Monomial> basis) {
    OperatorMatrix op{std::move(basis), {}};
    const auto dim = static_cast<Eigen::Index>(op.basis.size());
    op.entries = CMatrix::Zero(dim, dim);
    if (spec.u == 0.0) return op;
    std::map<Monomial, Eigen::Index> where;
    for (Eigen::Index i = 0; i < dim; ++i) where[op.basis[static_cast<std::size_t>(i)]] = i;
    for (Eigen::Index j = 0; j < dim; ++j) {
        TracePoly single = TracePoly::monomial(op.basis[static_cast<std::size_t>(j)]);
        TracePoly image = apply_D10(single);
        if (spec.inv_N_sq != 0.0) image += apply_L10(single) * spec.inv_N_sq;
        for (const auto& [m, c] : image.terms()) {
            auto it = where.find(m);
            if (it == where.end()) throw InvalidParameter("build_generator: basis is not invariant");
            op.entries(it->second, j) += spec.u * c;
        }
    }
    return op;
}

inline void check_generator_spec(const GeneratorSpec& spec) {
    if (spec.degree_cap > spec.max_degree_cap) {
        throw DegreeCapExceeded("degree " + std::to_string(spec.degree_cap) + " exceeds cap " +
                                std::to_string(spec.max_degree_cap));
    }
    if (spec.degree_cap < 0) throw InvalidParameter("degree cap must be nonnegative");
    if (!(spec.inv_N_sq >= 0.0 && spec.inv_N_sq <= 1.0)) {
        throw InvalidParameter("inv_N_sq must lie in [0, 1]");
    }
}

/// Matrix of u (D + inv_N_sq L) on the full monomial basis of HP_n.
inline OperatorMatrix build_generator(const GeneratorSpec& spec) {
    check_generator_spec(spec);
    return build_generator_on(spec, enumerate_basis(spec.degree_cap));
}

/// Matrix exponential by scaling and squaring with a Taylor series; the
/// argument is scaled until its max column sum is <= 0.5.
inline CMatrix expm(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    const double norm = column_sum_norm(a);
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const CMatrix scaled = a / std::ldexp(1.0, squarings);
    CMatrix result = CMatrix::Identity(n, n);
    CMatrix term = CMatrix::Identity(n, n);
    for (int k = 1; k < 64; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
        const double tn = column_sum_norm(term);
        if (tn <= 1e-18 * column_sum_norm(result)) break;
    }
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

inline OperatorMatrix expm(const OperatorMatrix& m) { return {m.basis, expm(m.entries)}; }

/// Flow result plus a conditioning flag for backward (u < 0) flows.
struct FlowResult {
    TracePoly poly;
    bool ill_conditioned = false;
};

inline bool backward_flow_ill_conditioned(double u, int degree) {
    return u < 0.0 && 0.5 * std::abs(u) * degree * degree > 20.0;
}

/// exp(-u (D + inv_N_sq L)) p, computed on the invariant subspace generated by p.
inline FlowResult heat_flow(const TracePoly& p, double u, double inv_N_sq, int degree_cap = kDefaultDegreeCap) {
    const int deg = p.degree();
    if (deg > degree_cap) {
        throw DegreeCapExceeded("trace degree " + std::to_string(deg) + " exceeds degree cap " +
                                std::to_string(degree_cap));
    }
    GeneratorSpec spec{u, inv_N_sq, deg, std::max(degree_cap, deg)};
    check_generator_spec(spec);
    if (p.is_zero()) return {p, false};
    OperatorMatrix gen = build_generator_on(spec, invariant_basis(p, inv_N_sq != 0.0));
    const CMatrix e = expm(CMatrix(-gen.entries));
    const CVector x = e * gen.coordinates(p);
    const double prune = 1e-15 * std::max(1.0, column_sum_norm(e));
    return {gen.polynomial(x, prune), backward_flow_ill_conditioned(u, deg)};
}

namespace detail {

/// exp(a) for a real dense row-major n x n matrix in scalar type T.
template <class T>
std::vector<T> expm_dense(std::vector<T> a, std::size_t n) {
    using std::abs;
    auto colsum = [n](const std::vector<T>& m) {
        T best = 0;
        for (std::size_t j = 0; j < n; ++j) {
            T s = 0;
            for (std::size_t i = 0; i < n; ++i) s += abs(m[i * n + j]);
            if (s > best) best = s;
        }
        return best;
    };
    auto mul = [n](const std::vector<T>& x, const std::vector<T>& y) {
        std::vector<T> z(n * n, T(0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const T& xik = x[i * n + k];
                if (xik == 0) continue;
                for (std::size_t j = 0; j < n; ++j) z[i * n + j] += xik * y[k * n + j];
            }
        }
        return z;
    };
    int squarings = 0;
    const double norm = static_cast<double>(colsum(a));
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const T scale = ldexp(T(1), -squarings);
    for (auto& x : a) x *= scale;
    std::vector<T> result(n * n, T(0)), term(n * n, T(0));
    for (std::size_t i = 0; i < n; ++i) result[i * n + i] = term[i * n + i] = 1;
    const T eps = std::numeric_limits<T>::epsilon();
    for (int k = 1; k < 400; ++k) {
        term = mul(term, a);
        for (auto& x : term) x /= k;
        for (std::size_t i = 0; i < n * n; ++i) result[i] += term[i];
        if (colsum(term) <= eps * colsum(result)) break;
    }
    for (int i = 0; i < squarings; ++i) result = mul(result, result);
    return result;
}

/// Value and cancellation magnitude of 1^T exp(a) x.
struct FlowSum {
    cplx value;
    double magnitude; // sum_ij |exp(a)_ij| |x_j|
};

template <class T>
FlowSum flow_sum(const CMatrix& a, const CVector& x) {
    const auto n = static_cast<std::size_t>(a.rows());
    std::vector<T> m(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m[i * n + j] = T(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).real());
        }
    }
    const std::vector<T> e = expm_dense(std::move(m), n);
    T re = 0, im = 0, mag = 0;
    for (std::size_t j = 0; j < n; ++j) {
        T col = 0, abscol = 0;
        for (std::size_t i = 0; i < n; ++i) {
            col += e[i * n + j];
            abscol += abs(e[i * n + j]);
        }
        const cplx xj = x(static_cast<Eigen::Index>(j));
        re += col * T(xj.real());
        im += col * T(xj.imag());
        mag += abscol * T(std::abs(xj));
    }
    return {cplx(static_cast<double>(re), static_cast<double>(im)), static_cast<double>(mag)};
}

} // namespace detail

/// Largest closure basis on which an expectation is redone in extended precision.
inline constexpr std::size_t kMaxExtendedPrecisionDim = 200;

/// (exp(-u (D + inv_N_sq L)) p)(1), accurate relative to the result itself.
///
/// Evaluating at 1 sums coordinates that can cancel massively, e.g. to
/// exp(-t k^2 / 2) on U_1 from O(1) pieces. When the double result has lost
/// more than three digits it is recomputed with 50 then 100 decimal digits.
inline cplx flow_expectation(const TracePoly& p, double u, double inv_N_sq, int degree_cap = kDefaultDegreeCap) {
    const int deg = p.degree();
    if (deg > degree_cap) {
        throw DegreeCapExceeded("trace degree " + std::to_string(deg) + " exceeds degree cap " +
                                std::to_string(degree_cap));
    }
    GeneratorSpec spec{u, inv_N_sq, deg, std::max(degree_cap, deg)};
    check_generator_spec(spec);
    if (p.is_zero()) return 0.0;
    OperatorMatrix gen = build_generator_on(spec, invariant_basis(p, inv_N_sq != 0.0));
    const CMatrix a = -gen.entries;
    const CVector x = gen.coordinates(p);
    auto accurate = [](const detail::FlowSum& r, double digits) {
        return r.magnitude <= std::pow(10.0, digits) * std::abs(r.value);
    };
    detail::FlowSum r = detail::flow_sum<double>(a, x);
    if (accurate(r, 3.0) || gen.basis.size() > kMaxExtendedPrecisionDim) return r.value;
    namespace mp = boost::multiprecision;
    r = detail::flow_sum<mp::cpp_bin_float_50>(a, x);
    if (accurate(r, 34.0)) return r.value;
    return detail::flow_sum<mp::cpp_bin_float_100>(a, x).value;
}

/// E over the N x N heat-kernel measure of P(V_N), i.e. (e^{-D^N_{u,0}} P)(1).
inline cplx finite_N_expectation(const TracePoly& p, double u, int N, int degree_cap = kDefaultDegreeCap) {
    if (N < 1) throw InvalidParameter("N must be >= 1");
    return flow_expectation(p, u, 1.0 / (static_cast<double>(N) * N), degree_cap);
}

/// N -> infinity limit (e^{-D_{u,0}} P)(1); first-order flow, so a homomorphism.
inline cplx limit_expectation(const TracePoly& p, double u, int degree_cap = kDefaultDegreeCap) {
    return flow_expectation(p, u, 0.0, degree_cap);
}

/// Cov(P(V_N), Q(V_N)) on U_N at time t: E[P Q*] - E[P] E[Q*].
inline cplx finite_N_covariance_unitary(const TracePoly& p, const TracePoly& q, double t, int N,
                                        int degree_cap = kDefaultDegreeCap) {
    const TracePoly qs = q.star();
    return finite_N_expectation(p * qs, t, N, degree_cap) -
           finite_N_expectation(p, t, N, degree_cap) * finite_N_expectation(qs, t, N, degree_cap);
}

/// Flow times realizing the GL_N reductions on HP.
inline double eigenvalue_flow_time(double s, double t) { return s - t; }
inline double singular_value_flow_time(double t) { return -2.0 * t; }

inline double flow_radius(double s, double t) { return std::abs(s - 0.5 * t) + 0.5 * std::abs(t); }

/// (1/N^2) (r/2) n^2 exp((r/2) n^2 (1 + 1/N^2)) ||P||_1 with r = |s - t/2| + |t|/2.
inline double concentration_bound(const TracePoly& p, double s, double t, int N) {
    if (N < 1) throw InvalidParameter("N must be >= 1");
    const double r = flow_radius(s, t);
    const double n = p.degree();
    const double inv = 1.0 / (static_cast<double>(N) * N);
    const double a = 0.5 * r * n * n;
    return inv * a * std::exp(a * (1.0 + inv)) * p.l1_norm();
}

/// (1/N^2)(1/delta) exp((r/2)(1+delta) n^2) ||P||_1, valid for N > sqrt(2/delta).
inline double refined_bound(const TracePoly& p, double s, double t, double delta, int N) {
    if (!(delta > 0.0)) throw PreconditionViolated("refined_bound: delta must be positive");
    if (!(N > std::sqrt(2.0 / delta))) throw PreconditionViolated("refined_bound: requires N > sqrt(2/delta)");
    const double r = flow_radius(s, t);
    const double n = p.degree();
    const double inv = 1.0 / (static_cast<double>(N) * N);
    return inv / delta * std::exp(0.5 * r * (1.0 + delta) * n * n) * p.l1_norm();
}

} // namespace hkrm
