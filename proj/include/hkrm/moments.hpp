#pragma once

// Moments nu_n(t) of the limit laws, their Sigma-transform in closed form, and
// an independent Sigma-from-moments route through truncated power series.

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <vector>

#include "hkrm/errors.hpp"
#include "hkrm/linalg.hpp"

namespace hkrm {

inline constexpr int kExactMomentMaxN = 30;

struct MomentValue {
    double value;
    bool precision_warning; // alternating sum evaluated outside the exact-binomial range
};

namespace detail {

inline std::uint64_t binomial_u64(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

inline double binomial_double(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

} // namespace detail

/// nu_n(t) = e^{-|n|t/2} sum_{k<|n|} (-t)^k/k! |n|^{k-1} C(|n|, k+1), valid for all real t.
inline MomentValue nu_moment_checked(int n, double t) {
    const int m = std::abs(n);
    if (m == 0) return {1.0, false};
    const bool exact = m <= kExactMomentMaxN && std::abs(t) <= 50.0;
    double sum = 0.0;
    double comp = 0.0;
    double a = 1.0 / m; // (-t)^k / k! * m^{k-1}
    for (int k = 0; k < m; ++k) {
        if (k > 0) a *= -t * m / k;
        const double binom = m <= kExactMomentMaxN ? static_cast<double>(detail::binomial_u64(m, k + 1))
                                                    : detail::binomial_double(m, k + 1);
        const double term = a * binom;
        if (exact) {
            sum += term;
        } else {
            const double y = term - comp;
            const double s = sum + y;
            comp = (s - sum) - y;
            sum = s;
        }
    }
    return {std::exp(-0.5 * m * t) * sum, !exact};
}

inline double nu_moment(int n, double t) { return nu_moment_checked(n, t).value; }

/// Moments {n -> nu_n(t)} for n = 0..max_n; negative indices by symmetry.
struct MomentTable {
    double t = 0.0;
    std::map<int, double> entries;

    double at(int n) const { return entries.at(std::abs(n)); }
};

inline MomentTable make_moment_table(double t, int max_n) {
    if (max_n < 0) throw InvalidParameter("make_moment_table: max_n must be >= 0");
    MomentTable table{t, {}};
    for (int n = 0; n <= max_n; ++n) table.entries[n] = nu_moment(n, t);
    return table;
}

/// Sigma_{nu_t}(z) = exp((t/2)(1+z)/(1-z)).
inline cplx sigma_closed(cplx z, double t) {
    if (z == cplx(1.0)) throw PoleAtOne("sigma_closed: z = 1 is a pole");
    return std::exp(0.5 * t * (1.0 + z) / (1.0 - z));
}

// ---------------------------------------------------------------------------
// Truncated power series c_0 + c_1 z + ... + c_K z^K.

class PowerSeries {
public:
    explicit PowerSeries(int order) : c_(static_cast<std::size_t>(order) + 1, cplx(0.0)) {}
    PowerSeries(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { // NOLINT
        if (c_.empty()) c_.push_back(0.0);
    }

    int order() const { return static_cast<int>(c_.size()) - 1; }
    const std::vector<cplx>& coeffs() const { return c_; }
    cplx operator[](int i) const { return i <= order() ? c_[static_cast<std::size_t>(i)] : cplx(0.0); }
    cplx& operator[](int i) { return c_.at(static_cast<std::size_t>(i)); }

    static PowerSeries identity(int order) {
        PowerSeries z(order);
        if (order >= 1) z[1] = 1.0;
        return z;
    }

    friend PowerSeries operator+(const PowerSeries& a, const PowerSeries& b) {
        PowerSeries out(std::max(a.order(), b.order()));
        for (int i = 0; i <= out.order(); ++i) out[i] = a[i] + b[i];
        return out;
    }
    friend PowerSeries operator-(const PowerSeries& a, const PowerSeries& b) {
        PowerSeries out(std::max(a.order(), b.order()));
        for (int i = 0; i <= out.order(); ++i) out[i] = a[i] - b[i];
        return out;
    }
    friend PowerSeries operator*(const PowerSeries& a, const PowerSeries& b) {
        const int k = std::min(a.order(), b.order());
        PowerSeries out(k);
        for (int i = 0; i <= k; ++i) {
            for (int j = 0; j <= k - i; ++j) out[i + j] += a[i] * b[j];
        }
        return out;
    }
    friend PowerSeries operator*(cplx s, PowerSeries a) {
        for (auto& c : a.c_) c *= s;
        return a;
    }

    /// 1/a, requires a_0 != 0.
    PowerSeries reciprocal() const {
        if (c_[0] == cplx(0.0)) throw NonInvertibleSeries("reciprocal: zero constant term");
        PowerSeries out(order());
        out[0] = 1.0 / c_[0];
        for (int n = 1; n <= order(); ++n) {
            cplx s = 0.0;
            for (int k = 1; k <= n; ++k) s += c_[static_cast<std::size_t>(k)] * out[n - k];
            out[n] = -s / c_[0];
        }
        return out;
    }

    PowerSeries derivative() const {
        PowerSeries out(order());
        for (int i = 1; i <= order(); ++i) out[i - 1] = static_cast<double>(i) * c_[static_cast<std::size_t>(i)];
        return out;
    }

    /// this(inner(z)), requires inner_0 == 0.
    PowerSeries compose(const PowerSeries& inner) const {
        const int k = std::min(order(), inner.order());
        PowerSeries out(k);
        for (int i = order(); i >= 0; --i) {
            out = out * PowerSeries(std::vector<cplx>(inner.c_.begin(), inner.c_.begin() + k + 1));
            out[0] += c_[static_cast<std::size_t>(i)];
        }
        return out;
    }

    /// Compositional inverse w with this(w(z)) = z, by Newton iteration on
    /// truncated series. Requires c_0 == 0 and |c_1| >= min_linear.
    PowerSeries reversion(double min_linear = 1e-10) const {
        if (std::abs(c_[0]) != 0.0) throw NonInvertibleSeries("reversion: nonzero constant term");
        if (order() < 1 || std::abs(c_[1]) < min_linear) {
            throw NonInvertibleSeries("reversion: linear coefficient too small to invert");
        }
        const int k = order();
        PowerSeries w = (1.0 / c_[1]) * identity(k);
        const PowerSeries deriv = derivative();
        const PowerSeries z = identity(k);
        for (int iter = 0; iter < 2 * k + 4; ++iter) {
            PowerSeries residual = compose(w) - z;
            PowerSeries step = residual * deriv.compose(w).reciprocal();
            w = w - step;
            w[0] = 0.0;
            double size = 0.0;
            for (int i = 0; i <= k; ++i) size = std::max(size, std::abs(step[i]));
            if (size == 0.0) break;
        }
        return w;
    }

private:
    std::vector<cplx> c_;
};

inline constexpr int kMaxSigmaOrder = 16;

/// Sigma_{nu_t} as a series of order K-1, built from psi = sum nu_n z^n,
/// eta = psi/(1+psi), and Sigma(z) = eta^{-1}(z)/z.
inline PowerSeries sigma_from_moments(double t, int order) {
    if (order < 1 || order > kMaxSigmaOrder) {
        throw InvalidParameter("sigma_from_moments: order must lie in [1, 16]");
    }
    PowerSeries psi(order);
    for (int n = 1; n <= order; ++n) psi[n] = nu_moment(n, t);
    PowerSeries one_plus = psi;
    one_plus[0] += 1.0;
    PowerSeries eta = psi * one_plus.reciprocal();
    PowerSeries inverse = eta.reversion(1e-10);
    PowerSeries sigma(order - 1);
    for (int i = 0; i < order; ++i) sigma[i] = inverse[i + 1];
    return sigma;
}

} // namespace hkrm
