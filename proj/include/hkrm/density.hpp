#pragma once

// Densities of the limit laws nu_t.
//
// Circle (t > 0): kappa solves (z-1)/(z+1) e^{tz/2} = e^{i theta} with Re z > 0
// and the density against normalized Haar measure is Re kappa.
// Half-line (tau < 0): zeta solves z/(z-1) e^{-tau(z-1/2)} = x with Im z > 0
// and the Lebesgue density is Im zeta / (pi x).
//
// Roots are traced by Newton continuation from a seed table built once per
// parameter value; each evaluation marches from the nearest table node.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "hkrm/errors.hpp"
#include "hkrm/linalg.hpp"

namespace hkrm {

struct ArcSupport {
    double half_width = 0.0; // support is {e^{i theta} : |theta| <= half_width}
};

struct IntervalSupport {
    double r_minus = 1.0;
    double r_plus = 1.0;
};

inline ArcSupport unitary_support(double t) {
    if (!(t > 0.0)) throw InvalidParameter("unitary_support: t must be positive");
    if (t >= 4.0) return {std::numbers::pi};
    return {0.5 * std::sqrt(t * (4.0 - t)) + std::acos(1.0 - 0.5 * t)};
}

/// Endpoints are the critical values of z/(z-1) e^{-tau(z-1/2)}, so r_minus r_plus = 1.
inline IntervalSupport positive_support(double tau) {
    if (!(tau < 0.0)) throw InvalidParameter("positive_support: tau must be negative");
    const double root = std::sqrt(tau * (tau - 4.0));
    return {0.5 * (2.0 - tau - root) * std::exp(-0.5 * root), 0.5 * (2.0 - tau + root) * std::exp(0.5 * root)};
}

inline constexpr double kRootResidual = 1e-12;
inline constexpr double kEdgeSlack = 1e-6;

namespace detail {

/// Implicit equation F(z, p) = 0 with a branch restriction.
struct ImplicitEquation {
    std::function<cplx(cplx, double)> f;
    std::function<cplx(cplx, double)> fz;
    std::function<cplx(cplx, double)> fp;
    std::function<double(cplx, double)> residual; // in the normalization of the defining equation
    std::function<bool(cplx)> on_branch;
};

inline std::optional<cplx> newton(const ImplicitEquation& eq, cplx z, double p) {
    for (int it = 0; it < 60; ++it) {
        const cplx d = eq.fz(z, p);
        if (d == 0.0) return std::nullopt;
        const cplx step = eq.f(z, p) / d;
        z -= step;
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    if (!(eq.residual(z, p) <= kRootResidual) || !eq.on_branch(z)) return std::nullopt;
    return z;
}

/// Follow the root from (p0, z0) to p1 with step halving; nullopt when the step underflows.
inline std::optional<cplx> march(const ImplicitEquation& eq, double p0, cplx z0, double p1, double max_step) {
    double p = p0;
    cplx z = z0;
    double h = std::min(max_step, std::abs(p1 - p0));
    const double dir = p1 >= p0 ? 1.0 : -1.0;
    while (p != p1) {
        const double next = std::abs(p1 - p) <= h ? p1 : p + dir * h;
        const cplx predictor = z - eq.fp(z, p) / eq.fz(z, p) * (next - p);
        std::optional<cplx> r = newton(eq, predictor, next);
        if (r && std::abs(*r - z) <= 0.5 * std::max(1.0, std::abs(z))) {
            p = next;
            z = *r;
            h = std::min(max_step, 2.0 * h);
        } else {
            h *= 0.5;
            if (h < 1e-13) return std::nullopt;
        }
    }
    return z;
}

/// Roots at a grid of parameter values; nodes that could not be reached are absent.
struct SeedTable {
    std::vector<double> params;
    std::vector<std::optional<cplx>> roots;

    /// Index of the reached node nearest to p, if any.
    std::optional<std::size_t> nearest(double p) const {
        std::optional<std::size_t> best;
        double dist = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!roots[i]) continue;
            const double d = std::abs(params[i] - p);
            if (!best || d < dist) {
                best = i;
                dist = d;
            }
        }
        return best;
    }

    /// Index of the last reached node at or below p, if any.
    std::optional<std::size_t> at_or_below(double p) const {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < params.size() && params[i] <= p; ++i) {
            if (roots[i]) best = i;
        }
        return best;
    }
};

} // namespace detail

/// Circle density of nu_t with its continuation table.
class UnitaryDensity {
public:
    explicit UnitaryDensity(double t) : t_(t), support_(unitary_support(t)) {
        eq_.f = [t](cplx z, double th) { return (z - 1.0) * std::exp(0.5 * t * z) - std::polar(1.0, th) * (z + 1.0); };
        eq_.fz = [t](cplx z, double th) {
            return std::exp(0.5 * t * z) * (1.0 + 0.5 * t * (z - 1.0)) - std::polar(1.0, th);
        };
        eq_.fp = [](cplx z, double th) { return -cplx(0.0, 1.0) * std::polar(1.0, th) * (z + 1.0); };
        eq_.residual = [t](cplx z, double th) {
            return std::abs((z - 1.0) / (z + 1.0) * std::exp(0.5 * t * z) - std::polar(1.0, th));
        };
        eq_.on_branch = [](cplx z) { return z.real() > 0.0; };
        build_table();
    }

    double t() const { return t_; }
    const ArcSupport& support() const { return support_; }

    /// Root kappa_t(e^{i theta}); nullopt outside the support or at a stalled edge point.
    std::optional<cplx> root(double theta) const {
        if (!(theta >= -std::numbers::pi - 1e-15 && theta <= std::numbers::pi + 1e-15)) {
            throw InvalidParameter("unitary_density: theta must lie in [-pi, pi]");
        }
        const double a = std::abs(theta);
        if (a > support_.half_width) return std::nullopt;
        // March outward only: nodes close to an edge hold poorly conditioned roots.
        const auto node = table_.at_or_below(a);
        std::optional<cplx> z;
        if (node) z = detail::march(eq_, table_.params[*node], *table_.roots[*node], a, kStep);
        if (!z) {
            if (support_.half_width - a <= kEdgeSlack) return std::nullopt;
            throw NoConvergence("unitary_density: continuation failed at theta = " + std::to_string(theta));
        }
        return theta < 0.0 ? std::conj(*z) : *z;
    }

    double operator()(double theta) const {
        const auto z = root(theta);
        return z ? std::max(0.0, z->real()) : 0.0;
    }

private:
    static constexpr double kStep = std::numbers::pi / 512.0;

    void build_table() {
        // Real root of (z-1)/(z+1) e^{tz/2} = 1 on (1, 1 + 40/t].
        auto g = [this](double x) { return (x - 1.0) * std::exp(0.5 * t_ * x) - (x + 1.0); };
        std::uintmax_t iters = 200;
        auto [lo, hi] = boost::math::tools::toms748_solve(
            g, 1.0, 1.0 + 40.0 / t_, boost::math::tools::eps_tolerance<double>(52), iters);
        auto z0 = detail::newton(eq_, cplx(0.5 * (lo + hi), 0.0), 0.0);
        if (!z0) throw NoConvergence("unitary_density: no seed root at theta = 0");
        table_.params.push_back(0.0);
        table_.roots.push_back(z0);
        cplx z = *z0;
        for (int j = 1; j <= 512; ++j) {
            const double th = j * kStep;
            if (th > support_.half_width || (t_ <= 4.0 && th > support_.half_width - kEdgeSlack)) break;
            auto next = detail::march(eq_, th - kStep, z, th, kStep);
            if (!next) break;
            z = *next;
            table_.params.push_back(th);
            table_.roots.push_back(next);
        }
    }

    double t_;
    ArcSupport support_;
    detail::ImplicitEquation eq_;
    detail::SeedTable table_;
};

/// Half-line density of nu_tau (tau < 0) with its continuation table.
class PositiveDensity {
public:
    explicit PositiveDensity(double tau) : tau_(tau), support_(positive_support(tau)) {
        // Log form in s = log x keeps the exponential factor tame.
        eq_.f = [tau](cplx z, double s) { return std::log(z) - std::log(z - 1.0) - tau * (z - 0.5) - s; };
        eq_.fz = [tau](cplx z, double) { return 1.0 / z - 1.0 / (z - 1.0) - tau; };
        eq_.fp = [](cplx, double) { return cplx(-1.0); };
        eq_.residual = [tau](cplx z, double s) {
            const double x = std::exp(s);
            return std::abs(z / (z - 1.0) * std::exp(-tau * (z - 0.5)) - x) / std::max(1.0, x);
        };
        eq_.on_branch = [](cplx z) { return z.imag() > 0.0; };
        build_table();
    }

    double tau() const { return tau_; }
    const IntervalSupport& support() const { return support_; }

    std::optional<cplx> root(double x) const {
        if (!(x > 0.0)) throw InvalidParameter("positive_density: x must be positive");
        if (x <= support_.r_minus || x >= support_.r_plus) return std::nullopt;
        const double s = std::log(x);
        const auto node = table_.nearest(s);
        std::optional<cplx> z;
        if (node) z = detail::march(eq_, table_.params[*node], *table_.roots[*node], s, kMaxStep);
        if (!z) z = edge_seed(s);
        if (!z) {
            const double edge = std::min(s - std::log(support_.r_minus), std::log(support_.r_plus) - s);
            if (edge <= kEdgeSlack) return std::nullopt;
            throw NoConvergence("positive_density: continuation failed at x = " + std::to_string(x));
        }
        return z;
    }

    double operator()(double x) const {
        const auto z = root(x);
        return z ? std::max(0.0, z->imag() / (std::numbers::pi * x)) : 0.0;
    }

private:
    static constexpr int kNodes = 1024;
    static constexpr double kMaxStep = 0.05;

    // Edge points are the real critical points z(z-1) = -1/tau.
    cplx edge_point(bool left) const {
        const double d = std::sqrt(1.0 - 4.0 / tau_);
        return left ? 0.5 * (1.0 - d) : 0.5 * (1.0 + d);
    }

    // Quadratic model of log h near the nearer edge, then Newton.
    std::optional<cplx> edge_seed(double s) const {
        const double sl = std::log(support_.r_minus);
        const double sr = std::log(support_.r_plus);
        const bool left = s - sl <= sr - s;
        const cplx ze = edge_point(left);
        const cplx second = -1.0 / (ze * ze) + 1.0 / ((ze - 1.0) * (ze - 1.0));
        cplx dz = std::sqrt(2.0 * (s - (left ? sl : sr)) / second);
        if (dz.imag() < 0.0) dz = -dz;
        return detail::newton(eq_, ze + dz, s);
    }

    void build_table() {
        const double sl = std::log(support_.r_minus);
        const double sr = std::log(support_.r_plus);
        const double h = (sr - sl) / kNodes;
        std::optional<cplx> z;
        for (int j = 1; j < kNodes; ++j) {
            const double s = sl + j * h;
            if (z) z = detail::march(eq_, s - h, *z, s, kMaxStep);
            if (!z) z = edge_seed(s);
            table_.params.push_back(s);
            table_.roots.push_back(z);
        }
    }

    double tau_;
    IntervalSupport support_;
    detail::ImplicitEquation eq_;
    detail::SeedTable table_;
};

inline double unitary_density(double theta, double t) { return UnitaryDensity(t)(theta); }
inline double positive_density(double x, double tau) { return PositiveDensity(tau)(x); }

/// Adaptive Simpson quadrature with absolute tolerance tol.
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol = 1e-8) {
    auto simpson = [](double fa, double fm, double fb, double w) { return w / 6.0 * (fa + 4.0 * fm + fb); };
    auto rec = [&](auto&& self, double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
                   int depth) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid);
        const double rm = 0.5 * (mid + hi);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = simpson(flo, flm, fmid, mid - lo);
        const double right = simpson(fmid, frm, fhi, hi - mid);
        const double diff = left + right - whole;
        if (depth <= 0 || std::abs(diff) <= 15.0 * eps) return left + right + diff / 15.0;
        return self(self, lo, mid, flo, flm, fmid, left, 0.5 * eps, depth - 1) +
               self(self, mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth - 1);
    };
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(rec, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 48);
}

/// Integral of cos(n theta) rho_t(theta) dtheta / 2pi, i.e. the n-th moment (the law is symmetric).
inline double circle_moment(const UnitaryDensity& rho, int n, double tol = 1e-8) {
    const double w = rho.support().half_width;
    auto f = [&](double th) { return std::cos(n * th) * rho(th); };
    // Split at the midpoint as well as the edges so that panels see one edge each.
    return (integrate_adaptive(f, 0.0, 0.5 * w, tol) + integrate_adaptive(f, 0.5 * w, w, tol)) / std::numbers::pi;
}

/// Integral of x^n rho_tau(x) dx over the support; tol is relative to r_plus^n.
inline double line_moment(const PositiveDensity& rho, int n, double tol = 1e-8) {
    const auto [lo, hi] = rho.support();
    const double mid = 0.5 * (lo + hi);
    const double scaled = tol * std::max(1.0, std::pow(hi, n));
    auto f = [&](double x) { return std::pow(x, n) * rho(x); };
    return integrate_adaptive(f, lo, mid, scaled) + integrate_adaptive(f, mid, hi, scaled);
}

/// Density on a uniform grid: theta in [-pi, pi] (circle) or x across the support (line).
struct DensityGrid {
    std::vector<double> points;
    std::vector<double> values;
};

inline DensityGrid unitary_density_grid(double t, int grid) {
    if (grid < 2) throw InvalidParameter("density grid needs at least 2 points");
    UnitaryDensity rho(t);
    DensityGrid out;
    for (int i = 0; i < grid; ++i) {
        const double th = -std::numbers::pi + 2.0 * std::numbers::pi * i / (grid - 1);
        out.points.push_back(th);
        out.values.push_back(rho(th));
    }
    return out;
}

inline DensityGrid positive_density_grid(double tau, int grid) {
    if (grid < 2) throw InvalidParameter("density grid needs at least 2 points");
    PositiveDensity rho(tau);
    const auto [lo, hi] = rho.support();
    DensityGrid out;
    for (int i = 0; i < grid; ++i) {
        const double x = lo + (hi - lo) * i / (grid - 1);
        out.points.push_back(x);
        out.values.push_back(rho(x));
    }
    return out;
}

} // namespace hkrm
