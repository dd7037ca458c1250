#pragma once

// Monte Carlo sampling of the heat-kernel measures on U_N and GL_N, spectral
// extraction, empirical test-function integrals and variance-bound checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "hkrm/errors.hpp"
#include "hkrm/linalg.hpp"
#include "hkrm/random.hpp"
#include "hkrm/trace_poly.hpp"

namespace hkrm {

enum class Group { Unitary, GeneralLinear };

inline const char* group_name(Group g) { return g == Group::Unitary ? "unitary" : "gl"; }

struct EnsembleConfig {
    Group group = Group::Unitary;
    int N = 1;
    double t = 0.0;
    double s = 0.0; // GL only
    int steps = 100;
    int paths = 1000;
    std::uint64_t seed = 0;
};

/// Default step count: 100 per unit of heat time (s carries the time scale on GL).
inline int default_steps(Group g, double s, double t) {
    const double time = g == Group::Unitary ? t : s;
    return std::max(1, static_cast<int>(std::ceil(100.0 * time)));
}

inline void validate(const EnsembleConfig& cfg) {
    if (cfg.N < 1) throw InvalidConfig("N must be >= 1");
    if (cfg.steps < 1) throw InvalidConfig("steps must be >= 1");
    if (cfg.paths < 1) throw InvalidConfig("paths must be >= 1");
    if (cfg.group == Group::Unitary) {
        if (!(cfg.t >= 0.0)) throw RegimeViolation("unitary ensemble requires t >= 0");
    } else if (!(cfg.s > 0.0 && cfg.t > 0.0 && cfg.s > 0.5 * cfg.t)) {
        throw RegimeViolation("GL ensemble requires s, t > 0 and s > t/2");
    }
}

inline constexpr int kReunitarizeEvery = 16;
inline constexpr double kConditionCap = 1e12;
inline constexpr int kMaxResamples = 3;

/// U = prod exp(i sqrt(delta) H_j), delta = t / steps, H_j GUE.
inline CMatrix sample_unitary_heat(const EnsembleConfig& cfg, std::uint64_t path_index) {
    if (cfg.group != Group::Unitary) throw InvalidConfig("sample_unitary_heat: group must be unitary");
    validate(cfg);
    const int n = cfg.N;
    CMatrix u = CMatrix::Identity(n, n);
    if (cfg.t == 0.0) return u;
    auto rng = derived_rng(cfg.seed, path_index);
    const cplx step(0.0, std::sqrt(cfg.t / cfg.steps));
    for (int j = 1; j <= cfg.steps; ++j) {
        // Pade exponential: several times faster than the Hermitian eigensolver at N >= 16.
        const CMatrix x = step * sample_gue(n, rng);
        u = u * CMatrix(x.exp());
        if (j % kReunitarizeEvery == 0) u = polar_unitary(u);
    }
    return polar_unitary(u);
}

/// Z = prod exp(sqrt(delta (s - t/2)) i H_j + sqrt(delta t / 2) H'_j), delta = 1 / steps.
/// Paths whose condition estimate exceeds the cap are redrawn from a derived sub-seed.
inline CMatrix sample_gl_heat(const EnsembleConfig& cfg, std::uint64_t path_index) {
    if (cfg.group != Group::GeneralLinear) throw InvalidConfig("sample_gl_heat: group must be gl");
    validate(cfg);
    const int n = cfg.N;
    const double delta = 1.0 / cfg.steps;
    const double a = std::sqrt(delta * (cfg.s - 0.5 * cfg.t));
    const double b = std::sqrt(delta * 0.5 * cfg.t);
    const cplx i(0.0, 1.0);
    for (int attempt = 0; attempt <= kMaxResamples; ++attempt) {
        auto rng = derived_rng(cfg.seed, path_index, static_cast<std::uint64_t>(attempt));
        CMatrix z = CMatrix::Identity(n, n);
        bool ok = true;
        for (int j = 1; j <= cfg.steps && ok; ++j) {
            CMatrix x = (a * i) * sample_gue(n, rng);
            x += b * sample_gue(n, rng);
            z = z * CMatrix(x.exp());
            if (j % kReunitarizeEvery == 0 || j == cfg.steps) ok = condition_estimate(z) <= kConditionCap;
        }
        if (ok) return z;
    }
    throw IllConditioned("sample_gl_heat: condition estimate above cap after resampling, path " +
                         std::to_string(path_index));
}

inline CMatrix sample_heat(const EnsembleConfig& cfg, std::uint64_t path_index) {
    return cfg.group == Group::Unitary ? sample_unitary_heat(cfg, path_index) : sample_gl_heat(cfg, path_index);
}

enum class SpectralKind { CircleEig, ComplexEig, PositiveEig };

struct SpectralSample {
    std::vector<cplx> values;
    SpectralKind kind = SpectralKind::ComplexEig;
    EnsembleConfig config;
    std::uint64_t path_index = 0;
};

/// Eigenvalues of Z (CircleEig, ComplexEig) or of Z Z^* (PositiveEig).
inline std::vector<cplx> spectrum(const CMatrix& z, SpectralKind kind) {
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(z.rows()));
    if (kind == SpectralKind::PositiveEig) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(z * z.adjoint(), Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw EigFailure("Hermitian eigensolver did not converge");
        for (Eigen::Index i = 0; i < z.rows(); ++i) out.emplace_back(es.eigenvalues()(i), 0.0);
        return out;
    }
    Eigen::ComplexEigenSolver<CMatrix> es(z, false);
    if (es.info() != Eigen::Success) throw EigFailure("complex eigensolver did not converge");
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        cplx v = es.eigenvalues()(i);
        if (kind == SpectralKind::CircleEig) v /= std::abs(v);
        out.push_back(v);
    }
    return out;
}

inline SpectralSample extract_spectrum(const CMatrix& z, SpectralKind kind, const EnsembleConfig& cfg = {},
                                       std::uint64_t path_index = 0) {
    return {spectrum(z, kind), kind, cfg, path_index};
}

/// z^k for integer k by repeated squaring.
inline cplx integer_power(cplx z, int k) {
    if (k < 0) return 1.0 / integer_power(z, -k);
    cplx result = 1.0;
    while (k > 0) {
        if (k & 1) result *= z;
        k >>= 1;
        if (k > 0) z *= z;
    }
    return result;
}

/// Finite Fourier-Laurent series f(z) = sum_k c_k z^k.
class TestFunction {
public:
    TestFunction() = default;
    explicit TestFunction(std::map<int, cplx> coeffs) : coeffs_(std::move(coeffs)) {
        std::erase_if(coeffs_, [](const auto& kv) { return kv.second == 0.0; });
    }

    static TestFunction chi(int k, cplx c = 1.0) { return TestFunction({{k, c}}); }

    const std::map<int, cplx>& coeffs() const { return coeffs_; }
    bool has_negative_powers() const { return !coeffs_.empty() && coeffs_.begin()->first < 0; }

    cplx operator()(cplx z) const {
        cplx total = 0.0;
        for (const auto& [k, c] : coeffs_) total += c * integer_power(z, k);
        return total;
    }

    friend TestFunction operator+(const TestFunction& a, const TestFunction& b) {
        std::map<int, cplx> out = a.coeffs_;
        for (const auto& [k, c] : b.coeffs_) out[k] += c;
        return TestFunction(std::move(out));
    }

private:
    std::map<int, cplx> coeffs_;
};

/// (1/N) sum_i f(lambda_i).
inline cplx empirical_integral(const SpectralSample& sample, const TestFunction& f) {
    if (sample.values.empty()) return 0.0;
    cplx total = 0.0;
    for (const cplx& v : sample.values) {
        if (v == 0.0 && f.has_negative_powers()) throw ZeroSpectrumValue("negative power of a zero spectral value");
        total += f(v);
    }
    return total / static_cast<double>(sample.values.size());
}

struct TestFunctionNorms {
    double sobolev = 0.0;  // H_p
    double gevrey = 0.0;   // G_sigma, inf when a weight overflows
    double lipschitz = 0.0; // sum |k| |c_k|, an upper bound on sup |f'|
    bool gevrey_overflow = false;
};

inline TestFunctionNorms test_function_norms(const TestFunction& f, double p, double sigma) {
    TestFunctionNorms out;
    double h2 = 0.0;
    double g2 = 0.0;
    for (const auto& [k, c] : f.coeffs()) {
        const double a2 = std::norm(c);
        const double kk = static_cast<double>(k) * k;
        h2 += std::pow(1.0 + kk, p) * a2;
        const double w = std::exp(2.0 * sigma * kk);
        if (!std::isfinite(w)) {
            out.gevrey_overflow = true;
            g2 = std::numeric_limits<double>::infinity();
        } else {
            g2 += w * a2;
        }
        out.lipschitz += std::abs(k) * std::abs(c);
    }
    out.sobolev = std::sqrt(h2);
    out.gevrey = std::sqrt(g2);
    return out;
}

struct LipschitzRegime {};
struct SobolevRegime {
    double p;
};
struct GevreyRegime {
    double sigma;
    double s;
};
struct GevreyPositiveRegime {
    double sigma;
    double s;
};
using VarianceRegime = std::variant<LipschitzRegime, SobolevRegime, GevreyRegime, GevreyPositiveRegime>;

namespace detail {

inline double gevrey_rhs(const TestFunction& f, double sigma, double s, double t, int N, double spread) {
    // spread = 1 for GL eigenvalues, 4 for the positive map Z Z^*.
    if (!(s > 0.0 && s > 0.5 * t)) throw RegimeViolation("Gevrey bound requires s > 0 and s > t/2");
    if (!(sigma > spread * s)) throw RegimeViolation("Gevrey bound requires sigma above the threshold");
    const double delta = 0.5 * (sigma / (spread * s) - 1.0);
    if (!(N > std::sqrt(2.0 / delta))) throw RegimeViolation("Gevrey bound requires N > sqrt(2/delta)");
    const double norm = test_function_norms(f, 0.0, sigma).gevrey;
    const double n2 = static_cast<double>(N) * N;
    return (1.0 / n2) * (4.0 / (delta * delta)) *
           (1.0 + 0.5 * std::sqrt(std::numbers::pi / (2.0 * spread * s * delta))) * norm * norm;
}

} // namespace detail

/// Right-hand side of the variance bound for the selected regime.
inline double variance_bound_rhs(const TestFunction& f, double t, int N, const VarianceRegime& regime) {
    if (N < 1) throw InvalidParameter("N must be >= 1");
    const double n2 = static_cast<double>(N) * N;
    return std::visit(
        [&](const auto& r) -> double {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, LipschitzRegime>) {
                const double lip = test_function_norms(f, 0.0, 0.0).lipschitz;
                return 2.0 * t / n2 * lip * lip;
            } else if constexpr (std::is_same_v<R, SobolevRegime>) {
                if (!(r.p > 1.0 && r.p < 1.5)) throw RegimeViolation("Sobolev bound requires 1 < p < 3/2");
                const double h = test_function_norms(f, r.p, 0.0).sobolev;
                const double c = std::sqrt(t / (3.0 - 2.0 * r.p)) + 1.0 / std::sqrt(2.0 * r.p - 1.0);
                return 8.0 / std::pow(static_cast<double>(N), 2.0 * r.p - 1.0) * h * h * c * c;
            } else if constexpr (std::is_same_v<R, GevreyRegime>) {
                return detail::gevrey_rhs(f, r.sigma, r.s, t, N, 1.0);
            } else {
                return detail::gevrey_rhs(f, r.sigma, r.s, t, N, 4.0);
            }
        },
        regime);
}

/// What to measure on each sampled matrix.
struct Observable {
    enum class Target { Matrix, PositiveMap }; // Z or Z Z^*

    std::string name;
    std::variant<TracePoly, TestFunction, WordPoly> what;
    Target target = Target::Matrix;

    static Observable trace_poly(std::string name, TracePoly p, Target target = Target::Matrix) {
        return {std::move(name), std::move(p), target};
    }
    static Observable test_function(std::string name, TestFunction f, Target target = Target::Matrix) {
        return {std::move(name), std::move(f), target};
    }
    /// Normalized trace of a word polynomial in Z, Z^*, Z^-1, (Z^*)^-1.
    static Observable word_trace(std::string name, WordPoly w) {
        return {std::move(name), std::move(w), Target::Matrix};
    }
};

inline SpectralKind spectral_kind_for(Group g, Observable::Target target) {
    if (target == Observable::Target::PositiveMap) return SpectralKind::PositiveEig;
    return g == Group::Unitary ? SpectralKind::CircleEig : SpectralKind::ComplexEig;
}

/// Value of one observable on one sampled matrix.
inline cplx evaluate_observable(const Observable& obs, const CMatrix& z, const EnsembleConfig& cfg,
                                std::uint64_t path_index) {
    return std::visit(
        [&](const auto& w) -> cplx {
            using W = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<W, TracePoly>) {
                if (obs.target == Observable::Target::PositiveMap) return eval_on_matrix(w, CMatrix(z * z.adjoint()));
                return eval_on_matrix(w, z);
            } else if constexpr (std::is_same_v<W, TestFunction>) {
                return empirical_integral(extract_spectrum(z, spectral_kind_for(cfg.group, obs.target), cfg, path_index), w);
            } else {
                return normalized_trace(w.evaluate(z));
            }
        },
        obs.what);
}

/// Calls fn(path_index, Z) for every path; work is split into contiguous blocks across threads.
inline void for_each_path(const EnsembleConfig& cfg, int threads,
                          const std::function<void(std::uint64_t, const CMatrix&)>& fn) {
    validate(cfg);
    const auto total = static_cast<std::uint64_t>(cfg.paths);
    const auto workers = static_cast<std::uint64_t>(std::clamp(threads, 1, cfg.paths));
    auto run = [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t p = lo; p < hi; ++p) fn(p, sample_heat(cfg, p));
    };
    if (workers == 1) {
        run(0, total);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::uint64_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                run(total * w / workers, total * (w + 1) / workers);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct ObservableSummary {
    std::string name;
    cplx mean;
    double variance = 0.0; // E|X - EX|^2, unbiased
    double std_error = 0.0; // sqrt(variance / paths)
};

struct MCSummary {
    EnsembleConfig config;
    std::vector<ObservableSummary> observables;
    std::vector<std::vector<cplx>> values; // [observable][path]
};

/// Welford fold of per-path values in path order, so results do not depend on scheduling.
inline ObservableSummary summarize(std::string name, const std::vector<cplx>& xs) {
    ObservableSummary out{std::move(name), 0.0, 0.0, 0.0};
    cplx mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (const cplx& x : xs) {
        ++n;
        const cplx d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += std::real(std::conj(d) * (x - mean));
    }
    out.mean = mean;
    if (n > 1) out.variance = m2 / static_cast<double>(n - 1);
    if (n > 0) out.std_error = std::sqrt(out.variance / static_cast<double>(n));
    return out;
}

inline MCSummary mc_experiment(const EnsembleConfig& cfg, const std::vector<Observable>& observables, int threads = 1) {
    validate(cfg);
    MCSummary out;
    out.config = cfg;
    const auto paths = static_cast<std::size_t>(cfg.paths);
    out.values.assign(observables.size(), std::vector<cplx>(paths));
    for_each_path(cfg, threads, [&](std::uint64_t p, const CMatrix& z) {
        for (std::size_t k = 0; k < observables.size(); ++k) {
            out.values[k][static_cast<std::size_t>(p)] = evaluate_observable(observables[k], z, cfg, p);
        }
    });
    for (std::size_t k = 0; k < observables.size(); ++k) {
        out.observables.push_back(summarize(observables[k].name, out.values[k]));
    }
    return out;
}

/// ((1/N) Tr[(A A^*)^{p/2}])^{1/p} with A = f(Z, Z^*).
inline double lp_norm_trace(const CMatrix& z, const WordPoly& f, int p) {
    if (p < 2 || p % 2 != 0) throw InvalidParameter("lp_norm_trace: p must be an even integer >= 2");
    const CMatrix a = f.evaluate(z);
    const CMatrix g = a * a.adjoint();
    const double tr = normalized_trace(matrix_power(g, p / 2)).real();
    return std::pow(std::max(tr, 0.0), 1.0 / p);
}

} // namespace hkrm
