#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hkrm/flow.hpp"
#include "hkrm/simulate.hpp"

using namespace hkrm;

namespace {

TracePoly v(int k) { return TracePoly::v(k); }

EnsembleConfig unitary_cfg(int n, double t, int steps, int paths, std::uint64_t seed = 1) {
    return {Group::Unitary, n, t, 0.0, steps, paths, seed};
}

EnsembleConfig gl_cfg(int n, double s, double t, int steps, int paths, std::uint64_t seed = 1) {
    return {Group::GeneralLinear, n, t, s, steps, paths, seed};
}

} // namespace

TEST(Gue, HermitianAndNormalized) {
    auto rng = derived_rng(5, 0);
    CMatrix h = sample_gue(6, rng);
    EXPECT_EQ((h - h.adjoint()).cwiseAbs().maxCoeff(), 0.0);
    CMatrix one = sample_gue(1, rng);
    EXPECT_EQ(one(0, 0).imag(), 0.0);

    // Mean of (1/N) Tr H^2 is 1.
    const int draws = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        CMatrix g = sample_gue(8, rng);
        const double x = normalized_trace(g * g).real();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
    EXPECT_NEAR(mean, 1.0, 5.0 * se);
}

TEST(UnitarySampler, ZeroTimeIsIdentity) {
    CMatrix u = sample_unitary_heat(unitary_cfg(5, 0.0, 10, 1), 3);
    EXPECT_EQ(u, CMatrix::Identity(5, 5));
}

TEST(UnitarySampler, StaysUnitary) {
    for (int p = 0; p < 5; ++p) {
        CMatrix u = sample_unitary_heat(unitary_cfg(6, 2.0, 200, 1), static_cast<std::uint64_t>(p));
        EXPECT_LE((u.adjoint() * u - CMatrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(UnitarySampler, CircleMeanIsHeatKernelDecay) {
    const double t = 0.8;
    MCSummary r = mc_experiment(unitary_cfg(1, t, 8, 10000, 17), {Observable::trace_poly("v1", v(1))});
    const auto& o = r.observables[0];
    EXPECT_NEAR(o.mean.real(), std::exp(-t / 2), 3.0 * o.std_error);
    EXPECT_NEAR(o.mean.imag(), 0.0, 3.0 * o.std_error);
}

TEST(UnitarySampler, MatchesFlowEngine) {
    const double t = 1.0;
    const int n = 8;
    MCSummary r = mc_experiment(unitary_cfg(n, t, 100, 400, 23),
                                {Observable::trace_poly("v1", v(1)), Observable::trace_poly("v2", v(2))});
    for (int k = 1; k <= 2; ++k) {
        const auto& o = r.observables[static_cast<std::size_t>(k - 1)];
        const cplx exact = finite_N_expectation(v(k), t, n);
        EXPECT_NEAR(o.mean.real(), exact.real(), 3.5 * o.std_error) << k;
    }
}

TEST(GlSampler, EigenvalueAndSingularValueMeans) {
    const double s = 1.0, t = 0.5;
    const int n = 8;
    MCSummary r = mc_experiment(gl_cfg(n, s, t, 50, 400, 29),
                                {Observable::trace_poly("trZ", v(1)),
                                 Observable::trace_poly("trZZ*", v(1), Observable::Target::PositiveMap)});
    const auto& z = r.observables[0];
    const auto& zz = r.observables[1];
    EXPECT_NEAR(z.mean.real(), finite_N_expectation(v(1), eigenvalue_flow_time(s, t), n).real(), 3.5 * z.std_error);
    EXPECT_NEAR(zz.mean.real(), finite_N_expectation(v(1), singular_value_flow_time(t), n).real(),
                3.5 * zz.std_error);
}

TEST(GlSampler, RegimeGuard) {
    EXPECT_THROW(sample_gl_heat(gl_cfg(4, 0.4, 1.0, 10, 1), 0), RegimeViolation);
    EXPECT_THROW(sample_gl_heat(unitary_cfg(4, 1.0, 10, 1), 0), InvalidConfig);
}

TEST(Spectrum, Examples) {
    const CMatrix id = CMatrix::Identity(4, 4);
    for (auto kind : {SpectralKind::CircleEig, SpectralKind::ComplexEig, SpectralKind::PositiveEig}) {
        for (const cplx& x : spectrum(id, kind)) EXPECT_NEAR(std::abs(x - 1.0), 0.0, 1e-14);
    }
    auto rng = derived_rng(2, 0);
    CMatrix u = sample_haar_unitary(5, rng);
    for (const cplx& x : spectrum(u, SpectralKind::PositiveEig)) EXPECT_NEAR(std::abs(x - 1.0), 0.0, 1e-12);
    for (const cplx& x : spectrum(u, SpectralKind::CircleEig)) EXPECT_NEAR(std::abs(x), 1.0, 1e-14);
}

TEST(Spectrum, MomentIdentity) {
    for (int p = 0; p < 5; ++p) {
        CMatrix z = sample_gl_heat(gl_cfg(6, 1.0, 0.5, 20, 1), static_cast<std::uint64_t>(p));
        SpectralSample s = extract_spectrum(z, SpectralKind::ComplexEig);
        for (int k = -4; k <= 4; ++k) {
            EXPECT_NEAR(std::abs(empirical_integral(s, TestFunction::chi(k)) - eval_on_matrix(v(k), z)), 0.0, 1e-8);
        }
    }
}

TEST(EmpiricalIntegral, Examples) {
    auto rng = derived_rng(4, 0);
    CMatrix u = sample_haar_unitary(6, rng);
    SpectralSample s = extract_spectrum(u, SpectralKind::CircleEig);
    EXPECT_NEAR(std::abs(empirical_integral(s, TestFunction::chi(0)) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(empirical_integral(s, TestFunction::chi(3)) - normalized_trace(matrix_power(u, 3))), 0.0,
                1e-12);
    SpectralSample zero{{0.0, 1.0}, SpectralKind::ComplexEig, {}, 0};
    EXPECT_THROW(empirical_integral(zero, TestFunction::chi(-1)), ZeroSpectrumValue);
    EXPECT_NEAR(std::abs(empirical_integral(zero, TestFunction::chi(2))), 0.5, 1e-15);
}

TEST(Norms, Examples) {
    const double p = 1.2, sigma = 0.3;
    for (int k : {-3, 1, 4}) {
        TestFunctionNorms n = test_function_norms(TestFunction::chi(k), p, sigma);
        EXPECT_NEAR(n.sobolev, std::pow(1.0 + k * k, p / 2), 1e-12);
        EXPECT_NEAR(n.gevrey, std::exp(sigma * k * k), 1e-12 * std::exp(sigma * k * k));
        EXPECT_DOUBLE_EQ(n.lipschitz, std::abs(k));
    }
    TestFunctionNorms z = test_function_norms(TestFunction(), p, sigma);
    EXPECT_EQ(z.sobolev, 0.0);
    EXPECT_EQ(z.gevrey, 0.0);
    EXPECT_EQ(z.lipschitz, 0.0);

    TestFunction f = TestFunction::chi(1) + TestFunction::chi(2);
    EXPECT_DOUBLE_EQ(test_function_norms(f, p, sigma).lipschitz, 3.0);
    double sup = 0.0;
    for (int i = 0; i < 4096; ++i) {
        const double th = 2.0 * std::numbers::pi * i / 4096;
        const cplx w = std::polar(1.0, th);
        sup = std::max(sup, std::abs(cplx(0.0, 1.0) * (w + 2.0 * w * w)));
    }
    EXPECT_LE(sup, 3.0 + 1e-12);

    TestFunctionNorms big = test_function_norms(TestFunction::chi(40), p, 1.0);
    EXPECT_TRUE(big.gevrey_overflow);
    EXPECT_TRUE(std::isinf(big.gevrey));
}

TEST(VarianceBound, Examples) {
    const TestFunction chi1 = TestFunction::chi(1);
    EXPECT_DOUBLE_EQ(variance_bound_rhs(chi1, 0.7, 5, LipschitzRegime{}), 2.0 * 0.7 / 25);
    EXPECT_NEAR(variance_bound_rhs(chi1, 0.7, 10, LipschitzRegime{}),
                variance_bound_rhs(chi1, 0.7, 5, LipschitzRegime{}) / 4, 1e-15);
    EXPECT_GT(variance_bound_rhs(chi1, 1.0, 8, SobolevRegime{1.4999999}),
              1000 * variance_bound_rhs(chi1, 1.0, 8, SobolevRegime{1.25}));
    EXPECT_THROW(variance_bound_rhs(chi1, 1.0, 8, SobolevRegime{1.5}), RegimeViolation);
    EXPECT_THROW(variance_bound_rhs(chi1, 1.0, 8, SobolevRegime{1.0}), RegimeViolation);

    // sigma = 3s gives delta = 1.
    const double s = 1.0;
    const double g = variance_bound_rhs(chi1, 0.5, 4, GevreyRegime{3.0, s});
    EXPECT_NEAR(g, (1.0 / 16) * 4.0 * (1.0 + 0.5 * std::sqrt(std::numbers::pi / 2.0)) * std::exp(6.0), 1e-12);
    EXPECT_THROW(variance_bound_rhs(chi1, 0.5, 4, GevreyRegime{0.9, s}), RegimeViolation);
    EXPECT_THROW(variance_bound_rhs(chi1, 0.5, 1, GevreyRegime{3.0, s}), RegimeViolation);
    EXPECT_THROW(variance_bound_rhs(chi1, 0.5, 8, GevreyPositiveRegime{3.0, s}), RegimeViolation);
    const double gp = variance_bound_rhs(chi1, 0.5, 4, GevreyPositiveRegime{12.0, s});
    EXPECT_NEAR(gp, (1.0 / 16) * 4.0 * (1.0 + 0.5 * std::sqrt(std::numbers::pi / 8.0)) * std::exp(24.0),
                1e-12 * gp);
}

TEST(McExperiment, ZeroPathsRejected) {
    EXPECT_THROW(mc_experiment(unitary_cfg(3, 1.0, 10, 0), {}), InvalidConfig);
}

TEST(McExperiment, DeterministicAcrossRunsAndThreads) {
    const auto cfg = gl_cfg(4, 1.0, 0.5, 10, 12, 99);
    const std::vector<Observable> obs{Observable::trace_poly("v1", v(1)),
                                      Observable::test_function("chi2", TestFunction::chi(2))};
    MCSummary a = mc_experiment(cfg, obs, 1);
    MCSummary b = mc_experiment(cfg, obs, 1);
    MCSummary c = mc_experiment(cfg, obs, 3);
    for (std::size_t k = 0; k < obs.size(); ++k) {
        EXPECT_EQ(a.observables[k].mean, b.observables[k].mean);
        EXPECT_EQ(a.observables[k].variance, b.observables[k].variance);
        EXPECT_EQ(a.observables[k].mean, c.observables[k].mean);
        EXPECT_EQ(a.observables[k].variance, c.observables[k].variance);
    }
    MCSummary d = mc_experiment(gl_cfg(4, 1.0, 0.5, 10, 12, 100), obs, 1);
    EXPECT_NE(a.observables[0].mean, d.observables[0].mean);
}

TEST(McExperiment, SummaryStatistics) {
    ObservableSummary s = summarize("x", {1.0, 3.0, cplx(2.0, 2.0), cplx(2.0, -2.0)});
    EXPECT_NEAR(std::abs(s.mean - 2.0), 0.0, 1e-15);
    // |x - 2|^2 = 1, 1, 4, 4 over n - 1 = 3.
    EXPECT_NEAR(s.variance, 10.0 / 3.0, 1e-14);
    EXPECT_NEAR(s.std_error, std::sqrt(10.0 / 12.0), 1e-14);
}

TEST(LpNorm, Examples) {
    const WordPoly a = WordPoly::word({Letter::A});
    for (int p : {2, 4, 6}) EXPECT_NEAR(lp_norm_trace(CMatrix::Identity(3, 3), a, p), 1.0, 1e-15);
    auto rng = derived_rng(8, 0);
    CMatrix u = sample_haar_unitary(5, rng);
    for (int p : {2, 4}) EXPECT_NEAR(lp_norm_trace(u, a, p), 1.0, 1e-13);
    EXPECT_THROW(lp_norm_trace(u, a, 3), InvalidParameter);

    // On a unitary, ||A + A*||_p^p is the trace polynomial unitary_reduce(lp_word(f, p)).
    const WordPoly f = a + WordPoly::word({Letter::AStar});
    for (int p : {2, 4}) {
        EXPECT_NEAR(std::pow(lp_norm_trace(u, f, p), p), eval_on_matrix(unitary_reduce(lp_word(f, p)), u).real(),
                    1e-12);
    }
}
