#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "chaosae/lyapunov.hpp"

using namespace chaosae;

namespace {

DivergenceCurve line_curve(double slope, std::size_t n, double dt = 0.005, double c0 = 1e-7) {
    DivergenceCurve c{std::vector<double>(n), dt, c0};
    for (std::size_t i = 0; i < n; ++i) c.log_distances[i] = std::log(c0) + slope * static_cast<double>(i) * dt;
    return c;
}

IntegrationConfig desk_lorenz() {
    IntegrationConfig c;
    c.total_steps = 100000;
    return c;
}

} // namespace

TEST(DivergenceCurve, ExponentialSeparationHasExactSlope) {
    const double dt = 0.005;
    std::vector<double> a(800), b(800, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 1e-7 * std::exp(2.0 * static_cast<double>(i) * dt);
    const auto c = divergence_curve(a, b, dt);
    EXPECT_DOUBLE_EQ(c.initial_separation, 1e-7);
    EXPECT_NEAR(fit_lambda(c, 0, 800), 2.0, 1e-9);
    EXPECT_NEAR(fit_lambda(c, 100, 250), 2.0, 1e-9);
}

TEST(DivergenceCurve, IdenticalSeriesAreUnusable) {
    const std::vector<double> a{1, 2, 3, 4};
    const auto c = divergence_curve(a, a, 0.01);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_FALSE(c.usable(i));
    EXPECT_THROW(fit_lambda(c, 0, 4), InvalidInput);
}

TEST(DivergenceCurve, LengthMismatchRejected) {
    EXPECT_THROW(divergence_curve(std::vector<double>{1, 2}, std::vector<double>{1}, 0.01), InvalidInput);
}

TEST(FitLambda, ConstantCurveIsZero) {
    DivergenceCurve c{std::vector<double>(50, -3.0), 0.01, 0.05};
    EXPECT_EQ(fit_lambda(c, 0, 50), 0.0);
}

TEST(FitLambda, NoisyLineWithinTolerance) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int t = 0; t < 50; ++t) {
        auto c = line_curve(1.17, 500);
        for (auto& v : c.log_distances) v += noise(rng);
        EXPECT_NEAR(fit_lambda(c, 0, 500), 1.17, 0.02);
    }
}

TEST(FitLambda, SkipsUnusablePointsAndRejectsDegenerateWindows) {
    auto c = line_curve(0.5, 20, 0.1);
    c.log_distances[3] = std::nan("");
    EXPECT_NEAR(fit_lambda(c, 0, 20), 0.5, 1e-12);
    EXPECT_THROW(fit_lambda(c, 5, 6), InvalidInput);
    EXPECT_THROW(fit_lambda(c, 7, 3), InvalidInput);
}

TEST(FitLambda, InvariantUnderSeparationScaling) {
    const double dt = 0.01;
    std::vector<double> a(300), b(300);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 0.1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::sin(0.1 * static_cast<double>(i));
        b[i] = a[i] + 1e-6 * std::exp(0.8 * static_cast<double>(i) * dt + nd(rng));
    }
    const double base = fit_lambda(divergence_curve(a, b, dt), 0, 300);
    std::vector<double> a2(a), b2(b);
    for (std::size_t i = 0; i < a.size(); ++i) a2[i] *= 1000.0, b2[i] *= 1000.0;
    EXPECT_NEAR(fit_lambda(divergence_curve(a2, b2, dt), 0, 300), base, 1e-6);
}

TEST(FitRegion, AutomaticEndsAtRiseFraction) {
    std::vector<double> curve(100);
    for (std::size_t i = 0; i < 100; ++i) curve[i] = std::min(static_cast<double>(i), 50.0);
    const auto r = choose_fit_region(curve, 50.0, FitPolicy{});
    EXPECT_EQ(r.start, 0u);
    EXPECT_EQ(r.end, 31u); // first point above 0.6 * 50
    FitPolicy skip;
    skip.skip_fraction = 0.2;
    EXPECT_EQ(choose_fit_region(curve, 50.0, skip).start, 10u);
    FitPolicy manual;
    manual.automatic = false;
    manual.fit_start = 5;
    manual.fit_end = 500;
    EXPECT_EQ(choose_fit_region(curve, 50.0, manual).end, 100u);
    manual.fit_end = 5;
    EXPECT_THROW(choose_fit_region(curve, 50.0, manual), InvalidInput);
}

TEST(Estimate, SampleStdAcrossCurves) {
    std::vector<DivergenceCurve> curves{line_curve(1.0, 400), line_curve(2.0, 400), line_curve(3.0, 400)};
    const auto est = estimate_from_curves(curves, 100.0, FitPolicy{});
    EXPECT_NEAR(est.mean_lambda, 2.0, 1e-9);
    EXPECT_NEAR(est.std_lambda, 1.0, 1e-9);
    EXPECT_EQ(est.num_curves, 3u);
    EXPECT_LT(est.fit_start, est.fit_end);
}

TEST(LLE, LorenzTwinPairsArePositive) {
    LLESettings s;
    s.repeats = 3;
    const auto est = lle_estimate(SystemSpec::lorenz63(), 0, desk_lorenz(), s);
    EXPECT_EQ(est.num_curves, 3u);
    EXPECT_GT(est.mean_lambda, 0.5);
    EXPECT_LT(est.mean_lambda, 1.4);
    EXPECT_EQ(est.slopes.size(), 3u);
}

TEST(LLE, RepeatsMustBePositive) {
    LLESettings s;
    s.repeats = 0;
    EXPECT_THROW(lle_estimate(SystemSpec::lorenz63(), 0, desk_lorenz(), s), InvalidInput);
}

TEST(LLE, IdentityModelReproducesInputEstimate) {
    auto m = make_model({{6, 6, Activation::linear}, {6, 6, Activation::linear}}, 0, 1);
    for (auto& l : m.layers) {
        l.weights.setIdentity();
        l.bias.setZero();
    }
    LLESettings s;
    s.repeats = 2;
    IntegrationConfig cfg;
    cfg.total_steps = 60000;
    const auto input = lle_estimate(SystemSpec::lorenz63(), 1, cfg, s);
    const auto recon = lle_of_reconstructed(m, SystemSpec::lorenz63(), 1, cfg, s, 6, NormParams{-30.0, 30.0});
    EXPECT_NEAR(recon.mean_lambda, input.mean_lambda, 1e-6);
}

TEST(Rosenstein, SineIsNotChaotic) {
    std::vector<double> s(6000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(5.1 * static_cast<double>(i) * 0.005);
    RosensteinConfig cfg;
    cfg.fit.automatic = false;
    cfg.horizon = 1250;
    cfg.fit.fit_start = 246;
    cfg.fit.fit_end = 1232; // four whole periods after the first
    cfg.max_reference_points = 500;
    const auto est = rosenstein_nn_estimate(s, 0.005, cfg);
    EXPECT_LT(std::fabs(est.mean_lambda), 0.05);
}

TEST(Rosenstein, SyntheticExponentialDivergence) {
    const double dt = 0.005;
    std::vector<double> s(3000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(2.0 * static_cast<double>(i) * dt);
    RosensteinConfig cfg;
    cfg.max_reference_points = 300;
    const auto est = rosenstein_nn_estimate(s, dt, cfg);
    EXPECT_NEAR(est.mean_lambda, 2.0, 0.02);
}

TEST(Rosenstein, AgreesWithTwinPairsOnLorenz) {
    const auto spec = SystemSpec::lorenz63();
    const auto cfg = desk_lorenz();
    LLESettings s;
    s.repeats = 5;
    const auto twin = lle_estimate(spec, 0, cfg, s);
    const auto traj = integrate(spec, cfg);
    const auto nn = rosenstein_nn_estimate(traj.coordinate(0), cfg.dt, RosensteinConfig{});
    EXPECT_GT(nn.mean_lambda, 0.0);
    EXPECT_LE(std::fabs(nn.mean_lambda - twin.mean_lambda), twin.std_lambda + nn.std_lambda)
        << "twin " << twin.mean_lambda << " (" << twin.std_lambda << "), nn " << nn.mean_lambda << " (" << nn.std_lambda << ")";
}

TEST(Rosenstein, TooShortSeriesRejected) {
    EXPECT_THROW(rosenstein_nn_estimate(std::vector<double>(100, 1.0), 0.01, RosensteinConfig{}), InvalidInput);
}

TEST(LLECsv, RowLayout) {
    LLEEstimate e;
    e.mean_lambda = 0.5;
    e.std_lambda = 0.25;
    e.fit_start = 0;
    e.fit_end = 10;
    e.num_curves = 5;
    std::ostringstream os;
    write_lle_csv(os, {{"lorenz63", "input", "", "x", e}, {"rossler", "reconstructed", "1e-05", "y", std::nullopt}});
    EXPECT_EQ(os.str(), "system,sequence,alpha_or_W,coordinate,lle_mean,lle_std,fit_start,fit_end,M\n"
                        "lorenz63,input,,x,0.5,0.25,0,10,5\n"
                        "rossler,reconstructed,1e-05,y,nan,nan,,,\n");
}
