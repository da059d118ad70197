#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "chaosae/dynamics.hpp"
#include "chaosae/lyapunov.hpp"

using namespace chaosae;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

IntegrationConfig short_run(std::size_t total, std::size_t transient) {
    IntegrationConfig c;
    c.total_steps = total;
    c.transient_steps = transient;
    return c;
}

} // namespace

TEST(Derivative, LorenzOriginIsFixedPoint) {
    EXPECT_EQ(derivative(SystemSpec::lorenz63(), vec({0, 0, 0})), vec({0, 0, 0}));
}

TEST(Derivative, RosslerAtOrigin) {
    const auto d = derivative(SystemSpec::rossler(), vec({0, 0, 0}));
    EXPECT_DOUBLE_EQ(d[0], 0.0);
    EXPECT_DOUBLE_EQ(d[1], 0.0);
    EXPECT_DOUBLE_EQ(d[2], 0.1);
}

TEST(Derivative, Lorenz96UniformForcingIsFixedPoint) {
    const auto d = derivative(SystemSpec::lorenz96(), Vector::Constant(40, 8.15));
    EXPECT_EQ(d.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Derivative, Lorenz96CyclicEquivariance) {
    const auto spec = SystemSpec::lorenz96();
    Vector x(40);
    for (Eigen::Index i = 0; i < 40; ++i) x[i] = std::sin(0.37 * static_cast<double>(i * i)) * 5.0 + 2.0;
    const Vector d = derivative(spec, x);
    for (Eigen::Index shift : {1, 7, 39}) {
        Vector rx(40);
        for (Eigen::Index i = 0; i < 40; ++i) rx[i] = x[(i + shift) % 40];
        const Vector rd = derivative(spec, rx);
        for (Eigen::Index i = 0; i < 40; ++i) EXPECT_DOUBLE_EQ(rd[i], d[(i + shift) % 40]);
    }
}

TEST(Derivative, DimensionMismatchIsRejected) {
    EXPECT_THROW(derivative(SystemSpec::lorenz63(), Vector::Zero(4)), InvalidInput);
}

TEST(SystemSpec, ValidationRejectsBadParameters) {
    EXPECT_THROW(SystemSpec::lorenz96({3, 8.0}), InvalidInput);
    EXPECT_THROW(SystemSpec::rossler({std::nan(""), 0.1, 14.0}), InvalidInput);
    EXPECT_THROW(system_kind_from_string("henon"), InvalidInput);
}

TEST(Rk4, FixedPointIsPreserved) {
    EXPECT_EQ(rk4_step(SystemSpec::lorenz63(), vec({0, 0, 0}), 0.005), vec({0, 0, 0}));
}

TEST(Rk4, OneLorenzStepMatchesIndependentOracles) {
    // Classical RK4 evaluated separately in numpy.
    const Vector rk4 = vec({1.0031933311430772, 1.129839801362649, 0.9920510551862709});
    // Adaptive Dormand-Prince 8(5,3) with rtol 1e-13 over the same step.
    const Vector flow = vec({1.0031932846382388, 1.1298398720150822, 0.9920510573603006});
    const Vector got = rk4_step(SystemSpec::lorenz63(), vec({1, 1, 1}), 0.005);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(got[i], rk4[i], 1e-14);
        EXPECT_NEAR(got[i], flow[i], 1e-7);
    }
}

TEST(Rk4, FourthOrderConvergence) {
    const auto spec = SystemSpec::lorenz63();
    auto run = [&](double dt) {
        Vector x = vec({1, 1, 1});
        const auto steps = static_cast<std::size_t>(std::llround(1.0 / dt));
        for (std::size_t i = 0; i < steps; ++i) x = rk4_step(spec, x, dt);
        return x;
    };
    const Vector ref = run(1e-5);
    const double ratio = (run(0.005) - ref).cwiseAbs().maxCoeff() / (run(0.0025) - ref).cwiseAbs().maxCoeff();
    EXPECT_GE(ratio, 12.0);
    EXPECT_LE(ratio, 20.0);
}

TEST(Rk4, BlowupNamesTheStep) {
    auto field = [](const Vector& x, Vector& out) { out = x.array().square(); };
    Vector x = vec({1e200, 0, 0});
    try {
        rk4_step(field, x, 1.0, 17);
        FAIL() << "expected a blowup";
    } catch (const NumericalBlowup& e) {
        EXPECT_EQ(e.step(), 17u);
        EXPECT_EQ(e.kind(), ErrorKind::numerical_blowup);
    }
}

TEST(Integrate, FullLengthHasExpectedRowCount) {
    const auto t = integrate(SystemSpec::lorenz63(), IntegrationConfig{});
    EXPECT_EQ(t.rows(), 250000u);
    EXPECT_EQ(t.first_step, 50000u);
}

TEST(Integrate, FixedPointStartGivesIdenticalRows) {
    auto cfg = short_run(100, 0);
    cfg.initial_state = {0, 0, 0};
    const auto t = integrate(SystemSpec::lorenz63(), cfg);
    ASSERT_EQ(t.rows(), 100u);
    for (std::size_t r = 0; r < 100; ++r) EXPECT_EQ(t.states.row(static_cast<Eigen::Index>(r)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Integrate, RosslerAttractorIsBounded) {
    const auto t = integrate(SystemSpec::rossler(), IntegrationConfig{});
    // Oracle run of the same configuration peaks at |x| 22.2, |y| 21.2, |z| 36.5.
    EXPECT_LT(t.states.cwiseAbs().maxCoeff(), 100.0);
    EXPECT_GT(t.states.col(0).cwiseAbs().maxCoeff(), 10.0);
}

TEST(Integrate, IsDeterministic) {
    const auto cfg = short_run(3000, 1000);
    const auto a = integrate(SystemSpec::lorenz96(), cfg);
    const auto b = integrate(SystemSpec::lorenz96(), cfg);
    EXPECT_TRUE(a.states == b.states);
}

TEST(Integrate, RowKIsStateAfterTransientPlusKSteps) {
    const auto spec = SystemSpec::lorenz63();
    const auto t = integrate(spec, short_run(20, 5));
    Vector x = vec({1, 1, 1});
    for (int i = 0; i < 5; ++i) x = rk4_step(spec, x, 0.005);
    EXPECT_TRUE(t.states.row(0).transpose() == x);
    x = rk4_step(spec, x, 0.005);
    EXPECT_TRUE(t.states.row(1).transpose() == x);
}

TEST(Integrate, ConfigValidation) {
    EXPECT_THROW(integrate(SystemSpec::lorenz63(), short_run(100, 100)), InvalidInput);
    auto cfg = short_run(100, 0);
    cfg.dt = 0.0;
    EXPECT_THROW(integrate(SystemSpec::lorenz63(), cfg), InvalidInput);
    cfg = short_run(100, 0);
    cfg.initial_state = {1, 2};
    EXPECT_THROW(integrate(SystemSpec::lorenz63(), cfg), InvalidInput);
}

TEST(Integrate, BlowupReportsStepIndex) {
    auto cfg = short_run(1000, 0);
    cfg.dt = 10.0;
    EXPECT_THROW(integrate(SystemSpec::lorenz63(), cfg), NumericalBlowup);
}

TEST(Twins, DisplacementIsExactOnChosenCoordinate) {
    const auto [a, b] = twin_trajectories(SystemSpec::lorenz63(), short_run(2000, 1000), 1e-7, 0);
    const Eigen::RowVectorXd diff = b.states.row(0) - a.states.row(0);
    EXPECT_EQ(diff[0], (a.states(0, 0) + 1e-7) - a.states(0, 0));
    EXPECT_NEAR(diff[0], 1e-7, 1e-15);
    EXPECT_EQ(diff[1], 0.0);
    EXPECT_EQ(diff[2], 0.0);
    EXPECT_EQ(a.rows(), 1000u);
    EXPECT_EQ(b.rows(), 1000u);
}

TEST(Twins, ZeroDisplacementGivesIdenticalTrajectories) {
    for (std::uint64_t replica : {0u, 3u}) {
        const auto [a, b] = twin_trajectories(SystemSpec::rossler(), short_run(3000, 1000), 0.0, 1, replica);
        EXPECT_TRUE(a.states == b.states);
    }
}

TEST(Twins, ReplicasStartFromDifferentAttractorPoints) {
    const auto cfg = short_run(2000, 1000);
    const auto p1 = attractor_point(SystemSpec::lorenz63(), cfg, 1);
    const auto p2 = attractor_point(SystemSpec::lorenz63(), cfg, 2);
    EXPECT_GT((p1 - p2).norm(), 1e-3);
    EXPECT_TRUE(attractor_point(SystemSpec::lorenz63(), cfg, 1) == p1);
}

TEST(Twins, RejectsBadArguments) {
    EXPECT_THROW(twin_trajectories(SystemSpec::lorenz63(), short_run(200, 100), 1e-7, 3), InvalidInput);
    EXPECT_THROW(twin_trajectories(SystemSpec::lorenz63(), short_run(200, 100), -1.0, 0), InvalidInput);
    EXPECT_THROW(twin_trajectories(SystemSpec::lorenz63(), short_run(200, 200), 1e-7, 0), InvalidInput);
}

TEST(Twins, LorenzLogDistanceRisesThenSaturates) {
    const auto [a, b] = twin_trajectories(SystemSpec::lorenz63(), short_run(50000 + 30000, 50000), 1e-7, 0, 1);
    const auto curve = divergence_curve(a.coordinate(0), b.coordinate(0), 0.005);
    EXPECT_NEAR(curve.log_distances[0], std::log(1e-7), 1e-6);
    // Mean ln|dx| between decorrelated attractor points is 1.80 in an oracle run.
    double late = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 10000; i < curve.size(); ++i)
        if (std::isfinite(curve.log_distances[i])) late += curve.log_distances[i], ++n;
    EXPECT_NEAR(late / static_cast<double>(n), 1.80, 0.35);
    const double early_slope = fit_lambda(curve, 0, 2000);
    EXPECT_GT(early_slope, 0.3);
    EXPECT_LT(early_slope, 2.0);
}

TEST(TrajectoryCsv, RoundTripIsLossless) {
    const auto t = integrate(SystemSpec::lorenz63(), short_run(60, 10));
    std::ostringstream os;
    write_trajectory_csv(os, t);
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,x0,x1,x2");
    const auto back = read_trajectory_csv(text, SystemSpec::lorenz63(), 0.005);
    EXPECT_TRUE(back.states == t.states);
    EXPECT_EQ(back.first_step, 10u);
}

TEST(TrajectoryCsv, TimeColumnIsStepIndexTimesDt) {
    const auto t = integrate(SystemSpec::rossler(), short_run(12, 10));
    std::ostringstream os;
    write_trajectory_csv(os, t);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    EXPECT_EQ(line.substr(0, line.find(',')), "0.05");
}
