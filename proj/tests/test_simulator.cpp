#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "test_support.hpp"

using namespace crowdctl;
using namespace testsupport;

namespace {

const FlowConfig kCfg{1e-3, 50.0};

bool bitwise_equal(const Point& a, const Point& b) { return a.dim == b.dim && std::memcmp(a.c.data(), b.c.data(), sizeof(double) * a.dim) == 0; }

ControlWindow window(Point a, Point b, double t0, double t1, double r, double R, double gain) {
    ControlWindow w;
    w.t_start = t0;
    w.t_end = t1;
    w.knot_times = {t0, t1};
    w.centers = {a, b};
    w.radius_times = {t0};
    w.inner = {r};
    w.outer = {R};
    w.gain = gain;
    return w;
}

}  // namespace

TEST(StepSchedule, IncludesBreakpointsAndEnds) {
    auto s = step_schedule(1.0, 0.25, {0.3, 0.5, 2.0}, {0.6});
    EXPECT_EQ(s, (std::vector<double>{0.0, 0.25, 0.3, 0.5, 0.6, 0.75, 1.0}));
    EXPECT_THROW(step_schedule(0.0, 0.1, {}), ValidationError);
}

TEST(Simulate, ZeroControlTranslates) {
    auto v = VectorField::constant(Point{1.0, 0.0});
    ControlField cf(v, ControlRegion(Box(Point{5.0, 0.0}, Point{7.0, 4.0})), {});
    std::mt19937_64 rng(1);
    ParticleCloud c = random_cloud(rng, 2, 200, 0, 4);
    SimulationResult r = simulate(c, cf, 5.0, kCfg);
    ASSERT_EQ(r.snapshots.size(), 4u);
    EXPECT_EQ(r.snapshot_times.back(), 5.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR(r.snapshots.back().point(i)[0], c.point(i)[0] + 5.0, 1e-9);
        EXPECT_EQ(r.snapshots.back().point(i)[1], c.point(i)[1]);
    }
}

// Without control, each atom follows integrate_flow on the same step grid.
TEST(Simulate, ZeroControlMatchesFlow) {
    auto v = VectorField::parse("-x2 + 0.1*x1, x1", 2);
    ControlField cf(v, ControlRegion::ball(Point{5.0, 5.0}, 0.1), {});
    std::mt19937_64 rng(2);
    ParticleCloud c = random_cloud(rng, 2, 50, -1, 1);
    const double T = 2.0;
    SimulationResult r = simulate(c, cf, T, kCfg, {.snapshot_times = {T}});
    for (std::size_t i = 0; i < c.size(); ++i)
        EXPECT_LE(dist(r.snapshots.back().point(i), integrate_flow(v, c.point(i), T, kCfg)), 10 * std::pow(kCfg.dt, 3) * T + 1e-12);
}

TEST(Simulate, MassIsConservedExactly) {
    Scenario s = bundled("example1.json");
    ParticleCloud c = s.mu0.cloud(500);
    auto v = s.field;
    ControlField cf(v, s.region, {window(Point{5.2}, Point{5.8}, 3.0, 4.0, 0.1, 0.2, 20.0)});
    SimulationResult r = simulate(c, cf, 8.0, kCfg);
    for (const auto& snap : r.snapshots) {
        EXPECT_EQ(snap.weights(), c.weights());
        EXPECT_EQ(snap.total_mass(), c.total_mass());
    }
}

// Atoms that never come near the tubes match the uncontrolled run bit for bit.
TEST(Simulate, LocalizationIsBitwise) {
    auto v = VectorField::constant(Point{1.0, 0.0});
    ControlRegion w(Box(Point{5.0, 0.0}, Point{7.0, 4.0}));
    ControlField on(v, w, {window(Point{5.5, 1.0}, Point{6.5, 1.5}, 4.0, 6.0, 0.2, 0.4, 10.0)});
    ControlField off(v, w, {});
    std::vector<Point> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(Point{-1.0 + 0.2 * i, 3.0});  // pass omega far from the tube
    for (int i = 0; i < 20; ++i) pts.push_back(Point{0.0 + 0.1 * i, 0.5});  // never reach omega
    ParticleCloud c = ParticleCloud::equal(2, pts, 1.0);
    SimulationOptions opt{.snapshot_times = {2.0, 6.0, 8.0}};
    auto a = simulate(c, on, 8.0, kCfg, opt), b = simulate(c, off, 8.0, kCfg, opt);
    for (std::size_t k = 0; k < a.snapshots.size(); ++k)
        for (std::size_t i = 0; i < c.size(); ++i) EXPECT_TRUE(bitwise_equal(a.snapshots[k].point(i), b.snapshots[k].point(i))) << i;
}

// A tube whose center is fixed and inside r pulls atoms onto the center.
TEST(Simulate, TubeCapturesNearbyAtoms) {
    auto v = VectorField::constant(Point{1.0, 0.0});
    ControlRegion w(Box(Point{5.0, 0.0}, Point{7.0, 4.0}));
    ControlField cf(v, w, {window(Point{6.0, 2.0}, Point{6.0, 2.0 + 1e-12}, 0.0, 3.0, 0.3, 0.6, 10.0)});
    ParticleCloud c(2, {Point{6.1, 2.1}, Point{5.9, 1.95}}, {0.5, 0.5});
    auto r = simulate(c, cf, 3.0, kCfg, {.snapshot_times = {3.0}});
    for (const auto& p : r.snapshots.back().points()) EXPECT_LT(dist(p, Point{6.0, 2.0}), 1e-6);
}

TEST(Simulate, ResultsIndependentOfThreadCount) {
    Scenario s = bundled("example2.json");
    ParticleCloud c = s.mu0.cloud(600);
    ControlField cf(s.field, s.region,
                    {window(Point{5.5, 1.0}, Point{6.5, 3.0}, 3.0, 5.0, 0.3, 0.6, 10.0),
                     window(Point{5.5, 3.0}, Point{6.5, 3.5}, 3.0, 5.0, 0.1, 0.3, 10.0)});
    SimulationOptions one{.density_domain = s.domain(), .density_resolution = resolution_for(s.domain(), 0.1), .threads = 1};
    SimulationOptions many = one;
    many.threads = 4;
    auto a = simulate(c, cf, 9.0, kCfg, one), b = simulate(c, cf, 9.0, kCfg, many);
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k)
        for (std::size_t i = 0; i < c.size(); ++i) EXPECT_TRUE(bitwise_equal(a.snapshots[k].point(i), b.snapshots[k].point(i)));
    EXPECT_EQ(a.probe_max_density, b.probe_max_density);
}

TEST(Simulate, HorizonAndSnapshotChecks) {
    auto v = VectorField::constant(Point{1.0});
    ControlField cf(v, ControlRegion(Box(Point{5.0}, Point{6.0})), {});
    ParticleCloud c(1, {Point{0.0}}, {1.0});
    EXPECT_THROW(simulate(c, cf, 60.0, kCfg), HorizonError);
    EXPECT_THROW(simulate(c, cf, 1.0, kCfg, {.snapshot_times = {2.0}}), ValidationError);
}

TEST(Diagnostics, SeriesAndIdentity) {
    auto v = VectorField::constant(Point{1.0});
    ControlField cf(v, ControlRegion(Box(Point{5.0}, Point{6.0})), {});
    ParticleCloud c = sample_density(BoxDensitySpec(1, {{Box(Point{0.0}, Point{2.0}), 0.5}}), 200);
    auto r = simulate(c, cf, 1.0, kCfg, {.snapshot_times = {0.0, 0.5, 1.0}});
    DiagnosticsOptions d{.domain = Box(Point{-1.0}, Point{4.0}), .h = 0.05};
    RunReport rep = track_diagnostics(r, c, d);
    ASSERT_EQ(rep.w1.size(), 3u);
    ASSERT_EQ(rep.max_density.size(), 3u);
    EXPECT_EQ(rep.w1[0], 0.0);
    EXPECT_NEAR(rep.w1[1], 0.5, 1e-9);
    EXPECT_EQ(rep.final_w1, rep.w1.back());
    EXPECT_NEAR(rep.peak_density, 0.5, 1e-9);
    EXPECT_EQ(rep.initial_mass, rep.final_mass);
}

// Example 1 without control: the pushforward is uniform on (8.1, 10.1), far from the target.
TEST(Diagnostics, Example1ZeroControlStaysFar) {
    Scenario s = bundled("example1.json");
    ParticleCloud c = s.mu0.cloud(2000), target = s.mu1.cloud(2000);
    ControlField cf(s.field, s.region, {});
    auto r = simulate(c, cf, 8.1, kCfg, {.snapshot_times = {8.1}});
    double w1 = diagnostic_w1(r.snapshots.back(), target, 500, 42);
    // Closed form: |F^-1 - G^-1| is 1.1 on half the mass and 0.9 on the other half.
    EXPECT_NEAR(w1, 1.0, 0.01);
    EXPECT_GE(w1, 0.5);
}
