#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace crowdctl;
using namespace testsupport;

namespace {

const FlowConfig kCfg{1e-3, 50.0};

SimulationResult run_to(const ParticleCloud& x0, const ControlField& cf, double T) {
    return simulate(x0, cf, T, kCfg, {.snapshot_times = {T}});
}

const ScenarioRun& example1_run() {
    static ScenarioRun r = run_scenario(bundled("example1.json"), 8.1, false);
    return r;
}

}  // namespace

TEST(MicroSynthesis, Fig8LeftReachesTarget) {
    ControlRegion w(Box(Point{-1.0, -1.5}, Point{1.0, 1.5}));
    auto v = VectorField::constant(Point{1.0, 0.0});
    ParticleCloud x0(2, {Point{-2.0, 0.0}}, {1.0}), x1(2, {Point{2.0, 0.0}}, {1.0});
    MicroSynthesis m = synthesize_micro(x0, x1, 2.2, 0.1, v, w, kCfg);
    auto r = run_to(x0, m.control, 2.2);
    EXPECT_LT(dist(r.snapshots.back().point(0), Point{2.0, 0.0}), 1e-3);
    ASSERT_EQ(m.plans.size(), 1u);
    const auto& p = m.plans[0];
    EXPECT_GT(p.s0, p.t0);
    EXPECT_LT(p.s0, p.t0 + m.delta_used / 3 + 1e-12);
    EXPECT_TRUE(w.contains(p.y0));
    EXPECT_TRUE(w.contains(p.y1));
    EXPECT_LT(p.depart, p.arrive);
}

TEST(MicroSynthesis, RejectsTimeAtInfimum) {
    ControlRegion w(Box(Point{-1.0, -1.5}, Point{1.0, 1.5}));
    auto v = VectorField::constant(Point{1.0, 0.0});
    ParticleCloud x0(2, {Point{-2.0, 0.0}}, {1.0}), x1(2, {Point{2.0, 0.0}}, {1.0});
    MicroInfimum inf = micro_infimum(v, w, x0, x1, kCfg);
    EXPECT_THROW(synthesize_micro(x0, x1, inf.m_e, 0.1, v, w, kCfg), InfeasibleTimeError);
    EXPECT_THROW(synthesize_micro(x0, x1, 1.5, 0.1, v, w, kCfg), InfeasibleTimeError);
}

// Every agent lands on its assigned target, and distinct agents keep apart.
TEST(MicroSynthesis, ExactOnRandomInstances) {
    std::mt19937_64 rng(71);
    ControlRegion w(Box(Point{5.0, 0.0}, Point{7.0, 4.0}));
    auto v = VectorField::constant(Point{1.0, 0.0});
    std::uniform_real_distribution<double> ux0(0.0, 4.0), ux1(8.0, 12.0), uy(0.5, 3.5);
    for (int rep = 0; rep < 8; ++rep) {
        std::size_t n = 2 + rep % 4;
        std::vector<Point> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            a.push_back(Point{ux0(rng), uy(rng)});
            b.push_back(Point{ux1(rng), uy(rng)});
        }
        auto x0 = ParticleCloud::equal(2, a, 1.0), x1 = ParticleCloud::equal(2, b, 1.0);
        double T = micro_infimum(v, w, x0, x1, kCfg).m_e + 0.5;
        MicroSynthesis m = synthesize_micro(x0, x1, T, 0.1, v, w, kCfg);
        auto r = run_to(x0, m.control, T);
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_LT(dist(r.snapshots.back().point(i), x1.point(m.assignment.sigma[i])), 1e-3) << "instance " << rep << " agent " << i;
        EXPECT_GT(m.separation, 0.0);
    }
}

TEST(MicroSynthesis, RequiresConvexRegion) {
    auto ell = ControlRegion::polygon({Point{0.0, 0.0}, Point{6.0, 0.0}, Point{6.0, 1.0}, Point{3.0, 1.0}, Point{3.0, 2.0}, Point{0.0, 2.0}});
    ParticleCloud x0(2, {Point{-2.0, 0.5}}, {1.0}), x1(2, {Point{8.0, 0.5}}, {1.0});
    EXPECT_THROW(synthesize_micro(x0, x1, 20.0, 0.1, VectorField::constant(Point{1.0, 0.0}), ell, kCfg), ValidationError);
}

TEST(MacroSynthesis, Example1Steers) {
    const ScenarioRun& r = example1_run();
    ASSERT_TRUE(r.macro.has_value());
    EXPECT_LE(r.report.final_w1, 0.1);
    EXPECT_TRUE(r.macro->disjointness_verified);
    EXPECT_GT(r.macro->capture_fraction, 0.9);
    EXPECT_EQ(r.macro->plans.size() + r.macro->dropped, r.macro->source_cells);
    EXPECT_NEAR(r.infimum, 8.0, 0.05);
}

// Plans respect the entry-time windows and the feasibility cutoff.
TEST(MacroSynthesis, PlansAreFeasible) {
    const ScenarioRun& r = example1_run();
    Scenario s = bundled("example1.json");
    for (const auto& p : r.macro->plans) {
        EXPECT_LT(p.depart, p.arrive);
        EXPECT_GE(p.s0, p.t0);
        EXPECT_GE(p.s1, p.t1);
        EXPECT_TRUE(s.region.contains(p.y0));
        EXPECT_TRUE(s.region.contains(p.y1));
    }
    EXPECT_GT(r.macro->gain, 0.0);
    EXPECT_LE(r.macro->gain, 0.5 / kCfg.dt);
}

// Cells shrink onto their tube centers: final atoms sit near target representatives.
TEST(MacroSynthesis, Example1MassConcentratesNearTargets) {
    const ScenarioRun& r = example1_run();
    std::vector<double> reps;
    for (const auto& c : r.mesh1->cells) reps.push_back(c.representative[0]);
    std::sort(reps.begin(), reps.end());
    const ParticleCloud& fin = r.sim.snapshots.back();
    double near = 0.0;
    for (std::size_t i = 0; i < fin.size(); ++i) {
        double x = fin.point(i)[0];
        auto it = std::lower_bound(reps.begin(), reps.end(), x);
        double d = kInf;
        if (it != reps.end()) d = std::min(d, *it - x);
        if (it != reps.begin()) d = std::min(d, x - *std::prev(it));
        if (d < 1e-3) near += fin.weight(i);
    }
    EXPECT_GT(near, 0.8);
}

TEST(MacroSynthesis, RefinementImprovesExample1) {
    Scenario s = bundled("example1.json");
    s.numerics.mesh_n = 2;
    ScenarioRun coarse = run_scenario(s, 8.1, false);
    EXPECT_LE(example1_run().report.final_w1, coarse.report.final_w1);
}

TEST(MacroSynthesis, Example2CellCounts) {
    Scenario s = bundled("example2.json");
    Mesh m0 = scenario_mesh(s.mu0, 3), m1 = scenario_mesh(s.mu1, 3);
    EXPECT_GE(m0.cells.size(), 54u);
    EXPECT_LE(m0.cells.size(), 81u);
    EXPECT_GE(m1.cells.size(), 54u);
    EXPECT_LE(m1.cells.size(), 81u);
}

TEST(MacroSynthesis, LargeToleranceDropsEverything) {
    Scenario s = bundled("example1.json");
    Mesh m0 = scenario_mesh(s.mu0, 2), m1 = scenario_mesh(s.mu1, 2);
    MacroOptions opt;
    opt.epsilon = 1e3;
    EXPECT_THROW(synthesize_macro(m0, m1, 8.1, s.field, s.region, kCfg, opt), SynthesisError);
}

TEST(MacroSynthesis, RejectsTimeBelowInfimum) {
    Scenario s = bundled("example1.json");
    Mesh m0 = scenario_mesh(s.mu0, 2), m1 = scenario_mesh(s.mu1, 2);
    EXPECT_THROW(synthesize_macro(m0, m1, 7.0, s.field, s.region, kCfg), InfeasibleTimeError);
    EXPECT_THROW(run_scenario(s, 7.0, false), InfeasibleTimeError);
}
