#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace crowdctl;
using namespace testsupport;

namespace {

BoxDensitySpec uniform_1d(double lo, double hi, double dens) { return BoxDensitySpec(1, {{Box(Point{lo}, Point{hi}), dens}}); }

std::vector<double> xs(const ParticleCloud& c) {
    std::vector<double> v;
    for (const auto& p : c.points()) v.push_back(p[0]);
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

TEST(Density, MassQueries) {
    BoxDensitySpec s(2, {{Box(Point{0.0, 1.0}, Point{4.0, 3.0}), 0.125}}, 1.0);
    EXPECT_DOUBLE_EQ(s.total_mass(), 1.0);
    EXPECT_DOUBLE_EQ(s.mass_in(Box(Point{0.0, 0.0}, Point{2.0, 5.0})), 0.5);
    Point c = s.centroid_in(Box(Point{1.0, 0.0}, Point{9.0, 9.0}));
    EXPECT_DOUBLE_EQ(c[0], 2.5);
    EXPECT_DOUBLE_EQ(c[1], 2.0);
    EXPECT_DOUBLE_EQ(s.density_at(Point{1.0, 2.0}), 0.125);
    EXPECT_DOUBLE_EQ(s.density_at(Point{5.0, 2.0}), 0.0);
}

TEST(Density, ValidationErrors) {
    EXPECT_THROW(BoxDensitySpec(1, {{Box(Point{0.0}, Point{2.0}), 0.5}}, 2.0), ValidationError);
    EXPECT_THROW(BoxDensitySpec(1, {{Box(Point{0.0}, Point{2.0}), 0.5}, {Box(Point{1.0}, Point{3.0}), 0.5}}), ValidationError);
    EXPECT_THROW(BoxDensitySpec(1, {{Box(Point{0.0}, Point{2.0}), -1.0}}), ValidationError);
    EXPECT_THROW(BoxDensitySpec(1, {}), ValidationError);
}

TEST(Sampling, StratifiedUniform) {
    auto c = sample_density(uniform_1d(0, 1, 1), 2);
    EXPECT_EQ(xs(c), (std::vector<double>{0.25, 0.75}));
    EXPECT_DOUBLE_EQ(c.weight(0), 0.5);
}

TEST(Sampling, StratifiedTwoComponentTarget) {
    BoxDensitySpec mu1(1, {{Box(Point{7.0}, Point{8.0}), 0.5}, {Box(Point{10.0}, Point{11.0}), 0.5}});
    auto v = xs(sample_density(mu1, 4));
    std::vector<double> want{7.25, 7.75, 10.25, 10.75};
    ASSERT_EQ(v.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(v[i], want[i], 1e-12);
}

TEST(Sampling, ZeroMassIsRejected) {
    EXPECT_THROW(sample_density(uniform_1d(0, 1, 0), 10), ValidationError);
}

TEST(Sampling, DeterministicForSeed) {
    BoxDensitySpec s(2, {{Box(Point{0.0, 0.0}, Point{1.0, 2.0}), 0.5}});
    for (auto mode : {SamplingMode::Stratified, SamplingMode::Random}) {
        auto a = sample_density(s, 300, mode, 9), b = sample_density(s, 300, mode, 9);
        ASSERT_EQ(a.size(), 300u);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.point(i), b.point(i));
    }
}

// Every atom lies in the support and box masses are apportioned to within one atom.
TEST(Sampling, StratifiedRespectsComponentMasses) {
    BoxDensitySpec s(2, {{Box(Point{8.0, 0.0}, Point{9.0, 4.0}), 0.0625},
                         {Box(Point{13.0, 0.0}, Point{14.0, 4.0}), 0.0625},
                         {Box(Point{9.0, 0.0}, Point{13.0, 1.0}), 0.0625},
                         {Box(Point{9.0, 3.0}, Point{13.0, 4.0}), 0.0625}});
    auto c = sample_density(s, 2000);
    for (const auto& comp : s.components()) {
        std::size_t k = 0;
        for (const auto& p : c.points()) k += comp.box.contains_open(p);
        EXPECT_NEAR(static_cast<double>(k), 2000 * comp.density * comp.box.volume(), 1.0);
    }
    for (const auto& p : c.points()) EXPECT_GT(s.density_at(p), 0.0);
}

TEST(DensityGrid, SingleAtomHasUnitDensity) {
    ParticleCloud c(1, {Point{0.55}}, {0.1});
    auto g = estimate_density(c, Box(Point{0.0}, Point{1.0}), resolution_for(Box(Point{0.0}, Point{1.0}), 0.1));
    EXPECT_NEAR(g.max_density(), 1.0, 1e-12);
}

TEST(DensityGrid, RecoversUniformDensity) {
    auto c = sample_density(uniform_1d(0, 2, 0.5), 100000, SamplingMode::Random, 1);
    Box dom(Point{0.0}, Point{2.0});
    auto g = estimate_density(c, dom, resolution_for(dom, 0.1));
    ASSERT_EQ(g.mass.size(), 20u);
    for (std::size_t k = 0; k < g.mass.size(); ++k) EXPECT_NEAR(g.density(k), 0.5, 0.05);
}

TEST(DensityGrid, EmptyCloudAndOutOfDomainMass) {
    Box dom(Point{0.0, 0.0}, Point{1.0, 1.0});
    auto g = estimate_density(ParticleCloud(2, {}, {}), dom, resolution_for(dom, 0.25));
    EXPECT_EQ(g.max_density(), 0.0);
    auto h = estimate_density(ParticleCloud(2, {Point{3.0, 0.5}}, {0.5}), dom, resolution_for(dom, 0.25));
    EXPECT_EQ(h.out_of_domain_mass, 0.5);
    EXPECT_EQ(h.max_density(), 0.0);
}

TEST(DensityGrid, MatrixRowsFollowTheSecondAxis) {
    Box dom(Point{0.0, 0.0}, Point{3.0, 2.0});
    auto g = estimate_density(ParticleCloud(2, {Point{2.5, 0.5}}, {1.0}), dom, resolution_for(dom, 1.0));
    std::ostringstream os;
    write_density_matrix(g, os);
    std::istringstream is(os.str());
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::vector<double> r;
        double x;
        while (ls >> x) r.push_back(x);
        if (!r.empty()) rows.push_back(r);
    }
    ASSERT_EQ(rows.size(), 2u);
    ASSERT_EQ(rows[0].size(), 3u);
    EXPECT_EQ(rows[0][2], 1.0);
    EXPECT_EQ(rows[1][2], 0.0);
}

TEST(CloudCsv, RoundTrip) {
    std::mt19937_64 rng(2);
    ParticleCloud c = random_cloud(rng, 2, 37, -3, 3, 0.7);
    std::stringstream ss;
    write_cloud_csv(c, ss);
    ParticleCloud d = read_cloud_csv(ss);
    ASSERT_EQ(d.size(), c.size());
    ASSERT_EQ(d.dim(), 2);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_EQ(d.point(i), c.point(i));
        EXPECT_EQ(d.weight(i), c.weight(i));
    }
}

TEST(Wasserstein, IdenticalAndShifted) {
    ParticleCloud a(1, {Point{0.0}}, {1.0}), b(1, {Point{3.0}}, {1.0});
    EXPECT_EQ(wasserstein_discrete(a, a), 0.0);
    EXPECT_DOUBLE_EQ(wasserstein_discrete(a, b), 3.0);
    EXPECT_DOUBLE_EQ(wasserstein_discrete(a, b, kInf), 3.0);
}

TEST(Wasserstein, RejectsIncompatibleClouds) {
    ParticleCloud a(1, {Point{0.0}}, {1.0}), b(1, {Point{0.0}, Point{1.0}}, {0.5, 0.5}), c(1, {Point{3.0}}, {2.0});
    EXPECT_THROW(wasserstein_discrete(a, b), ValidationError);
    EXPECT_THROW(wasserstein_discrete(a, c), ValidationError);
    EXPECT_THROW(wasserstein_discrete(a, a, 0.5), ValidationError);
}

// Five atoms: all 120 couplings enumerated.
TEST(Wasserstein, MatchesPermutationBruteForce) {
    std::mt19937_64 rng(17);
    for (int dim : {1, 2}) {
        for (int rep = 0; rep < 20; ++rep) {
            auto a = random_cloud(rng, dim, 5, -2, 2, 2.0), b = random_cloud(rng, dim, 5, -1, 3, 2.0);
            for (double p : {1.0, 2.0, 3.0}) {
                double best = brute_min_over_permutations(5, [&](const std::vector<int>& s) {
                    double acc = 0;
                    for (int i = 0; i < 5; ++i) acc += std::pow(dist(a.point(i), b.point(s[i])), p);
                    return acc;
                });
                double want = std::pow(2.0 * best / 5, 1 / p);
                EXPECT_NEAR(wasserstein_discrete(a, b, p), want, 1e-9);
                EXPECT_NEAR(wasserstein_discrete(a, b, p, WassersteinMethod::Assignment), want, 1e-9);
            }
            double winf = brute_min_over_permutations(5, [&](const std::vector<int>& s) {
                double m = 0;
                for (int i = 0; i < 5; ++i) m = std::max(m, dist(a.point(i), b.point(s[i])));
                return m;
            });
            EXPECT_NEAR(wasserstein_discrete(a, b, kInf), winf, 1e-12);
        }
    }
}

TEST(Wasserstein, OrderingTriangleAndScaling) {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 30; ++rep) {
        auto a = random_cloud(rng, 2, 12, 0, 1), b = random_cloud(rng, 2, 12, 0.5, 2), c = random_cloud(rng, 2, 12, -1, 1);
        double w1 = wasserstein_discrete(a, b, 1), w2 = wasserstein_discrete(a, b, 2), wi = wasserstein_discrete(a, b, kInf);
        EXPECT_LE(w1, w2 + 1e-12);
        EXPECT_LE(w2, wi + 1e-12);
        EXPECT_LE(w1, wasserstein_discrete(a, c) + wasserstein_discrete(c, b) + 1e-12);
        EXPECT_NEAR(wasserstein_discrete(a, b), wasserstein_discrete(b, a), 1e-12);
        // W1 scales linearly with total mass.
        auto a3 = ParticleCloud::equal(2, a.points(), 3.0), b3 = ParticleCloud::equal(2, b.points(), 3.0);
        EXPECT_NEAR(wasserstein_discrete(a3, b3), 3 * w1, 1e-9);
    }
}

TEST(Wasserstein, SubsampleKeepsMassAndIsDeterministic) {
    std::mt19937_64 rng(4);
    auto a = random_cloud(rng, 2, 1000, 0, 1, 1.5);
    auto s = subsample(a, 100, 42), t = subsample(a, 100, 42);
    ASSERT_EQ(s.size(), 100u);
    EXPECT_NEAR(s.total_mass(), 1.5, 1e-12);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.point(i), t.point(i));
    EXPECT_EQ(subsample(a, 2000, 1).size(), 1000u);
}
