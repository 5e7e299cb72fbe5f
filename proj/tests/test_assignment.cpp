#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace crowdctl;
using namespace testsupport;

namespace {

CostMatrix random_matrix(std::mt19937_64& rng, std::size_t n, double p_inf, bool integers) {
    std::uniform_real_distribution<double> u(0.0, 10.0), coin(0.0, 1.0);
    CostMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = coin(rng) < p_inf ? kInf : (integers ? std::floor(u(rng) / 2) : u(rng));
    return c;
}

bool is_permutation(const std::vector<int>& s) {
    std::vector<int> t = s;
    std::sort(t.begin(), t.end());
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] != static_cast<int>(i)) return false;
    return true;
}

double sum_of(const CostMatrix& c, const std::vector<int>& s) {
    double a = 0;
    for (std::size_t i = 0; i < s.size(); ++i) a += c(i, s[i]);
    return a;
}

double max_of(const CostMatrix& c, const std::vector<int>& s) {
    double a = 0;
    for (std::size_t i = 0; i < s.size(); ++i) a = std::max(a, c(i, s[i]));
    return a;
}

// Lexicographically smallest optimal permutation by enumeration.
std::vector<int> brute_lex_min_sum(const CostMatrix& c) {
    double best = brute_min_sum(c);
    std::vector<int> s(c.size());
    std::iota(s.begin(), s.end(), 0);
    do
        if (std::abs(sum_of(c, s) - best) <= 1e-9 * std::max(1.0, best)) return s;
    while (std::next_permutation(s.begin(), s.end()));
    return {};
}

}  // namespace

TEST(MinSum, SmallKnownInstance) {
    CostMatrix c({{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
    Assignment a = solve_min_sum(c);
    EXPECT_EQ(a.sigma, (std::vector<int>{1, 0, 2}));
    EXPECT_DOUBLE_EQ(a.value, 5.0 / 3.0);
    EXPECT_EQ(a.kind, AssignmentKind::MinSum);
}

TEST(MinSum, MatchesBruteForceWithInfiniteEntries) {
    std::mt19937_64 rng(101);
    for (int rep = 0; rep < 400; ++rep) {
        std::size_t n = 1 + rep % 6;
        CostMatrix c = random_matrix(rng, n, 0.3, rep % 2 == 0);
        double best = brute_min_sum(c);
        if (std::isinf(best)) {
            EXPECT_THROW(solve_min_sum(c), InfeasibleAssignmentError);
            continue;
        }
        Assignment a = solve_min_sum(c);
        ASSERT_TRUE(is_permutation(a.sigma));
        EXPECT_NEAR(sum_of(c, a.sigma), best, 1e-9);
        EXPECT_NEAR(a.value, best / n, 1e-9);
    }
}

// Among equal optima the lexicographically smallest permutation is returned.
TEST(MinSum, LexicographicTieBreak) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t n = 2 + rep % 5;
        CostMatrix c = random_matrix(rng, n, 0.15, true);
        if (std::isinf(brute_min_sum(c))) continue;
        EXPECT_EQ(solve_min_sum(c).sigma, brute_lex_min_sum(c));
    }
    EXPECT_EQ(solve_min_sum(CostMatrix(4, 1.0)).sigma, (std::vector<int>{0, 1, 2, 3}));
}

TEST(MinSum, InfeasibleRowReportsPartialMatching) {
    CostMatrix c({{1, 2, 3}, {kInf, kInf, kInf}, {2, 1, 0}});
    try {
        solve_min_sum(c);
        FAIL() << "expected InfeasibleAssignmentError";
    } catch (const InfeasibleAssignmentError& e) {
        EXPECT_EQ(e.max_matching, 2u);
    }
    EXPECT_THROW(solve_bottleneck(c), InfeasibleAssignmentError);
}

TEST(MinSum, RejectsMalformedMatrices) {
    EXPECT_THROW(CostMatrix({{1, 2}, {3}}), ValidationError);
    EXPECT_THROW(CostMatrix({{1, std::nan("")}, {0, 1}}), ValidationError);
    EXPECT_THROW(CostMatrix({{1, -kInf}, {0, 1}}), ValidationError);
}

TEST(Bottleneck, MatchesBruteForceWithInfiniteEntries) {
    std::mt19937_64 rng(202);
    for (int rep = 0; rep < 400; ++rep) {
        std::size_t n = 1 + rep % 6;
        CostMatrix c = random_matrix(rng, n, 0.3, rep % 2 == 1);
        double best = brute_bottleneck(c);
        if (std::isinf(best)) {
            EXPECT_THROW(solve_bottleneck(c), InfeasibleAssignmentError);
            continue;
        }
        Assignment a = solve_bottleneck(c);
        ASSERT_TRUE(is_permutation(a.sigma));
        EXPECT_EQ(max_of(c, a.sigma), best);
        EXPECT_EQ(a.value, best);
    }
}

// With costs t0_i + t1_j the bottleneck equals the sorted (ascending against descending) pairing.
TEST(Bottleneck, SumCostsEqualSortedFormula) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 1 + rep % 7;
        std::vector<double> t0(n), t1(n);
        for (auto& t : t0) t = u(rng);
        for (auto& t : t1) t = u(rng);
        CostMatrix c(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) = t0[i] + t1[j];
        EXPECT_DOUBLE_EQ(solve_bottleneck(c).value, sorted_pair_max(t0, t1));
    }
}

TEST(Partial, DropOneBottleneck) {
    CostMatrix c({{10, 1}, {1, 10}});
    Assignment a = solve_partial(c, 1, true);
    EXPECT_EQ(a.value, 1.0);
    EXPECT_EQ(a.kind, AssignmentKind::PartialBottleneck);
    Assignment full = solve_partial(c, 0, true);
    EXPECT_EQ(full.value, 1.0);
    EXPECT_EQ(full.dropped, 0u);
    EXPECT_THROW(solve_partial(c, 3), ValidationError);
}

// Brute force: choose which rows and columns to drop, then the best pairing of the rest.
TEST(Partial, MatchesBruteForce) {
    std::mt19937_64 rng(303);
    for (int rep = 0; rep < 150; ++rep) {
        std::size_t n = 2 + rep % 4, R = rep % 3;
        if (R > n) continue;
        CostMatrix c = random_matrix(rng, n, 0.2, false);
        double best_sum = kInf, best_max = kInf;
        std::vector<int> rows(n), cols(n);
        std::iota(rows.begin(), rows.end(), 0);
        do {
            std::iota(cols.begin(), cols.end(), 0);
            do {
                double s = 0, m = 0;
                for (std::size_t k = 0; k + R < n; ++k) {
                    s += c(rows[k], cols[k]);
                    m = std::max(m, c(rows[k], cols[k]));
                }
                best_sum = std::min(best_sum, s);
                best_max = std::min(best_max, m);
            } while (std::next_permutation(cols.begin(), cols.end()));
        } while (std::next_permutation(rows.begin(), rows.end()));
        if (std::isinf(best_sum)) {
            EXPECT_THROW(solve_partial(c, R), InfeasibleAssignmentError);
            continue;
        }
        Assignment s = solve_partial(c, R), b = solve_partial(c, R, true);
        EXPECT_NEAR(s.value * n, best_sum, 1e-9);
        EXPECT_EQ(b.value, best_max);
        EXPECT_LE(s.dropped, R);
        std::vector<int> used;
        for (int j : s.sigma)
            if (j >= 0) used.push_back(j);
        std::sort(used.begin(), used.end());
        EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());
    }
}

TEST(Partial, ObjectiveIsMonotoneInDropBudget) {
    std::mt19937_64 rng(404);
    for (int rep = 0; rep < 50; ++rep) {
        CostMatrix c = random_matrix(rng, 6, 0.0, false);
        double prev_s = kInf, prev_b = kInf;
        for (std::size_t R = 0; R <= 4; ++R) {
            double s = solve_partial(c, R).value, b = solve_partial(c, R, true).value;
            EXPECT_LE(s, prev_s + 1e-12);
            EXPECT_LE(b, prev_b);
            prev_s = s;
            prev_b = b;
        }
    }
}

TEST(SpaceTime, CostsAndCutoff) {
    ControlRegion w(Box(Point{0.0, 0.0}, Point{4.0, 4.0}));
    std::vector<SpaceTimePoint> from{{Point{1.0, 1.0}, 1.0}}, to{{Point{1.0, 1.0}, 1.0}};
    EXPECT_DOUBLE_EQ(build_space_time_costs(from, to, 4.0, w)(0, 0), 2.0);
    EXPECT_TRUE(std::isinf(build_space_time_costs(from, to, 2.0, w)(0, 0)));
    std::vector<SpaceTimePoint> to2{{Point{4.0, 1.0}, 1.0}};
    EXPECT_DOUBLE_EQ(build_space_time_costs(from, to2, 6.0, w)(0, 0), 5.0);
    auto ell = ControlRegion::polygon({Point{0.0, 0.0}, Point{6.0, 0.0}, Point{6.0, 1.0}, Point{3.0, 1.0}, Point{3.0, 2.0}, Point{0.0, 2.0}});
    EXPECT_THROW(build_space_time_costs(from, to, 4.0, ell), ValidationError);
}

// Optimal space-time pairings of random convex instances never collide.
TEST(SpaceTime, MinSumOptimaDoNotCross) {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(0.2, 3.8), us(0.0, 1.0);
    ControlRegion w(Box(Point{0.0, 0.0}, Point{4.0, 4.0}));
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 2 + rep % 6;
        const double T = 3.0;
        std::vector<SpaceTimePoint> from(n), to(n);
        for (auto& p : from) p = {Point{u(rng), u(rng)}, us(rng)};
        for (auto& p : to) p = {Point{u(rng), u(rng)}, us(rng)};
        Assignment a = solve_min_sum(build_space_time_costs(from, to, T, w));
        std::vector<TimedSegment> segs;
        for (std::size_t i = 0; i < n; ++i) segs.push_back({from[i].y, to[a.sigma[i]].y, from[i].s, T - to[a.sigma[i]].s});
        EXPECT_TRUE(verify_non_crossing(segs).ok) << "instance " << rep;
    }
}

TEST(NonCrossing, DetectsSwappedCrossing) {
    std::vector<TimedSegment> segs{{Point{0.0, 0.0}, Point{2.0, 2.0}, 0.0, 2.0}, {Point{2.0, 0.0}, Point{0.0, 2.0}, 0.0, 2.0}};
    NonCrossingReport r = verify_non_crossing(segs);
    EXPECT_FALSE(r.ok);
    EXPECT_NEAR(r.min_distance, 0.0, 1e-12);
    EXPECT_EQ(r.i, 0);
    EXPECT_EQ(r.j, 1);
    // Same paths, different times: no collision.
    segs[1].ta = 3.0;
    segs[1].tb = 5.0;
    EXPECT_TRUE(verify_non_crossing(segs).ok);
}

TEST(NonCrossing, LinearDistanceMatchesSampling) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        TimedSegment p{Point{u(rng), u(rng)}, Point{u(rng), u(rng)}, 0.0, 1.0}, q{Point{u(rng), u(rng)}, Point{u(rng), u(rng)}, 0.0, 1.0};
        double m = min_distance_linear(p, q, 0.0, 1.0), s = kInf;
        for (int k = 0; k <= 10000; ++k) s = std::min(s, dist(p.at(k / 1e4), q.at(k / 1e4)));
        EXPECT_LE(m, s + 1e-12);
        EXPECT_GE(m, s - 1e-3);
    }
}
