#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "assignment.hpp"
#include "measures.hpp"

namespace crowdctl {

enum class WassersteinMethod { Automatic, Assignment };

// W_p between equal-atom clouds of the same size and mass; p = +inf gives W_inf.
// d = 1 uses the sorted (monotone) coupling, which is optimal for every p >= 1.
inline double wasserstein_discrete(const ParticleCloud& a, const ParticleCloud& b, double p = 1.0,
                                   WassersteinMethod method = WassersteinMethod::Automatic) {
    if (a.dim() != b.dim()) throw ValidationError("clouds have different dimensions");
    if (a.size() != b.size()) throw ValidationError("clouds have different atom counts");
    if (!a.equal_atoms() || !b.equal_atoms()) throw ValidationError("Wasserstein distance needs equal-weight atoms");
    double ma = a.total_mass(), mb = b.total_mass();
    if (std::abs(ma - mb) > 1e-9 * std::max({1.0, ma, mb})) throw ValidationError("clouds have different total masses");
    if (!(p >= 1.0)) throw ValidationError("Wasserstein order must be >= 1");
    const std::size_t n = a.size();
    if (n == 0) return 0.0;
    const bool inf = std::isinf(p);

    if (a.dim() == 1 && method == WassersteinMethod::Automatic) {
        std::vector<double> xa(n), xb(n);
        for (std::size_t i = 0; i < n; ++i) { xa[i] = a.point(i)[0]; xb[i] = b.point(i)[0]; }
        std::sort(xa.begin(), xa.end());
        std::sort(xb.begin(), xb.end());
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = std::abs(xa[i] - xb[i]);
            acc = inf ? std::max(acc, d) : acc + std::pow(d, p);
        }
        return inf ? acc : std::pow(ma * acc / static_cast<double>(n), 1.0 / p);
    }

    CostMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double d = dist(a.point(i), b.point(j));
            c(i, j) = inf ? d : std::pow(d, p);
        }
    if (inf) return solve_bottleneck(c).value;
    return std::pow(ma * solve_min_sum(c).value, 1.0 / p);
}

// Keeps at most `cap` atoms: every k-th atom from a seeded offset, so stratified
// clouds stay stratified. Raw weights are rescaled to preserve total mass.
inline ParticleCloud subsample(const ParticleCloud& c, std::size_t cap, std::uint64_t seed = 42) {
    if (c.size() <= cap) return c;
    std::mt19937_64 rng(seed);
    std::vector<Point> pts;
    pts.reserve(cap);
    double stride = static_cast<double>(c.size()) / static_cast<double>(cap);
    double offset = std::uniform_real_distribution<double>(0.0, stride)(rng);
    for (std::size_t k = 0; k < cap; ++k) {
        auto idx = std::min(c.size() - 1, static_cast<std::size_t>(offset + stride * static_cast<double>(k)));
        pts.push_back(c.point(idx));
    }
    return ParticleCloud::equal(c.dim(), std::move(pts), c.total_mass());
}

}  // namespace crowdctl
