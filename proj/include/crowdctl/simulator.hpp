#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <optional>
#include <thread>
#include <vector>

#include "control.hpp"
#include "flow.hpp"
#include "measures.hpp"
#include "wasserstein.hpp"

namespace crowdctl {

// Time grid 0 = s_0 < ... < s_K = T: multiples of dt plus every control breakpoint and
// requested snapshot inside (0, T).
inline std::vector<double> step_schedule(double T, double dt, const std::vector<double>& breakpoints,
                                         const std::vector<double>& extra = {}) {
    if (!(T > 0)) throw ValidationError("simulation horizon must be positive");
    std::vector<double> s;
    auto steps = static_cast<long>(std::floor(T / dt + 1e-9));
    s.reserve(static_cast<std::size_t>(steps) + breakpoints.size() + extra.size() + 2);
    for (long k = 0; k <= steps; ++k) s.push_back(std::min(T, static_cast<double>(k) * dt));
    s.push_back(T);
    for (double b : breakpoints)
        if (b > 0 && b < T) s.push_back(b);
    for (double b : extra)
        if (b > 0 && b < T) s.push_back(b);
    std::sort(s.begin(), s.end());
    std::vector<double> out;
    for (double t : s)
        if (out.empty() || t - out.back() > 1e-12 * std::max(1.0, T)) out.push_back(t);
    if (out.back() != T) out.back() = T;
    return out;
}

struct SimulationOptions {
    std::vector<double> snapshot_times;   // default {0, T/3, 2T/3, T}
    std::optional<Box> density_domain;    // enables the max-density probe
    std::array<int, kMaxDim> density_resolution{1, 1, 1};
    double density_every = 0.0;           // probe interval; 0 means T / 100
    std::size_t threads = 0;              // 0 means hardware concurrency
};

struct SimulationResult {
    std::vector<double> snapshot_times;
    std::vector<ParticleCloud> snapshots;
    std::vector<double> probe_times, probe_max_density;
    std::size_t steps = 0;
    double wall_seconds = 0.0;
};

namespace detail {

// v(x) + u(x, t), where the control is added only when some tube actually acts at x.
inline Point controlled_velocity(const VectorField& v, const ControlSlice& u, const Point& x) {
    Point vx = v(x);
    if (u.tubes().empty()) return vx;
    Point ux = u(x);
    bool acts = false;
    for (int i = 0; i < x.dim; ++i) acts = acts || ux[i] != 0.0;
    return acts ? vx + ux : vx;
}

}  // namespace detail

// Integrates every atom of `initial` under v + u to time T with RK4 on the step schedule.
// Weights are never modified. Atoms are split into contiguous ranges, one per thread; each
// atom's arithmetic is independent of the split, so results do not depend on `threads`.
inline SimulationResult simulate(const ParticleCloud& initial, const ControlField& control, double T, const FlowConfig& cfg,
                                 SimulationOptions opt = {}) {
    auto t_wall = std::chrono::steady_clock::now();
    cfg.validate();
    if (T > cfg.horizon) throw HorizonError("simulation horizon exceeds the flow horizon");
    if (opt.snapshot_times.empty()) opt.snapshot_times = {0.0, T / 3, 2 * T / 3, T};
    std::sort(opt.snapshot_times.begin(), opt.snapshot_times.end());
    for (double s : opt.snapshot_times)
        if (s < 0 || s > T) throw ValidationError("snapshot time outside [0, T]");
    const auto sched = step_schedule(T, cfg.dt, control.breakpoints(), opt.snapshot_times);
    const std::size_t n_atoms = initial.size();

    // Schedule nodes (index into sched) at which snapshots and density probes are recorded.
    SimulationResult res;
    std::vector<std::size_t> snap_node, probe_node;
    {
        std::size_t next_snap = 0;
        const double probe_step = opt.density_every > 0 ? opt.density_every : T / 100;
        double next_probe = 0.0;
        for (std::size_t k = 0; k < sched.size(); ++k) {
            double t = sched[k];
            while (next_snap < opt.snapshot_times.size() && opt.snapshot_times[next_snap] <= t + 1e-12 * std::max(1.0, T)) {
                res.snapshot_times.push_back(opt.snapshot_times[next_snap++]);
                snap_node.push_back(k);
            }
            if (opt.density_domain && t + 1e-12 >= next_probe) {
                res.probe_times.push_back(t);
                probe_node.push_back(k);
                next_probe += probe_step;
            }
        }
    }
    std::vector<std::vector<Point>> snap_pos(snap_node.size(), std::vector<Point>(n_atoms));
    std::vector<std::vector<long>> probe_cell(probe_node.size(), std::vector<long>(n_atoms, -1));

    const VectorField& v = control.field();
    auto worker = [&](std::size_t lo, std::size_t hi) {
        std::vector<Point> x(initial.points().begin() + static_cast<std::ptrdiff_t>(lo), initial.points().begin() + static_cast<std::ptrdiff_t>(hi));
        std::size_t si = 0, pi = 0;
        auto record = [&](std::size_t node) {
            for (; si < snap_node.size() && snap_node[si] == node; ++si) std::copy(x.begin(), x.end(), snap_pos[si].begin() + static_cast<std::ptrdiff_t>(lo));
            for (; pi < probe_node.size() && probe_node[pi] == node; ++pi)
                for (std::size_t a = 0; a < x.size(); ++a) probe_cell[pi][lo + a] = density_cell(*opt.density_domain, opt.density_resolution, x[a]);
        };
        record(0);
        for (std::size_t k = 0; k + 1 < sched.size(); ++k) {
            double a = sched[k], b = sched[k + 1], h = b - a;
            ControlSlice s0 = control.slice(a, Side::Right);
            ControlSlice sm = control.slice(a + 0.5 * h, Side::Right);
            ControlSlice s1 = control.slice(b, Side::Left);
            for (auto& p : x) {
                Point k1 = detail::controlled_velocity(v, s0, p);
                Point k2 = detail::controlled_velocity(v, sm, p + (0.5 * h) * k1);
                Point k3 = detail::controlled_velocity(v, sm, p + (0.5 * h) * k2);
                Point k4 = detail::controlled_velocity(v, s1, p + h * k3);
                p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            record(k + 1);
        }
    };

    std::size_t threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::max<std::size_t>(1, std::min(threads, n_atoms / 64));
    if (threads == 1) {
        worker(0, n_atoms);
    } else {
        std::vector<std::future<void>> jobs;
        for (std::size_t c = 0; c < threads; ++c)
            jobs.push_back(std::async(std::launch::async, worker, n_atoms * c / threads, n_atoms * (c + 1) / threads));
        for (auto& j : jobs) j.get();
    }

    for (auto& pos : snap_pos) res.snapshots.emplace_back(initial.dim(), std::move(pos), initial.weights());
    if (opt.density_domain) {
        DensityGrid g;
        g.domain = *opt.density_domain;
        g.resolution = opt.density_resolution;
        std::size_t cells = 1;
        for (int i = 0; i < g.dim(); ++i) cells *= static_cast<std::size_t>(g.resolution[i]);
        for (const auto& cellv : probe_cell) {
            g.mass.assign(cells, 0.0);
            for (std::size_t a = 0; a < n_atoms; ++a)
                if (cellv[a] >= 0) g.mass[static_cast<std::size_t>(cellv[a])] += initial.weight(a);
            res.probe_max_density.push_back(g.max_density());
        }
    }
    res.steps = sched.size() - 1;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_wall).count();
    return res;
}

struct DiagnosticsOptions {
    Box domain;
    double h = 0.1;              // density grid spacing
    std::size_t w1_atoms = 500;  // subsample cap for d >= 2
    std::uint64_t seed = 42;
};

struct RunReport {
    std::vector<double> times, w1, max_density;
    double final_w1 = 0.0;
    double peak_density = 0.0, peak_density_time = 0.0;
    double initial_mass = 0.0, final_mass = 0.0;
    std::size_t atoms = 0, steps = 0;
    double wall_seconds = 0.0;
};

// W1 between equal-atom clouds, subsampling both to at most `cap` atoms in d >= 2.
inline double diagnostic_w1(const ParticleCloud& a, const ParticleCloud& b, std::size_t cap, std::uint64_t seed) {
    std::size_t n = std::min(a.size(), b.size());
    if (a.dim() >= 2) n = std::min(n, cap);
    if (a.size() == n && b.size() == n) return wasserstein_discrete(a, b, 1.0);
    return wasserstein_discrete(subsample(a, n, seed), subsample(b, n, seed), 1.0);
}

inline RunReport track_diagnostics(const SimulationResult& sim, const ParticleCloud& target, const DiagnosticsOptions& opt) {
    RunReport r;
    auto res = resolution_for(opt.domain, opt.h);
    for (std::size_t k = 0; k < sim.snapshots.size(); ++k) {
        r.times.push_back(sim.snapshot_times[k]);
        r.w1.push_back(diagnostic_w1(sim.snapshots[k], target, opt.w1_atoms, opt.seed));
        r.max_density.push_back(estimate_density(sim.snapshots[k], opt.domain, res).max_density());
    }
    r.final_w1 = r.w1.empty() ? 0.0 : r.w1.back();
    for (std::size_t k = 0; k < r.max_density.size(); ++k)
        if (r.max_density[k] > r.peak_density) { r.peak_density = r.max_density[k]; r.peak_density_time = r.times[k]; }
    for (std::size_t k = 0; k < sim.probe_times.size(); ++k)
        if (sim.probe_max_density[k] > r.peak_density) { r.peak_density = sim.probe_max_density[k]; r.peak_density_time = sim.probe_times[k]; }
    if (!sim.snapshots.empty()) {
        r.initial_mass = sim.snapshots.front().total_mass();
        r.final_mass = sim.snapshots.back().total_mass();
        r.atoms = sim.snapshots.front().size();
    }
    r.steps = sim.steps;
    r.wall_seconds = sim.wall_seconds;
    return r;
}

}  // namespace crowdctl
