#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "assignment.hpp"
#include "control.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "mesh.hpp"
#include "mintime.hpp"
#include "simulator.hpp"

namespace crowdctl {

// One transported unit (an agent or a mesh cell): free flow until s0, straight from y0 at
// s0 to y1 at T - s1, free flow afterwards.
struct AgentPlan {
    std::size_t source = 0, target = 0;
    double t0 = 0.0, t1 = 0.0;  // entry times
    double s0 = 0.0, s1 = 0.0;  // perturbed entry times
    Point y0, y1;               // Phi_{s0}(x0), Phi_{-s1}(x1)
    double depart = 0.0, arrive = 0.0;
};

namespace detail {

struct Perturbed {
    double s;
    Point y;
};

// First s in (t, t + delta/3) whose flow image is strictly inside omega; s = 0 when x already is.
inline Perturbed perturb_entry(const VectorField& v, const ControlRegion& omega, const Point& x, double t, double delta, Direction dir,
                               const FlowConfig& cfg) {
    double sgn = dir == Direction::Forward ? 1.0 : -1.0;
    if (t == 0.0 && omega.signed_distance(x) > 0) return {0.0, x};
    double s = t + delta / 6;
    Point y = integrate_flow(v, x, sgn * s, cfg);
    if (omega.signed_distance(y) > 0) return {s, y};
    for (int k = 1; k < 32; ++k) {
        s = t + (delta / 3) * k / 32.0;
        y = integrate_flow(v, x, sgn * s, cfg);
        if (omega.signed_distance(y) > 0) return {s, y};
    }
    throw SynthesisError("no strictly interior point within delta/3 after the entry time");
}

// Free-flow knots from p at time a to time b, spaced at most `step` apart.
inline void append_free_flow(const VectorField& v, Point p, double a, double b, double step, const FlowConfig& cfg,
                             std::vector<double>& times, std::vector<Point>& pts) {
    if (times.empty() || times.back() < a) {
        times.push_back(a);
        pts.push_back(p);
    }
    if (!(b > a)) return;
    int m = std::max(1, static_cast<int>(std::ceil((b - a) / step)));
    if (v.kind() == VectorField::Kind::Constant) m = 1;
    double h = (b - a) / m;
    for (int k = 1; k <= m; ++k) {
        p = integrate_flow(v, p, h, cfg);
        times.push_back(k == m ? b : a + k * h);
        pts.push_back(p);
    }
}

// Center polyline of a plan restricted to [start, end].
inline void plan_polyline(const VectorField& v, const AgentPlan& p, const Point& x0, double start, double end, double step,
                          const FlowConfig& cfg, std::vector<double>& times, std::vector<Point>& pts) {
    Point q = integrate_flow(v, x0, start, cfg);
    append_free_flow(v, q, start, p.s0, step, cfg, times, pts);
    if (times.back() < p.s0) {
        times.push_back(p.s0);
        pts.push_back(p.y0);
    } else {
        pts.back() = p.y0;
    }
    times.push_back(p.arrive);
    pts.push_back(p.y1);
    append_free_flow(v, p.y1, p.arrive, end, step, cfg, times, pts);
}

// Minimum distance between two piecewise-linear motions over their common time span.
inline double polyline_separation(const std::vector<double>& ta, const std::vector<Point>& pa, const std::vector<double>& tb,
                                  const std::vector<Point>& pb) {
    double lo = std::max(ta.front(), tb.front()), hi = std::min(ta.back(), tb.back());
    if (lo > hi) return kInf;
    auto at = [](const std::vector<double>& t, const std::vector<Point>& p, double s) {
        auto it = std::upper_bound(t.begin(), t.end(), s);
        std::size_t k = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
        if (k + 1 >= t.size()) return p.back();
        double a = (s - t[k]) / (t[k + 1] - t[k]);
        return p[k] + a * (p[k + 1] - p[k]);
    };
    std::vector<double> knots;
    for (double s : ta)
        if (s >= lo && s <= hi) knots.push_back(s);
    for (double s : tb)
        if (s >= lo && s <= hi) knots.push_back(s);
    knots.push_back(lo);
    knots.push_back(hi);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    double best = dist(at(ta, pa, lo), at(tb, pb, lo));
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        TimedSegment A{at(ta, pa, knots[k]), at(ta, pa, knots[k + 1]), knots[k], knots[k + 1]};
        TimedSegment B{at(tb, pb, knots[k]), at(tb, pb, knots[k + 1]), knots[k], knots[k + 1]};
        best = std::min(best, min_distance_linear(A, B, knots[k], knots[k + 1]));
    }
    return best;
}

inline double stable_gain(double L, double T, double cap, const FlowConfig& cfg) {
    double c = std::max(2.0 * std::exp(L * T), 1.0);
    return std::min({c, cap, 0.5 / cfg.dt});
}

}  // namespace detail

struct MicroSynthesis {
    ControlField control;
    std::vector<AgentPlan> plans;
    Assignment assignment;
    MicroInfimum infimum;
    double delta_used = 0.0;
    double separation = kInf;
    int closest_i = -1, closest_j = -1;
    double gain = 0.0;
};

// Exact controllability of finitely many agents: straight segments between perturbed entry
// points under an optimal space-time assignment, each followed by its own feedback tube.
inline MicroSynthesis synthesize_micro(const ParticleCloud& x0, const ParticleCloud& x1, double T, double delta, const VectorField& v,
                                       const ControlRegion& omega, const FlowConfig& cfg = {}, double gain_cap = 1e6) {
    if (!omega.is_convex()) throw ValidationError("micro synthesis needs a convex control region");
    if (!(delta > 0)) throw ValidationError("delta must be positive");
    MicroSynthesis out;
    out.infimum = micro_infimum(v, omega, x0, x1, cfg);
    if (!(T > out.infimum.m_e))
        throw InfeasibleTimeError("T = " + std::to_string(T) + " does not exceed M_e = " + std::to_string(out.infimum.m_e), out.infimum.m_e);
    const std::size_t n = x0.size();
    out.delta_used = std::min(delta, T - out.infimum.m_e);

    std::vector<SpaceTimePoint> from(n), to(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto a = detail::perturb_entry(v, omega, x0.point(i), out.infimum.t0[i], out.delta_used, Direction::Forward, cfg);
        auto b = detail::perturb_entry(v, omega, x1.point(i), out.infimum.t1[i], out.delta_used, Direction::Backward, cfg);
        from[i] = {a.y, a.s};
        to[i] = {b.y, b.s};
    }
    out.assignment = solve_min_sum(build_space_time_costs(from, to, T, omega));

    const double step = std::max(cfg.dt, T / 2000);
    std::vector<std::vector<double>> kt(n);
    std::vector<std::vector<Point>> kp(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = static_cast<std::size_t>(out.assignment.sigma[i]);
        AgentPlan p;
        p.source = i;
        p.target = j;
        p.t0 = out.infimum.t0[i];
        p.t1 = out.infimum.t1[j];
        p.s0 = from[i].s;
        p.s1 = to[j].s;
        p.y0 = from[i].y;
        p.y1 = to[j].y;
        p.depart = p.s0;
        p.arrive = T - p.s1;
        out.plans.push_back(p);
        detail::plan_polyline(v, p, x0.point(i), 0.0, T, step, cfg, kt[i], kp[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = detail::polyline_separation(kt[i], kp[i], kt[j], kp[j]);
            if (s < out.separation) {
                out.separation = s;
                out.closest_i = static_cast<int>(i);
                out.closest_j = static_cast<int>(j);
            }
        }
    if (out.separation < 1e-6)
        throw SynthesisError("trajectories of agents " + std::to_string(out.closest_i) + " and " + std::to_string(out.closest_j) +
                             " come within " + std::to_string(out.separation));

    FieldBounds fb = v.bounds(omega.bounding_box());
    out.gain = detail::stable_gain(fb.lipschitz, T, gain_cap, cfg);
    std::vector<ControlWindow> windows;
    for (const auto& p : out.plans) {
        double R = std::min(out.separation / 3, std::min(omega.signed_distance(p.y0), omega.signed_distance(p.y1)) * (1 - 1e-9));
        double r = std::min(out.separation / 6, R / 2);
        ControlWindow w;
        w.t_start = p.depart;
        w.t_end = p.arrive;
        w.knot_times = {p.depart, p.arrive};
        w.centers = {p.y0, p.y1};
        w.radius_times = {p.depart};
        w.inner = {r};
        w.outer = {R};
        w.gain = out.gain;
        w.source = static_cast<int>(p.source);
        w.target = static_cast<int>(p.target);
        windows.push_back(std::move(w));
    }
    out.control = ControlField(v, omega, std::move(windows));
    return out;
}

struct MacroOptions {
    double delta = 0.1;
    double epsilon = 0.0;          // W1 tolerance; eps / (4 R_dom) of mass may stay behind
    double gain_cap = 1e6;
    bool cap_cell_count = false; // keep only n^4 - n^3 cells per side
    bool enforce_infimum = true;   // reject T <= S of the representative measures
    std::size_t extra_drop = 0;    // additional cells allowed to stay behind
    double separation_factor = 0.49;
    double gain = 0.0;             // fixed gain; 0 selects by doubling
    bool catch_hold = true;        // also try holding each center still while its cell flows in
    double hold_fraction = 0.3;    // hold length as a fraction of the cell half extent along the flow
};

struct MacroSynthesis {
    ControlField control;
    std::vector<AgentPlan> plans;  // source / target are cell indices
    std::vector<std::vector<Point>> probes;
    std::size_t source_cells = 0, target_cells = 0, dropped = 0;
    double R_dom = 0.0, erosion_in = 0.0, erosion_out = 0.0;
    double s_representatives = 0.0, m_eroded = 0.0, delta_used = 0.0;
    double gain = 0.0;
    bool disjointness_verified = false;
    double capture_fraction = 0.0;
    bool catch_hold = false;       // centers wait at their entry points
};

namespace detail {

// Fraction of probe points lying inside their own outer tube at sampled transport times.
inline double tube_capture(const ParticleCloud& probes, const std::vector<std::size_t>& owner, const ControlField& cf,
                           const std::vector<AgentPlan>& plans, const std::vector<std::size_t>& window_of_plan, double T,
                           const FlowConfig& cfg) {
    std::vector<double> times;
    for (const auto& p : plans)
        for (int k = 0; k <= 8; ++k) times.push_back(p.depart + (p.arrive - p.depart) * k / 8.0);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    while (!times.empty() && times.back() > T) times.pop_back();
    SimulationOptions opt;
    opt.snapshot_times = times;
    auto sim = simulate(probes, cf, T, cfg, opt);
    std::size_t total = 0, inside = 0;
    for (std::size_t s = 0; s < sim.snapshot_times.size(); ++s) {
        double t = sim.snapshot_times[s];
        for (std::size_t a = 0; a < probes.size(); ++a) {
            const auto& p = plans[owner[a]];
            if (t < p.depart || t > p.arrive) continue;
            const auto& w = cf.windows()[window_of_plan[owner[a]]];
            ++total;
            if (dist(sim.snapshots[s].point(a), w.center(t)) < w.radii(t).second) ++inside;
        }
    }
    return total ? static_cast<double>(inside) / static_cast<double>(total) : 1.0;
}

}  // namespace detail

// Approximate controllability of a measure through its meshes: cells are transported as
// agents inside non-overlapping feedback tubes.
inline MacroSynthesis synthesize_macro(const Mesh& mesh0, const Mesh& mesh1, double T, const VectorField& v, const ControlRegion& omega,
                                       const FlowConfig& cfg = {}, const MacroOptions& opt = {}) {
    if (!omega.is_convex()) throw ValidationError("macro synthesis needs a convex control region");
    if (mesh0.dim != mesh1.dim || mesh0.dim != omega.dim()) throw ValidationError("mesh and region dimensions differ");
    if (mesh0.cells.empty() || mesh1.cells.empty()) throw ValidationError("empty mesh");
    if (!(opt.delta > 0)) throw ValidationError("delta must be positive");
    if (T > cfg.horizon) throw HorizonError("T exceeds the flow horizon");
    MacroSynthesis out;
    const double gamma = mesh0.gamma;
    const double cell_mass = gamma / std::pow(mesh0.n, 4);

    std::vector<Point> r0, r1;
    for (const auto& c : mesh0.cells) r0.push_back(c.representative);
    for (const auto& c : mesh1.cells) r1.push_back(c.representative);

    {
        auto f0 = entry_times(v, omega, r0, Direction::Forward, Closure::Open, cfg);
        auto f1 = entry_times(v, omega, r1, Direction::Backward, Closure::Open, cfg);
        auto F = MassProfile::from_times(f0, std::vector<double>(r0.size(), cell_mass));
        auto B = MassProfile::from_times(f1, std::vector<double>(r1.size(), cell_mass));
        out.s_representatives = sup_pair_sum(F, B, std::min(F.total(), B.total())).value;
        if (opt.enforce_infimum && !(T > out.s_representatives))
            throw InfeasibleTimeError("T does not exceed the infimum time " + std::to_string(out.s_representatives), out.s_representatives);
    }

    // Sweep of omega over [0, T] bounds the domain radius and the Lipschitz constant.
    Box sweep = omega.bounding_box();
    {
        std::vector<Point> bnd = omega.boundary_samples(std::max(1e-3, sweep.diameter() / 64));
        double R = 0.0;
        const double step = std::max(cfg.dt, T / 200);
        for (auto p : bnd) {
            for (double t = 0.0; t < T; t += step) {
                R = std::max(R, norm(p));
                sweep = bounding_union(sweep, Box(p, p));
                p = integrate_flow(v, p, std::min(step, T - t), cfg);
            }
            R = std::max(R, norm(p));
            sweep = bounding_union(sweep, Box(p, p));
        }
        out.R_dom = R * (1 + 1e-9) + 1e-9;
    }
    const FieldBounds fb = v.bounds(sweep);
    const double growth = std::exp(fb.lipschitz * T);

    double capture = 0.0;
    for (const auto& c : mesh0.cells)
        for (const auto& q : c.inner.corners()) capture = std::max(capture, dist(q, c.representative));
    out.erosion_in = growth * capture;
    out.erosion_out = out.erosion_in / 4;
    ControlRegion om_in = omega.erode(out.erosion_in);
    ControlRegion om_out = omega.erode(out.erosion_out);
    if (om_in.empty()) throw SynthesisError("eroded control region is empty; refine the mesh");

    auto t0 = entry_times(v, om_in, r0, Direction::Forward, Closure::Open, cfg);
    auto t1 = entry_times(v, om_out, r1, Direction::Backward, Closure::Open, cfg);
    std::vector<std::size_t> keep0, keep1;
    for (std::size_t i = 0; i < t0.size(); ++i)
        if (std::isfinite(t0[i])) keep0.push_back(i);
    for (std::size_t j = 0; j < t1.size(); ++j)
        if (std::isfinite(t1[j])) keep1.push_back(j);
    if (opt.cap_cell_count) {
        auto limit = static_cast<std::size_t>(std::pow(mesh0.n, 4) - std::pow(mesh0.n, 3));
        if (keep0.size() > limit) keep0.resize(limit);
        if (keep1.size() > limit) keep1.resize(limit);
    }
    const std::size_t N0 = keep0.size(), N1 = keep1.size();
    if (N0 == 0 || N1 == 0) throw SynthesisError("no mesh cell reaches the eroded control region");
    out.source_cells = N0;
    out.target_cells = N1;
    std::size_t drop = static_cast<std::size_t>(std::floor(opt.epsilon / (4 * out.R_dom) / cell_mass + 1e-9)) + opt.extra_drop;
    const std::size_t pairs_wanted = std::min(N0, N1);
    if (drop >= pairs_wanted) throw SynthesisError("tolerance would drop every cell");
    const std::size_t K = pairs_wanted - drop;

    {
        std::vector<double> a, b;
        for (auto i : keep0) a.push_back(t0[i]);
        for (auto j : keep1) b.push_back(t1[j]);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        double m = 0.0;
        for (std::size_t i = 0; i < K; ++i) m = std::max(m, a[i] + b[K - 1 - i]);
        out.m_eroded = m;
    }
    if (!(T > out.m_eroded))
        throw InfeasibleTimeError("T does not exceed the infimum time on the eroded region (" + std::to_string(out.m_eroded) + ")", out.m_eroded);
    out.delta_used = std::min(opt.delta, T - out.m_eroded);

    std::vector<detail::Perturbed> p0, p1;
    for (auto i : keep0) p0.push_back(detail::perturb_entry(v, om_in, r0[i], t0[i], out.delta_used, Direction::Forward, cfg));
    for (auto j : keep1) p1.push_back(detail::perturb_entry(v, om_out, r1[j], t1[j], out.delta_used, Direction::Backward, cfg));

    const std::size_t N = std::max(N0, N1);
    CostMatrix Kc(N, 0.0);
    for (std::size_t i = 0; i < N0; ++i)
        for (std::size_t j = 0; j < N1; ++j) {
            double arrive = T - p1[j].s;
            Kc(i, j) = p0[i].s < arrive ? std::sqrt(norm2(p0[i].y - p1[j].y) + (arrive - p0[i].s) * (arrive - p0[i].s)) : kInf;
        }
    Assignment asg = solve_partial(Kc, drop);

    for (std::size_t i = 0; i < N0; ++i) {
        int j = asg.sigma[i];
        if (j < 0 || static_cast<std::size_t>(j) >= N1) continue;
        AgentPlan p;
        p.source = keep0[i];
        p.target = keep1[static_cast<std::size_t>(j)];
        p.t0 = t0[p.source];
        p.t1 = t1[p.target];
        p.s0 = p0[i].s;
        p.s1 = p1[static_cast<std::size_t>(j)].s;
        p.y0 = p0[i].y;
        p.y1 = p1[static_cast<std::size_t>(j)].y;
        p.depart = p.s0;
        p.arrive = T - p.s1;
        out.plans.push_back(p);
    }
    out.dropped = N0 - out.plans.size();

    // Builds polylines, radii and gain for one choice of catch phase.
    const MacroSynthesis base = out;
    auto realize = [&](bool with_hold) {
        MacroSynthesis res = base;
        res.catch_hold = with_hold;
        // Center polylines over [t0, T - t1]: entry into the eroded region until exit from its target-side counterpart.
        const double knot_step = std::max(cfg.dt, std::min(0.05, T / 400));
        std::vector<std::vector<double>> kt(res.plans.size());
        std::vector<std::vector<Point>> kp(res.plans.size());
        for (std::size_t k = 0; k < res.plans.size(); ++k) {
            auto& p = res.plans[k];
            Point q0 = integrate_flow(v, r0[p.source], p.t0, cfg);
            double speed = norm(v(q0));
            double lead = 0.0, hold = 0.0;
            if (with_hold && speed > 0) {
                // Half extent of the cell along the flow at its representative.
                Point dir = (1.0 / speed) * v(q0);
                double reach = 0.0;
                for (const auto& q : mesh0.cells[p.source].inner.corners()) reach = std::max(reach, dot(q - r0[p.source], dir));
                lead = std::min(reach / speed, p.t0);
                hold = std::min(opt.hold_fraction * reach / speed, 0.5 * (p.arrive - p.t0));
            }
            if (lead > 0 || hold > 0) {
                // The center waits at the entry point from the arrival of the cell front until most of the cell has flowed in.
                p.depart = p.t0 + hold;
                p.y0 = q0;
                kt[k] = {p.t0 - lead, p.depart};
                kp[k] = {q0, q0};
                kt[k].push_back(p.arrive);
                kp[k].push_back(p.y1);
                detail::append_free_flow(v, p.y1, p.arrive, T - p.t1, knot_step, cfg, kt[k], kp[k]);
            } else {
                detail::plan_polyline(v, p, r0[p.source], p.t0, T - p.t1, knot_step, cfg, kt[k], kp[k]);
            }
        }
        auto center_at = [&](std::size_t k, double t) {
            const auto& tt = kt[k];
            auto it = std::upper_bound(tt.begin(), tt.end(), t);
            std::size_t s = it == tt.begin() ? 0 : std::min(static_cast<std::size_t>(it - tt.begin()) - 1, tt.size() - 2);
            double a = (t - tt[s]) / (tt[s + 1] - tt[s]);
            return kp[k][s] + a * (kp[k][s + 1] - kp[k][s]);
        };

        // Radii on a shared time grid: a fraction of the distance to the nearest active center,
        // never reaching the complement of omega.
        const double radius_step = std::max(cfg.dt, std::min(0.01, T / 400));
        std::vector<std::vector<double>> rt(res.plans.size()), Rv(res.plans.size());
        {
            std::vector<double> grid;
            for (double t = 0.0; t <= T; t += radius_step) grid.push_back(t);
            for (std::size_t k = 0; k < res.plans.size(); ++k) {
                grid.push_back(kt[k].front());
                grid.push_back(kt[k].back());
            }
            std::sort(grid.begin(), grid.end());
            grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
            std::vector<std::size_t> order(res.plans.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return kt[a].front() < kt[b].front(); });
            std::vector<std::size_t> active;
            std::vector<Point> cen;
            for (double t : grid) {
                active.clear();
                cen.clear();
                for (auto k : order) {
                    if (kt[k].front() > t) break;
                    if (t <= kt[k].back()) {
                        active.push_back(k);
                        cen.push_back(center_at(k, t));
                    }
                }
                for (std::size_t a = 0; a < active.size(); ++a) {
                    double sep = kInf;
                    for (std::size_t b = 0; b < active.size(); ++b)
                        if (a != b) sep = std::min(sep, dist(cen[a], cen[b]));
                    double R = std::min(opt.separation_factor * sep, omega.signed_distance(cen[a]) * (1 - 1e-6));
                    rt[active[a]].push_back(t);
                    Rv[active[a]].push_back(std::max(R, 1e-12));
                }
            }
        }

        // Probes: representative plus inner-box corners pulled halfway in.
        std::vector<Point> probe_pts;
        std::vector<std::size_t> owner;
        for (std::size_t k = 0; k < res.plans.size(); ++k) {
            const auto& c = mesh0.cells[res.plans[k].source];
            std::vector<Point> pr{c.representative};
            for (const auto& q : c.inner.corners()) pr.push_back(c.representative + 0.5 * (q - c.representative));
            for (const auto& q : pr) {
                probe_pts.push_back(q);
                owner.push_back(k);
            }
            res.probes.push_back(std::move(pr));
        }
        ParticleCloud probes = ParticleCloud::equal(mesh0.dim, probe_pts, 1.0);

        auto build = [&](double gain) {
            std::vector<ControlWindow> ws;
            for (std::size_t k = 0; k < res.plans.size(); ++k) {
                ControlWindow w;
                w.t_start = kt[k].front();
                w.t_end = kt[k].back();
                w.knot_times = kt[k];
                w.centers = kp[k];
                w.radius_times = rt[k];
                w.outer = Rv[k];
                for (double R : Rv[k]) w.inner.push_back(R / 2);
                w.gain = gain;
                w.source = static_cast<int>(res.plans[k].source);
                w.target = static_cast<int>(res.plans[k].target);
                ws.push_back(std::move(w));
            }
            return ControlField(v, omega, std::move(ws));
        };
        // Window index per plan after the field sorts windows by start time.
        auto window_index = [&](const ControlField& cf) {
            std::vector<std::size_t> idx(res.plans.size());
            for (std::size_t w = 0; w < cf.windows().size(); ++w) {
                const auto& win = cf.windows()[w];
                for (std::size_t k = 0; k < res.plans.size(); ++k)
                    if (static_cast<int>(res.plans[k].source) == win.source && static_cast<int>(res.plans[k].target) == win.target) idx[k] = w;
            }
            return idx;
        };

        const double cap = std::min(opt.gain_cap, 0.5 / cfg.dt);
        double gain = opt.gain > 0 ? std::min(opt.gain, cap) : detail::stable_gain(fb.lipschitz, T, cap, cfg);
        for (;;) {
            res.control = build(gain);
            res.capture_fraction = detail::tube_capture(probes, owner, res.control, res.plans, window_index(res.control), T, cfg);
            res.disjointness_verified = res.capture_fraction >= 1.0;
            if (res.disjointness_verified || opt.gain > 0 || gain >= cap) break;
            gain = std::min(2 * gain, cap);
        }
        res.gain = gain;
        return res;
    };
    // Holding helps when cells are longer along the flow than their tubes; keep it only if it does better.
    MacroSynthesis plain = realize(false);
    if (!opt.catch_hold) return plain;
    MacroSynthesis held = realize(true);
    auto better = [](const MacroSynthesis& x, const MacroSynthesis& y) {
        if (x.disjointness_verified != y.disjointness_verified) return x.disjointness_verified;
        if (x.disjointness_verified) return x.gain < y.gain;
        return x.capture_fraction > y.capture_fraction;
    };
    return better(held, plain) ? held : plain;
}

}  // namespace crowdctl
