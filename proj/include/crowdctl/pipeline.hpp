#pragma once

#include <optional>
#include <string>

#include "io.hpp"
#include "mesh.hpp"
#include "mintime.hpp"
#include "scenario.hpp"
#include "simulator.hpp"
#include "synthesis.hpp"

namespace crowdctl {

inline FlowConfig flow_config(const Scenario& s) { return {s.numerics.dt, s.numerics.horizon}; }

// Entry-time clouds and mass profiles of both measures.
struct ScenarioProfiles {
    ParticleCloud source, target;
    std::vector<double> t0, t1;
    MassProfile F, B;
    GeometricConditionReport gc;
};

inline ScenarioProfiles build_profiles(const Scenario& s, bool lenient, std::uint64_t seed = 42) {
    ScenarioProfiles p;
    const FlowConfig cfg = flow_config(s);
    p.source = s.mu0.cloud(s.numerics.n_atoms, SamplingMode::Stratified, seed);
    p.target = s.mu1.cloud(s.numerics.n_atoms, SamplingMode::Stratified, seed);
    p.t0 = entry_times(s.field, s.region, p.source.points(), Direction::Forward, Closure::Open, cfg);
    p.t1 = entry_times(s.field, s.region, p.target.points(), Direction::Backward, Closure::Open, cfg);
    p.gc = check_geometric_condition(p.t0, p.source, p.t1, p.target);
    if (!p.gc.ok && !lenient) {
        std::vector<std::size_t> idx = p.gc.violating_source;
        for (auto j : p.gc.violating_target) idx.push_back(p.source.size() + j);
        throw GeometricConditionError("geometric condition fails: mass " + std::to_string(p.gc.violating_source_mass) +
                                          " of mu0 and " + std::to_string(p.gc.violating_target_mass) +
                                          " of mu1 never reach the control region",
                                      idx);
    }
    p.F = MassProfile::from_times(p.t0, p.source.weights());
    p.B = MassProfile::from_times(p.t1, p.target.weights());
    return p;
}

// Infimum-time report; micro quantities are included when both measures are equal-size atom lists.
inline InfimumTimeReport infimum_report(const Scenario& s, bool lenient, std::uint64_t seed = 42) {
    const FlowConfig cfg = flow_config(s);
    InfimumTimeReport r;
    r.dt = cfg.dt;
    r.horizon = cfg.horizon;
    ScenarioProfiles p = build_profiles(s, lenient, seed);
    r.n_atoms = p.source.size();
    r.geometric_condition = p.gc.ok;
    r.violating_mass = p.gc.violating_source_mass + p.gc.violating_target_mass;
    double budget = std::min(p.F.total(), p.B.total());
    r.s = sup_pair_sum(p.F, p.B, budget).value;
    r.s_star = macro_star(p.F, p.B);
    for (double e : s.numerics.eps_list)
        if (e < budget) r.s_eps.push_back({e, sup_pair_sum(p.F, p.B, budget - e).value});
    r.t0_sorted = p.t0;
    r.t1_sorted = p.t1;
    std::sort(r.t0_sorted.begin(), r.t0_sorted.end());
    std::sort(r.t1_sorted.begin(), r.t1_sorted.end(), std::greater<>());
    if (s.mu0.is_atoms() && s.mu1.is_atoms() && s.mu0.atoms->size() == s.mu1.atoms->size() && p.gc.ok) {
        MicroInfimum m = micro_infimum(s.field, s.region, *s.mu0.atoms, *s.mu1.atoms, cfg);
        r.m_e = m.m_e;
        r.m_a = m.m_a;
        r.m_star_e = m.m_star_e;
        r.m_star_a = m.m_star_a;
        r.tangency = m.tangency;
    }
    return r;
}

inline double default_dilation(const Scenario& s) { return 0.05 * s.domain().diameter(); }

inline std::optional<NoncontrollabilityCertificate> certify_scenario(const Scenario& s, double T, bool lenient, std::uint64_t seed = 42,
                                                                     std::optional<double> dilation = std::nullopt) {
    ScenarioProfiles p = build_profiles(s, lenient, seed);
    if (!p.gc.ok) throw ValidationError("certificates need the geometric condition on every atom");
    return noncontrollability_certificate(p.F, p.B, p.target, s.field, s.region, T, dilation.value_or(default_dilation(s)),
                                          flow_config(s));
}

inline Mesh scenario_mesh(const MeasureInput& m, int n) {
    if (m.atoms) return build_fitted_mesh(CloudMeasure(*m.atoms), n);
    return build_fitted_mesh(*m.density, n);
}

struct ScenarioRun {
    std::optional<Mesh> mesh0, mesh1;
    std::optional<MacroSynthesis> macro;
    std::optional<MicroSynthesis> micro;
    ControlField control;
    ParticleCloud source, target;
    SimulationResult sim;
    RunReport report;
    double infimum = 0.0;
};

// Synthesizes a control for horizon T and simulates the source cloud under it.
inline ScenarioRun run_scenario(const Scenario& s, double T, bool lenient, std::uint64_t seed = 42, const MacroOptions* macro_opt = nullptr) {
    const FlowConfig cfg = flow_config(s);
    ScenarioRun run;
    const bool micro = s.mu0.is_atoms() && s.mu1.is_atoms() && s.mu0.atoms->size() == s.mu1.atoms->size();
    if (micro) {
        run.micro = synthesize_micro(*s.mu0.atoms, *s.mu1.atoms, T, s.control.delta, s.field, s.region, cfg, s.control.gain_cap);
        run.infimum = run.micro->infimum.m_e;
        run.control = run.micro->control;
        run.source = *s.mu0.atoms;
        run.target = *s.mu1.atoms;
    } else {
        ScenarioProfiles p = build_profiles(s, lenient, seed);
        run.infimum = sup_pair_sum(p.F, p.B, std::min(p.F.total(), p.B.total())).value;
        if (!(T > run.infimum))
            throw InfeasibleTimeError("T = " + std::to_string(T) + " does not exceed the infimum time S = " + std::to_string(run.infimum),
                                      run.infimum);
        run.mesh0 = scenario_mesh(s.mu0, s.numerics.mesh_n);
        run.mesh1 = scenario_mesh(s.mu1, s.numerics.mesh_n);
        MacroOptions opt = macro_opt ? *macro_opt : MacroOptions{};
        if (!macro_opt) {
            opt.delta = s.control.delta;
            opt.epsilon = s.control.epsilon;
            opt.gain_cap = s.control.gain_cap;
        }
        run.macro = synthesize_macro(*run.mesh0, *run.mesh1, T, s.field, s.region, cfg, opt);
        run.control = run.macro->control;
        run.source = std::move(p.source);
        run.target = std::move(p.target);
    }
    SimulationOptions so;
    so.snapshot_times = s.control.snapshots.empty() ? std::vector<double>{0.0, T / 3, 2 * T / 3, T} : s.control.snapshots;
    so.snapshot_times.erase(std::remove_if(so.snapshot_times.begin(), so.snapshot_times.end(), [&](double t) { return t < 0 || t > T; }),
                            so.snapshot_times.end());
    if (so.snapshot_times.empty() || so.snapshot_times.back() != T) so.snapshot_times.push_back(T);
    Box domain = s.domain();
    so.density_domain = domain;
    so.density_resolution = resolution_for(domain, s.density_spacing());
    run.sim = simulate(run.source, run.control, T, cfg, so);
    DiagnosticsOptions d;
    d.domain = domain;
    d.h = s.density_spacing();
    d.w1_atoms = s.numerics.w1_atoms;
    d.seed = seed;
    run.report = track_diagnostics(run.sim, run.target, d);
    return run;
}

}  // namespace crowdctl
