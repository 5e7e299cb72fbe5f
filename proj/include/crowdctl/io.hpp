#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "assignment.hpp"
#include "control.hpp"
#include "mintime.hpp"
#include "simulator.hpp"
#include "synthesis.hpp"

namespace crowdctl {

using json = nlohmann::json;

struct InfimumTimeReport {
    std::optional<double> m_e, m_a, m_star_e, m_star_a;
    std::optional<double> s, s_star;
    std::vector<std::pair<double, double>> s_eps;
    std::vector<double> t0_sorted, t1_sorted;
    std::size_t n_atoms = 0;
    double dt = 0.0, horizon = 0.0;
    bool geometric_condition = true;
    double violating_mass = 0.0;
    bool tangency = false;
};

inline json to_json(const Point& p) { return p.to_vector(); }

inline json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

inline json to_json(const InfimumTimeReport& r, bool with_times = false) {
    json j;
    j["m_e"] = optional_number(r.m_e);
    j["m_a"] = optional_number(r.m_a);
    j["m_star_e"] = optional_number(r.m_star_e);
    j["m_star_a"] = optional_number(r.m_star_a);
    j["s"] = optional_number(r.s);
    j["s_star"] = optional_number(r.s_star);
    j["s_eps"] = json::array();
    for (const auto& [e, v] : r.s_eps) j["s_eps"].push_back({{"eps", e}, {"value", v}});
    j["discretization"] = {{"n_atoms", r.n_atoms}, {"dt", r.dt}, {"horizon", r.horizon}};
    j["geometric_condition"] = r.geometric_condition;
    j["violating_mass"] = r.violating_mass;
    j["tangency"] = r.tangency;
    if (with_times) {
        j["t0_sorted"] = r.t0_sorted;
        j["t1_sorted"] = r.t1_sorted;
    }
    return j;
}

inline json to_json(const Assignment& a) {
    return {{"sigma", a.sigma}, {"value", a.value}, {"kind", to_string(a.kind)}, {"dropped", a.dropped}};
}

inline json to_json(const ControlWindow& w) {
    json knots = json::array(), radii = json::array();
    for (std::size_t k = 0; k < w.knot_times.size(); ++k) knots.push_back({{"t", w.knot_times[k]}, {"center", to_json(w.centers[k])}});
    for (std::size_t k = 0; k < w.radius_times.size(); ++k)
        radii.push_back({{"t", w.radius_times[k]}, {"r", w.inner[k]}, {"R", w.outer[k]}});
    return {{"t_start", w.t_start}, {"t_end", w.t_end}, {"gain", w.gain}, {"source", w.source},
            {"target", w.target},   {"polyline", knots}, {"radii", radii}};
}

inline json to_json(const ControlField& cf) {
    json ws = json::array();
    for (const auto& w : cf.windows()) ws.push_back(to_json(w));
    return {{"windows", ws}, {"breakpoints", cf.breakpoints()}, {"sup_bound", cf.sup_bound()}, {"lipschitz_bound", cf.lipschitz_bound()}};
}

inline ControlWindow window_from_json(const json& j, int dim) {
    ControlWindow w;
    w.t_start = j.at("t_start").get<double>();
    w.t_end = j.at("t_end").get<double>();
    w.gain = j.at("gain").get<double>();
    w.source = j.value("source", -1);
    w.target = j.value("target", -1);
    for (const auto& k : j.at("polyline")) {
        w.knot_times.push_back(k.at("t").get<double>());
        auto c = k.at("center").get<std::vector<double>>();
        if (static_cast<int>(c.size()) != dim) throw ValidationError("control center has wrong dimension");
        w.centers.push_back(Point::from(c));
    }
    for (const auto& r : j.at("radii")) {
        w.radius_times.push_back(r.at("t").get<double>());
        w.inner.push_back(r.at("r").get<double>());
        w.outer.push_back(r.at("R").get<double>());
    }
    return w;
}

inline ControlField control_from_json(const json& j, const VectorField& v, const ControlRegion& omega) {
    std::vector<ControlWindow> ws;
    for (const auto& w : j.at("windows")) ws.push_back(window_from_json(w, omega.dim()));
    return ControlField(v, omega, std::move(ws));
}

inline json to_json(const RunReport& r, bool with_wall_time = true) {
    json j = {{"times", r.times},
              {"w1", r.w1},
              {"max_density", r.max_density},
              {"final_w1", r.final_w1},
              {"peak_density", r.peak_density},
              {"peak_density_time", r.peak_density_time},
              {"initial_mass", r.initial_mass},
              {"final_mass", r.final_mass},
              {"atoms", r.atoms},
              {"steps", r.steps}};
    if (with_wall_time) j["wall_seconds"] = r.wall_seconds;
    return j;
}

inline json to_json(const NoncontrollabilityCertificate& c) {
    return {{"m", c.m_level},     {"t_bar", c.t_bar},         {"tau", c.tau},
            {"D", c.dilation},     {"mass_late", c.mass_late}, {"q", c.near_target},
            {"spatial_tolerance", c.spatial_tolerance}, {"lower_bound", c.lower_bound}};
}

inline json to_json(const MacroSynthesis& m) {
    return {{"source_cells", m.source_cells},
            {"target_cells", m.target_cells},
            {"paired", m.plans.size()},
            {"dropped", m.dropped},
            {"R_dom", m.R_dom},
            {"erosion_in", m.erosion_in},
            {"erosion_out", m.erosion_out},
            {"s_representatives", m.s_representatives},
            {"m_eroded", m.m_eroded},
            {"delta_used", m.delta_used},
            {"gain", m.gain},
            {"disjointness_verified", m.disjointness_verified},
            {"capture_fraction", m.capture_fraction},
            {"catch_hold", m.catch_hold}};
}

inline json to_json(const MicroSynthesis& m) {
    json plans = json::array();
    for (const auto& p : m.plans)
        plans.push_back({{"source", p.source}, {"target", p.target}, {"t0", p.t0}, {"t1", p.t1}, {"s0", p.s0}, {"s1", p.s1},
                         {"y0", to_json(p.y0)}, {"y1", to_json(p.y1)}, {"depart", p.depart}, {"arrive", p.arrive}});
    return {{"plans", plans},           {"assignment", to_json(m.assignment)},
            {"delta_used", m.delta_used}, {"separation", std::isfinite(m.separation) ? json(m.separation) : json(nullptr)},
            {"gain", m.gain},           {"m_e", m.infimum.m_e}};
}

}  // namespace crowdctl
