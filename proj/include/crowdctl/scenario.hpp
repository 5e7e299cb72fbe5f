#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "field.hpp"
#include "measures.hpp"
#include "region.hpp"

namespace crowdctl {

using json = nlohmann::json;

// Validation failure anchored to a line of the scenario file.
struct ScenarioError : ValidationError {
    std::size_t line;
    ScenarioError(const std::string& where, std::size_t l, const std::string& msg)
        : ValidationError(where + ":" + std::to_string(l) + ": " + msg), line(l) {}
};

// A measure given either as box densities or as an explicit atom list.
struct MeasureInput {
    std::optional<BoxDensitySpec> density;
    std::optional<ParticleCloud> atoms;

    bool is_atoms() const { return atoms.has_value(); }
    double total_mass() const { return atoms ? atoms->total_mass() : density->total_mass(); }
    Box support_bbox() const { return atoms ? bounding_box(atoms->points()) : density->support_bbox(); }
    ParticleCloud cloud(std::size_t n, SamplingMode mode = SamplingMode::Stratified, std::uint64_t seed = 42) const {
        return atoms ? *atoms : sample_density(*density, n, mode, seed);
    }
};

struct Scenario {
    std::string name;
    int dim = 0;
    VectorField field;
    ControlRegion region;
    MeasureInput mu0, mu1;

    struct Numerics {
        double dt = 1e-3;
        double horizon = 50.0;
        std::size_t n_atoms = 2000;
        int mesh_n = 3;
        std::size_t m_grid = 1000;
        std::vector<double> eps_list;
        double density_h = 0.0;  // 0 selects 0.05 in 1D and 0.1 otherwise
        std::size_t w1_atoms = 500;
    } numerics;

    struct Control {
        std::optional<double> T;
        double delta = 0.1;
        double epsilon = 0.0;
        double gain_cap = 1e6;
        std::vector<double> snapshots;
    } control;

    double density_spacing() const { return numerics.density_h > 0 ? numerics.density_h : (dim == 1 ? 0.05 : 0.1); }

    // Box spanning both supports and the control region.
    Box domain() const {
        Box b = bounding_union(mu0.support_bbox(), mu1.support_bbox());
        return bounding_union(b, region.bounding_box());
    }
};

namespace detail {

class ScenarioReader {
public:
    ScenarioReader(std::string text, std::string where) : text_(std::move(text)), where_(std::move(where)) {}

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
        throw ScenarioError(where_, locate(path), msg);
    }

    json parse() const {
        try {
            return json::parse(text_);
        } catch (const json::parse_error& e) {
            std::size_t line = 1;
            for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text_.size()); ++i)
                if (text_[i] == '\n') ++line;
            throw ScenarioError(where_, line, "malformed JSON");
        }
    }

    const json& require(const json& obj, const std::string& key, const std::vector<std::string>& path) const {
        if (!obj.is_object() || !obj.contains(key)) fail(path, "missing field '" + key + "'");
        return obj.at(key);
    }

    double number(const json& j, const std::vector<std::string>& path) const {
        if (!j.is_number()) fail(path, "expected a number");
        return j.get<double>();
    }

    Point point(const json& j, int dim, const std::vector<std::string>& path) const {
        if (!j.is_array() || static_cast<int>(j.size()) != dim) fail(path, "expected an array of " + std::to_string(dim) + " numbers");
        Point p(dim);
        for (int i = 0; i < dim; ++i) p[i] = number(j[static_cast<std::size_t>(i)], path);
        return p;
    }

private:
    std::string text_, where_;

    // Line of the last key of `path`, searched in order from the previous key.
    std::size_t locate(const std::vector<std::string>& path) const {
        std::size_t pos = 0, found = std::string::npos;
        for (const auto& key : path) {
            std::size_t at = text_.find("\"" + key + "\"", pos);
            if (at == std::string::npos) break;
            found = at;
            pos = at + key.size() + 2;
        }
        if (found == std::string::npos) return 1;
        return static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(found), '\n')) + 1;
    }
};

inline MeasureInput read_measure(const ScenarioReader& rd, const json& j, int dim, const std::string& key) {
    MeasureInput m;
    std::optional<double> stated;
    if (j.contains("total_mass")) stated = rd.number(j["total_mass"], {key, "total_mass"});
    if (j.contains("boxes")) {
        const json& bs = j["boxes"];
        if (!bs.is_array() || bs.empty()) rd.fail({key, "boxes"}, "expected a nonempty array of boxes");
        std::vector<DensityBox> comps;
        for (const auto& b : bs) {
            Point lo = rd.point(rd.require(b, "lo", {key, "boxes"}), dim, {key, "boxes", "lo"});
            Point hi = rd.point(rd.require(b, "hi", {key, "boxes"}), dim, {key, "boxes", "hi"});
            double d = rd.number(rd.require(b, "density", {key, "boxes"}), {key, "boxes", "density"});
            comps.push_back({Box(lo, hi), d});
        }
        try {
            m.density = BoxDensitySpec(dim, std::move(comps), stated);
        } catch (const ValidationError& e) {
            rd.fail({key, "boxes"}, e.what());
        }
    } else if (j.contains("atoms")) {
        const json& as = j["atoms"];
        if (!as.is_array() || as.empty()) rd.fail({key, "atoms"}, "expected a nonempty array of points");
        std::vector<Point> pts;
        for (const auto& a : as) pts.push_back(rd.point(a, dim, {key, "atoms"}));
        std::vector<double> w;
        if (j.contains("weights")) {
            if (!j["weights"].is_array() || j["weights"].size() != pts.size()) rd.fail({key, "weights"}, "weights must match the atom count");
            for (const auto& x : j["weights"]) w.push_back(rd.number(x, {key, "weights"}));
        } else {
            w.assign(pts.size(), stated.value_or(1.0) / static_cast<double>(pts.size()));
        }
        try {
            m.atoms = ParticleCloud(dim, std::move(pts), std::move(w));
        } catch (const ValidationError& e) {
            rd.fail({key, "atoms"}, e.what());
        }
        if (stated && std::abs(m.atoms->total_mass() - *stated) > 1e-9 * std::max(1.0, *stated))
            rd.fail({key, "total_mass"}, "atom weights do not sum to the stated total");
    } else {
        rd.fail({key}, "measure needs 'boxes' or 'atoms'");
    }
    if (!(m.total_mass() > 0)) rd.fail({key}, "measure has zero mass");
    return m;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& where = "scenario") {
    detail::ScenarioReader rd(text, where);
    json j = rd.parse();
    if (!j.is_object()) rd.fail({}, "scenario must be a JSON object");
    Scenario s;
    s.name = j.value("name", where);
    const json& d = rd.require(j, "dimension", {"dimension"});
    if (!d.is_number_integer() || d.get<int>() < 1 || d.get<int>() > 3) rd.fail({"dimension"}, "dimension must be 1, 2 or 3");
    s.dim = d.get<int>();

    const json& f = rd.require(j, "field", {"field"});
    std::string kind = f.value("kind", "");
    try {
        if (kind == "constant") {
            s.field = VectorField::constant(rd.point(rd.require(f, "value", {"field"}), s.dim, {"field", "value"}));
        } else if (kind == "rotation") {
            if (s.dim != 2) rd.fail({"field", "kind"}, "rotation field needs dimension 2");
            s.field = VectorField::rotation(f.contains("rate") ? rd.number(f["rate"], {"field", "rate"}) : 1.0);
        } else if (kind == "expression") {
            const json& c = rd.require(f, "components", {"field"});
            std::string txt;
            if (c.is_string()) txt = c.get<std::string>();
            else if (c.is_array()) {
                for (std::size_t i = 0; i < c.size(); ++i) {
                    if (!c[i].is_string()) rd.fail({"field", "components"}, "components must be strings");
                    txt += (i ? "," : "") + c[i].get<std::string>();
                }
            } else rd.fail({"field", "components"}, "components must be a string or an array of strings");
            s.field = VectorField::parse(txt, s.dim);
        } else {
            rd.fail({"field", "kind"}, "field kind must be constant, rotation or expression");
        }
    } catch (const ScenarioError&) {
        throw;
    } catch (const ValidationError& e) {
        rd.fail({"field"}, e.what());
    }

    const json& r = rd.require(j, "region", {"region"});
    std::string shape = r.value("shape", "");
    try {
        if (shape == "box") {
            s.region = ControlRegion(Box(rd.point(rd.require(r, "lo", {"region"}), s.dim, {"region", "lo"}),
                                         rd.point(rd.require(r, "hi", {"region"}), s.dim, {"region", "hi"})));
        } else if (shape == "ball") {
            s.region = ControlRegion::ball(rd.point(rd.require(r, "center", {"region"}), s.dim, {"region", "center"}),
                                           rd.number(rd.require(r, "radius", {"region"}), {"region", "radius"}));
        } else if (shape == "polygon") {
            if (s.dim != 2) rd.fail({"region", "shape"}, "polygon region needs dimension 2");
            std::vector<Point> vs;
            for (const auto& p : rd.require(r, "vertices", {"region"})) vs.push_back(rd.point(p, 2, {"region", "vertices"}));
            s.region = ControlRegion::polygon(std::move(vs));
        } else {
            rd.fail({"region", "shape"}, "region shape must be box, ball or polygon");
        }
    } catch (const ScenarioError&) {
        throw;
    } catch (const ValidationError& e) {
        rd.fail({"region"}, e.what());
    }
    if (s.region.empty()) rd.fail({"region"}, "control region is empty");

    s.mu0 = detail::read_measure(rd, rd.require(j, "mu0", {"mu0"}), s.dim, "mu0");
    s.mu1 = detail::read_measure(rd, rd.require(j, "mu1", {"mu1"}), s.dim, "mu1");
    double m0 = s.mu0.total_mass(), m1 = s.mu1.total_mass();
    if (std::abs(m0 - m1) > 1e-9 * std::max({1.0, m0, m1}))
        rd.fail({"mu1"}, "mu0 and mu1 have different total masses (" + std::to_string(m0) + " vs " + std::to_string(m1) + ")");

    if (j.contains("numerics")) {
        const json& n = j["numerics"];
        auto num = [&](const char* key, auto& dst, bool positive) {
            if (!n.contains(key)) return;
            double x = rd.number(n[key], {"numerics", key});
            if (positive && !(x > 0)) rd.fail({"numerics", key}, std::string(key) + " must be positive");
            using T = std::decay_t<decltype(dst)>;
            if constexpr (std::is_integral_v<T>) {
                if (x != std::floor(x)) rd.fail({"numerics", key}, std::string(key) + " must be an integer");
                dst = static_cast<T>(x);
            } else {
                dst = x;
            }
        };
        num("dt", s.numerics.dt, true);
        num("horizon", s.numerics.horizon, true);
        num("n_atoms", s.numerics.n_atoms, true);
        num("mesh_n", s.numerics.mesh_n, true);
        num("m_grid", s.numerics.m_grid, true);
        num("density_h", s.numerics.density_h, true);
        num("w1_atoms", s.numerics.w1_atoms, true);
        if (n.contains("eps_list")) {
            if (!n["eps_list"].is_array()) rd.fail({"numerics", "eps_list"}, "eps_list must be an array");
            for (const auto& e : n["eps_list"]) {
                double x = rd.number(e, {"numerics", "eps_list"});
                if (x < 0 || x >= m0) rd.fail({"numerics", "eps_list"}, "each epsilon must lie in [0, total mass)");
                s.numerics.eps_list.push_back(x);
            }
        }
    }
    if (j.contains("control")) {
        const json& c = j["control"];
        if (c.contains("T")) {
            double T = rd.number(c["T"], {"control", "T"});
            if (!(T > 0)) rd.fail({"control", "T"}, "T must be positive");
            if (T > s.numerics.horizon) rd.fail({"control", "T"}, "T exceeds the flow horizon");
            s.control.T = T;
        }
        if (c.contains("delta")) {
            s.control.delta = rd.number(c["delta"], {"control", "delta"});
            if (!(s.control.delta > 0)) rd.fail({"control", "delta"}, "delta must be positive");
        }
        if (c.contains("epsilon")) {
            s.control.epsilon = rd.number(c["epsilon"], {"control", "epsilon"});
            if (s.control.epsilon < 0) rd.fail({"control", "epsilon"}, "epsilon must be nonnegative");
        }
        if (c.contains("gain_cap")) {
            s.control.gain_cap = rd.number(c["gain_cap"], {"control", "gain_cap"});
            if (!(s.control.gain_cap > 0)) rd.fail({"control", "gain_cap"}, "gain_cap must be positive");
        }
        if (c.contains("snapshots")) {
            for (const auto& t : c["snapshots"]) s.control.snapshots.push_back(rd.number(t, {"control", "snapshots"}));
        }
    }
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

// The four bundled scenarios.
inline std::vector<std::pair<std::string, json>> bundled_scenarios() {
    auto box = [](std::vector<double> lo, std::vector<double> hi, double dens) { return json{{"lo", lo}, {"hi", hi}, {"density", dens}}; };
    json ex1 = {
        {"name", "example1"},
        {"dimension", 1},
        {"field", {{"kind", "constant"}, {"value", {1.0}}}},
        {"region", {{"shape", "box"}, {"lo", {5.0}}, {"hi", {6.0}}}},
        {"mu0", {{"boxes", {box({0}, {2}, 0.5)}}}},
        {"mu1", {{"boxes", {box({7}, {8}, 0.5), box({10}, {11}, 0.5)}}}},
        {"numerics", {{"dt", 1e-3}, {"horizon", 50}, {"n_atoms", 2000}, {"mesh_n", 4}, {"eps_list", {0.05, 0.1, 0.2}}}},
        {"control", {{"T", 8.1}, {"delta", 0.1}, {"epsilon", 0.0}, {"gain_cap", 1e6}, {"snapshots", {0.0, 3.4, 4.6, 8.1}}}},
    };
    json ex2 = {
        {"name", "example2"},
        {"dimension", 2},
        {"field", {{"kind", "constant"}, {"value", {1.0, 0.0}}}},
        {"region", {{"shape", "box"}, {"lo", {5.0, 0.0}}, {"hi", {7.0, 4.0}}}},
        {"mu0", {{"boxes", {box({0, 1}, {4, 3}, 0.125)}}}},
        {"mu1",
         {{"boxes",
           {box({8, 0}, {9, 4}, 0.0625), box({13, 0}, {14, 4}, 0.0625), box({9, 0}, {13, 1}, 0.0625), box({9, 3}, {13, 4}, 0.0625)}}}},
        {"numerics", {{"dt", 1e-3}, {"horizon", 50}, {"n_atoms", 2000}, {"mesh_n", 3}, {"eps_list", {0.05, 0.1, 0.2}}}},
        {"control", {{"T", 9.0}, {"delta", 1.0}, {"epsilon", 0.0}, {"gain_cap", 1e6}, {"snapshots", {0.0, 3.0, 6.0, 9.0}}}},
    };
    const double s = std::sqrt(0.5);
    json left = {
        {"name", "fig8_left"},
        {"dimension", 2},
        {"field", {{"kind", "constant"}, {"value", {1.0, 0.0}}}},
        {"region", {{"shape", "box"}, {"lo", {-1.0, -1.5}}, {"hi", {1.0, 1.5}}}},
        {"mu0", {{"atoms", {{-2.0, 0.0}}}}},
        {"mu1", {{"atoms", {{2.0, 0.0}}}}},
        {"control", {{"T", 2.5}, {"delta", 0.1}}},
    };
    json right = {
        {"name", "fig8_right"},
        {"dimension", 2},
        {"field", {{"kind", "expression"}, {"components", "-x2, x1"}}},
        {"region", {{"shape", "box"}, {"lo", {-2.0, -1.5}}, {"hi", {0.0, 1.5}}}},
        {"mu0", {{"atoms", {{s, -s}}}}},
        {"mu1", {{"atoms", {{s, s}}}}},
        {"control", {{"T", 5.0}, {"delta", 0.1}}},
    };
    return {{"example1.json", ex1}, {"example2.json", ex2}, {"fig8_left.json", left}, {"fig8_right.json", right}};
}

}  // namespace crowdctl
