#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "crowdctl/crowdctl.hpp"

namespace crowdctl::cli {

enum ExitCode : int { Ok = 0, Other = 1, Validation = 2, Geometric = 3, InfeasibleTime = 4, NotApplicable = 5 };

struct GlobalFlags {
    std::optional<double> dt;
    std::optional<std::size_t> atoms;
    std::uint64_t seed = 42;
    bool lenient = false;
    std::string out;
};

inline std::string time_label(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

template <class Fn>
void write_stream(const std::filesystem::path& p, Fn&& fn) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    fn(f);
}

inline Scenario load(const std::string& path, const GlobalFlags& g) {
    Scenario s = load_scenario(path);
    if (g.dt) {
        if (!(*g.dt > 0)) throw ValidationError("--dt must be positive");
        s.numerics.dt = *g.dt;
    }
    if (g.atoms) {
        if (*g.atoms == 0) throw ValidationError("--atoms must be positive");
        s.numerics.n_atoms = *g.atoms;
    }
    return s;
}

inline double horizon_of(const Scenario& s, std::optional<double> T) {
    if (T) {
        if (!(*T > 0)) throw ValidationError("--T must be positive");
        return *T;
    }
    if (!s.control.T) throw ValidationError("scenario has no control.T; pass --T");
    return *s.control.T;
}

// Reads {"costs": [[...]], "kind": "min-sum" | "bottleneck", "drop": R}; null or "inf" marks a forbidden pair.
inline json assign_matrix(const std::string& path, std::optional<std::string> kind, std::optional<std::size_t> drop) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open matrix file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    if (!j.contains("costs") || !j["costs"].is_array()) throw ValidationError(path + ": missing \"costs\" array");
    std::vector<std::vector<double>> rows;
    for (const auto& r : j["costs"]) {
        if (!r.is_array()) throw ValidationError(path + ": each cost row must be an array");
        std::vector<double> row;
        for (const auto& x : r) {
            if (x.is_null() || (x.is_string() && (x == "inf" || x == "Infinity"))) row.push_back(kInf);
            else if (x.is_number()) row.push_back(x.get<double>());
            else throw ValidationError(path + ": cost entries must be numbers, null or \"inf\"");
        }
        rows.push_back(std::move(row));
    }
    CostMatrix c(rows);
    std::string k = kind.value_or(j.value("kind", std::string("min-sum")));
    std::size_t R = drop.value_or(j.value("drop", std::size_t{0}));
    if (k != "min-sum" && k != "bottleneck") throw ValidationError("assignment kind must be min-sum or bottleneck");
    bool bottleneck = k == "bottleneck";
    Assignment a = R > 0 ? solve_partial(c, R, bottleneck) : bottleneck ? solve_bottleneck(c) : solve_min_sum(c);
    return to_json(a);
}

inline int cmd_mintime(const std::string& path, bool with_times, const GlobalFlags& g, std::ostream& out) {
    Scenario s = load(path, g);
    out << to_json(infimum_report(s, g.lenient, g.seed), with_times).dump(2) << "\n";
    return Ok;
}

inline int cmd_certify(const std::string& path, double T, std::optional<double> dilation, const GlobalFlags& g, std::ostream& out) {
    Scenario s = load(path, g);
    if (!(T > 0)) throw ValidationError("--T must be positive");
    auto cert = certify_scenario(s, T, g.lenient, g.seed, dilation);
    json j = {{"T", T}, {"certificate", cert ? to_json(*cert) : json(nullptr)}};
    out << j.dump(2) << "\n";
    return Ok;
}

inline std::filesystem::path out_dir(const GlobalFlags& g, const char* fallback) {
    std::filesystem::path dir = g.out.empty() ? std::filesystem::path(fallback) : std::filesystem::path(g.out);
    std::filesystem::create_directories(dir);
    return dir;
}

inline int cmd_simulate(const std::string& path, std::optional<double> T_opt, const GlobalFlags& g, std::ostream& out) {
    Scenario s = load(path, g);
    const double T = horizon_of(s, T_opt);
    ScenarioRun run = run_scenario(s, T, g.lenient, g.seed);
    auto dir = out_dir(g, "crowdctl_out");

    if (run.mesh0) write_stream(dir / "mesh0.csv", [&](std::ostream& f) { write_mesh_csv(*run.mesh0, f); });
    if (run.mesh1) write_stream(dir / "mesh1.csv", [&](std::ostream& f) { write_mesh_csv(*run.mesh1, f); });
    write_text(dir / "control.json", to_json(run.control).dump(2) + "\n");
    const Box domain = s.domain();
    const auto res = resolution_for(domain, s.density_spacing());
    json files = json::array();
    for (std::size_t k = 0; k < run.sim.snapshots.size(); ++k) {
        std::string label = time_label(run.sim.snapshot_times[k]);
        std::string cloud = "snapshot_t" + label + ".csv", dens = "density_t" + label + ".txt";
        write_stream(dir / cloud, [&](std::ostream& f) { write_cloud_csv(run.sim.snapshots[k], f); });
        write_stream(dir / dens, [&](std::ostream& f) { write_density_matrix(estimate_density(run.sim.snapshots[k], domain, res), f); });
        files.push_back({{"t", run.sim.snapshot_times[k]}, {"cloud", cloud}, {"density", dens}});
    }
    json report = {{"scenario", s.name}, {"T", T}, {"infimum", run.infimum}, {"run", to_json(run.report)}, {"snapshots", files}};
    if (run.macro) report["synthesis"] = to_json(*run.macro);
    if (run.micro) report["synthesis"] = to_json(*run.micro);
    write_text(dir / "run_report.json", report.dump(2) + "\n");

    json summary = {{"final_w1", run.report.final_w1}, {"peak_density", run.report.peak_density}, {"infimum", run.infimum},
                    {"out", dir.string()}};
    out << summary.dump(2) << "\n";
    return Ok;
}

inline int cmd_assign(const std::optional<std::string>& scenario, const std::optional<std::string>& matrix, std::optional<std::string> kind,
                      std::optional<std::size_t> drop, std::optional<double> T_opt, const GlobalFlags& g, std::ostream& out) {
    if (scenario.has_value() == matrix.has_value()) throw ValidationError("assign needs exactly one of a scenario path or --matrix");
    if (matrix) {
        out << assign_matrix(*matrix, kind, drop).dump(2) << "\n";
        return Ok;
    }
    Scenario s = load(*scenario, g);
    const double T = horizon_of(s, T_opt);
    const FlowConfig cfg = flow_config(s);
    json j;
    if (s.mu0.is_atoms() && s.mu1.is_atoms() && s.mu0.atoms->size() == s.mu1.atoms->size()) {
        auto m = synthesize_micro(*s.mu0.atoms, *s.mu1.atoms, T, s.control.delta, s.field, s.region, cfg, s.control.gain_cap);
        j = to_json(m);
    } else {
        MacroOptions opt;
        opt.delta = s.control.delta;
        opt.epsilon = s.control.epsilon;
        opt.gain_cap = s.control.gain_cap;
        auto m = synthesize_macro(scenario_mesh(s.mu0, s.numerics.mesh_n), scenario_mesh(s.mu1, s.numerics.mesh_n), T, s.field, s.region, cfg,
                                  opt);
        j = to_json(m);
        json pairs = json::array();
        for (const auto& p : m.plans) pairs.push_back({{"source", p.source}, {"target", p.target}, {"depart", p.depart}, {"arrive", p.arrive}});
        j["pairs"] = pairs;
    }
    out << j.dump(2) << "\n";
    return Ok;
}

inline int cmd_mesh(const std::string& path, std::optional<int> n_opt, const GlobalFlags& g, std::ostream& out) {
    Scenario s = load(path, g);
    int n = n_opt.value_or(s.numerics.mesh_n);
    if (n < 1) throw ValidationError("--n must be positive");
    Mesh m0 = scenario_mesh(s.mu0, n), m1 = scenario_mesh(s.mu1, n);
    auto dir = out_dir(g, "crowdctl_out");
    write_stream(dir / "mesh0.csv", [&](std::ostream& f) { write_mesh_csv(m0, f); });
    write_stream(dir / "mesh1.csv", [&](std::ostream& f) { write_mesh_csv(m1, f); });
    auto summary = [](const Mesh& m) {
        std::size_t zero = 0;
        for (const auto& c : m.cells) zero += c.zero_density_representative;
        return json{{"cells", m.cells.size()}, {"zero_density_representatives", zero}, {"bbox_lo", to_json(m.bbox.lo)}, {"bbox_hi", to_json(m.bbox.hi)}};
    };
    out << json{{"n", n}, {"mu0", summary(m0)}, {"mu1", summary(m1)}, {"out", dir.string()}}.dump(2) << "\n";
    return Ok;
}

inline int cmd_examples(const GlobalFlags& g, std::ostream& out) {
    auto dir = out_dir(g, ".");
    json names = json::array();
    for (const auto& [name, j] : bundled_scenarios()) {
        write_text(dir / name, j.dump(2) + "\n");
        names.push_back((dir / name).string());
    }
    out << json{{"written", names}}.dump(2) << "\n";
    return Ok;
}

// Runs the command line and maps library errors to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Localized control of crowd transport: infimum times, certificates, synthesis and simulation", "crowdctl"};
    app.require_subcommand(1);
    GlobalFlags g;
    double dt = 0.0;
    std::size_t atoms = 0;
    auto* dt_opt = app.add_option("--dt", dt, "Integrator step")->group("Global");
    auto* atoms_opt = app.add_option("--atoms", atoms, "Atoms sampled from density measures")->group("Global");
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str()->group("Global");
    app.add_flag("--lenient", g.lenient, "Report instead of rejecting mass that never reaches the control region")->group("Global");
    app.add_option("--out", g.out, "Output directory")->group("Global");
    app.fallthrough();

    std::string scenario;
    std::optional<std::string> assign_scenario, matrix, kind;
    std::optional<double> T, dilation;
    std::optional<std::size_t> drop;
    std::optional<int> mesh_n;
    bool with_times = false;

    auto* mintime = app.add_subcommand("mintime", "Infimum-time report");
    mintime->add_option("scenario", scenario, "Scenario JSON")->required();
    mintime->add_flag("--with-times", with_times, "Include the sorted entry times");

    auto* simulate = app.add_subcommand("simulate", "Synthesize a control and simulate the crowd");
    simulate->add_option("scenario", scenario, "Scenario JSON")->required();
    simulate->add_option("--T", T, "Horizon (defaults to control.T)");

    auto* certify = app.add_subcommand("certify", "Non-controllability certificate");
    certify->add_option("scenario", scenario, "Scenario JSON")->required();
    certify->add_option("--T", T, "Horizon")->required();
    certify->add_option("--dilation", dilation, "Spatial margin D (default 5% of the domain diameter)");

    auto* assign = app.add_subcommand("assign", "Pairing of a scenario or of an explicit cost matrix");
    assign->add_option("scenario", assign_scenario, "Scenario JSON");
    assign->add_option("--matrix", matrix, "Cost matrix JSON");
    assign->add_option("--kind", kind, "min-sum or bottleneck (matrix mode)");
    assign->add_option("--drop", drop, "Rows allowed to stay unmatched (matrix mode)");
    assign->add_option("--T", T, "Horizon (scenario mode, defaults to control.T)");

    auto* mesh = app.add_subcommand("mesh", "Mesh both measures and write the cells");
    mesh->add_option("scenario", scenario, "Scenario JSON")->required();
    mesh->add_option("--n", mesh_n, "Mesh parameter (defaults to numerics.mesh_n)");

    auto* examples = app.add_subcommand("examples", "Write the bundled example scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e_;
        int code = app.exit(e, o, e_);
        out << o.str();
        err << e_.str();
        return code == 0 ? Ok : Validation;
    }
    if (*dt_opt) g.dt = dt;
    if (*atoms_opt) g.atoms = atoms;

    try {
        if (*mintime) return cmd_mintime(scenario, with_times, g, out);
        if (*simulate) return cmd_simulate(scenario, T, g, out);
        if (*certify) return cmd_certify(scenario, *T, dilation, g, out);
        if (*assign) return cmd_assign(assign_scenario, matrix, kind, drop, T, g, out);
        if (*mesh) return cmd_mesh(scenario, mesh_n, g, out);
        if (*examples) return cmd_examples(g, out);
    } catch (const GeometricConditionError& e) {
        err << "error: " << e.what() << "\n";
        return Geometric;
    } catch (const InfeasibleTimeError& e) {
        err << "error: " << e.what() << "\n";
        return InfeasibleTime;
    } catch (const CertificateNotApplicable& e) {
        err << "error: " << e.what() << "\n";
        return NotApplicable;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return Validation;
    } catch (const HorizonError& e) {
        err << "error: " << e.what() << "\n";
        return Validation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return Other;
    }
    return Other;
}

}  // namespace crowdctl::cli
