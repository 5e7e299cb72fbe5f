#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "flow.hpp"
#include "measures.hpp"

namespace crowdctl {

inline std::vector<double> entry_times(const VectorField& v, const ControlRegion& omega, const std::vector<Point>& pts, Direction dir,
                                       Closure closure = Closure::Open, const FlowConfig& cfg = {}) {
    std::vector<double> t(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) t[i] = entry_time(v, omega, pts[i], dir, closure, cfg);
    return t;
}

struct GeometricConditionReport {
    bool ok = true;
    std::vector<std::size_t> violating_source, violating_target;
    double violating_source_mass = 0.0, violating_target_mass = 0.0;
};

// Every source atom must reach omega forward and every target atom backward within the horizon.
inline GeometricConditionReport check_geometric_condition(const std::vector<double>& t0, const ParticleCloud& mu0,
                                                          const std::vector<double>& t1, const ParticleCloud& mu1) {
    GeometricConditionReport r;
    for (std::size_t i = 0; i < t0.size(); ++i)
        if (!std::isfinite(t0[i])) { r.violating_source.push_back(i); r.violating_source_mass += mu0.weight(i); }
    for (std::size_t j = 0; j < t1.size(); ++j)
        if (!std::isfinite(t1[j])) { r.violating_target.push_back(j); r.violating_target_mass += mu1.weight(j); }
    r.ok = r.violating_source.empty() && r.violating_target.empty();
    return r;
}

// max_i (t0_i + t1_i) with t0 sorted ascending and t1 sorted descending.
inline double sorted_pair_max(std::vector<double> t0, std::vector<double> t1) {
    if (t0.size() != t1.size()) throw ValidationError("entry-time lists differ in length");
    std::sort(t0.begin(), t0.end());
    std::sort(t1.begin(), t1.end(), std::greater<>());
    double m = 0.0;
    for (std::size_t i = 0; i < t0.size(); ++i) m = std::max(m, t0[i] + t1[i]);
    return m;
}

// Same pairing with the R largest source times and R largest target times left out.
inline double up_to_mass_time(std::vector<double> t0, std::vector<double> t1, std::size_t R) {
    if (t0.size() != t1.size()) throw ValidationError("entry-time lists differ in length");
    std::size_t n = t0.size();
    if (R >= n) throw ValidationError("number of dropped atoms must be below the atom count");
    std::sort(t0.begin(), t0.end());
    std::sort(t1.begin(), t1.end(), std::greater<>());
    double m = 0.0;
    for (std::size_t i = 0; i + R < n; ++i) m = std::max(m, t0[i] + t1[i + R]);
    return m;
}

inline std::size_t dropped_count(std::size_t n, double eps, double gamma) {
    if (eps < 0) throw ValidationError("epsilon must be nonnegative");
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * eps / gamma + 1e-9));
}

struct MicroInfimum {
    double m_e = 0.0, m_a = 0.0, m_star_e = 0.0, m_star_a = 0.0;
    std::vector<double> t0, t1, t1_closed;  // per atom, input order
    bool tangency = false;                  // open and closed backward times differ somewhere
};

inline MicroInfimum micro_infimum(const VectorField& v, const ControlRegion& omega, const ParticleCloud& x0, const ParticleCloud& x1,
                                  const FlowConfig& cfg = {}) {
    if (x0.size() != x1.size()) throw ValidationError("configurations have different sizes");
    if (x0.size() == 0) throw ValidationError("configurations are empty");
    for (const auto* c : {&x0, &x1})
        for (std::size_t i = 0; i < c->size(); ++i)
            for (std::size_t j = i + 1; j < c->size(); ++j)
                if (c->point(i) == c->point(j)) throw ValidationError("configuration points must be distinct");
    MicroInfimum r;
    r.t0 = entry_times(v, omega, x0.points(), Direction::Forward, Closure::Open, cfg);
    r.t1 = entry_times(v, omega, x1.points(), Direction::Backward, Closure::Open, cfg);
    r.t1_closed = entry_times(v, omega, x1.points(), Direction::Backward, Closure::Closed, cfg);
    auto gc = check_geometric_condition(r.t0, x0, r.t1, x1);
    if (!gc.ok) {
        std::vector<std::size_t> idx = gc.violating_source;
        for (auto j : gc.violating_target) idx.push_back(x0.size() + j);
        throw GeometricConditionError("geometric condition fails for " + std::to_string(idx.size()) + " atom(s)", idx);
    }
    r.m_e = sorted_pair_max(r.t0, r.t1);
    r.m_a = sorted_pair_max(r.t0, r.t1_closed);
    for (double t : r.t0) { r.m_star_e = std::max(r.m_star_e, t); r.m_star_a = std::max(r.m_star_a, t); }
    for (double t : r.t1) r.m_star_e = std::max(r.m_star_e, t);
    for (double t : r.t1_closed) r.m_star_a = std::max(r.m_star_a, t);
    double tol = 2 * cfg.dt * 1e-3;
    for (std::size_t i = 0; i < r.t1.size(); ++i)
        if (r.t1[i] - r.t1_closed[i] > tol) r.tangency = true;
    return r;
}

// Right-continuous step function t -> mass of atoms with entry time <= t.
class MassProfile {
public:
    struct Step {
        double time;
        double cumulative;
    };

    static MassProfile from_times(const std::vector<double>& times, const std::vector<double>& weights) {
        if (times.size() != weights.size()) throw ValidationError("profile times and weights differ in length");
        std::vector<std::pair<double, double>> tw;
        MassProfile p;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (std::isfinite(times[i])) tw.push_back({times[i], weights[i]});
            else p.violating_ += weights[i];
        }
        std::sort(tw.begin(), tw.end());
        double acc = 0.0;
        for (const auto& [t, w] : tw) {
            acc += w;
            if (!p.steps_.empty() && p.steps_.back().time == t) p.steps_.back().cumulative = acc;
            else p.steps_.push_back({t, acc});
        }
        p.total_ = acc;
        return p;
    }

    double total() const { return total_; }
    double violating_mass() const { return violating_; }
    const std::vector<Step>& steps() const { return steps_; }
    double max_time() const { return steps_.empty() ? 0.0 : steps_.back().time; }

    double value(double t) const {
        auto it = std::upper_bound(steps_.begin(), steps_.end(), t, [](double x, const Step& s) { return x < s.time; });
        return it == steps_.begin() ? 0.0 : std::prev(it)->cumulative;
    }

    // inf { t >= 0 : value(t) >= m }
    double inverse(double m) const {
        double tol = 1e-12 * std::max(1.0, total_);
        if (m > total_ + tol) throw ValidationError("mass level exceeds the profile total");
        if (m <= 0) return 0.0;
        auto it = std::lower_bound(steps_.begin(), steps_.end(), m - tol, [](const Step& s, double x) { return s.cumulative < x; });
        return it == steps_.end() ? steps_.back().time : it->time;
    }

private:
    std::vector<Step> steps_;
    double total_ = 0.0;
    double violating_ = 0.0;
};

struct PairSum {
    double value = 0.0;
    std::size_t forward_step = 0, backward_step = 0;
};

// sup over m in [0, budget] of F^-1(m) + B^-1(budget - m), by scanning the step pairs
// whose level intervals intersect.
inline PairSum sup_pair_sum(const MassProfile& F, const MassProfile& B, double budget) {
    const auto& f = F.steps();
    const auto& b = B.steps();
    PairSum best;
    if (f.empty() || b.empty() || budget <= 0) return best;
    double tol = 1e-10 * std::max(1.0, budget);
    for (std::size_t k = 0; k < f.size(); ++k) {
        double ck_prev = k ? f[k - 1].cumulative : 0.0;
        double X = budget - tol - ck_prev;
        if (X <= 0) break;
        // largest j with d_{j-1} < X
        std::size_t lo = 0, hi = b.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi + 1) / 2;
            if (b[mid - 1].cumulative < X) lo = mid;
            else hi = mid - 1;
        }
        double s = f[k].time + b[lo].time;
        if (s > best.value || (k == 0 && lo == 0 && best.value == 0.0)) best = {s, k, lo};
    }
    return best;
}

inline void require_equal_totals(const MassProfile& F, const MassProfile& B) {
    if (std::abs(F.total() - B.total()) > 1e-9 * std::max({1.0, F.total(), B.total()}))
        throw ValidationError("forward and backward profiles carry different total mass");
}

// S = sup_m F^-1(m) + B^-1(gamma - m)
inline double macro_infimum(const MassProfile& F, const MassProfile& B) {
    require_equal_totals(F, B);
    return sup_pair_sum(F, B, F.total()).value;
}

// S* = largest finite entry time on either side.
inline double macro_star(const MassProfile& F, const MassProfile& B) { return std::max(F.max_time(), B.max_time()); }

// S_eps: the same supremum with eps of mass allowed to stay behind.
inline double macro_infimum_eps(const MassProfile& F, const MassProfile& B, double eps) {
    require_equal_totals(F, B);
    if (eps < 0 || eps >= F.total()) throw ValidationError("epsilon must lie in [0, total mass)");
    return sup_pair_sum(F, B, F.total() - eps).value;
}

struct NoncontrollabilityCertificate {
    double m_level = 0.0;     // mass level m
    double t_bar = 0.0;       // F^-1(m)
    double tau = 0.0;         // T - t_bar
    double dilation = 0.0;    // D
    double mass_late = 0.0;   // source mass entering after t_bar
    double near_target = 0.0; // over-count of target mass within D of the evoluted set
    double spatial_tolerance = 0.0;
    double lower_bound = 0.0; // D * (mass_late - near_target)
};

// Lower bound on W1(mu(T), mu1) valid for every control supported in omega, or nullopt when
// no positive bound arises. Requires T > S*.
inline std::optional<NoncontrollabilityCertificate> noncontrollability_certificate(
    const MassProfile& F, const MassProfile& B, const ParticleCloud& target, const VectorField& v, const ControlRegion& omega,
    double T, double dilation, const FlowConfig& cfg = {}, double boundary_spacing = 0.05) {
    require_equal_totals(F, B);
    double s_star = macro_star(F, B);
    if (T <= s_star) throw CertificateNotApplicable("T does not exceed S* = " + std::to_string(s_star));
    if (!(dilation > 0)) throw ValidationError("dilation margin must be positive");
    const double gamma = F.total();
    const auto& f = F.steps();
    const auto& b = B.steps();
    double tol = 1e-10 * std::max(1.0, gamma);

    struct Candidate {
        std::size_t k;
        double level;
    };
    std::vector<Candidate> cands;
    for (std::size_t k = 0; k < f.size(); ++k) {
        double ck_prev = k ? f[k - 1].cumulative : 0.0;
        double X = gamma - tol - ck_prev;
        if (X <= 0) break;
        std::size_t lo = 0, hi = b.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi + 1) / 2;
            if (b[mid - 1].cumulative < X) lo = mid;
            else hi = mid - 1;
        }
        if (f[k].time + b[lo].time > T) cands.push_back({k, std::max(ck_prev, gamma - b[lo].cumulative)});
    }
    if (cands.empty()) return std::nullopt;

    double tau_max = 0.0;
    for (const auto& c : cands) tau_max = std::max(tau_max, T - f[c.k].time);
    EvolutedSet E(v, omega, tau_max, cfg, boundary_spacing);
    const double reach = dilation + E.spatial_tolerance();

    // Activation time per target atom: smallest tau at which it may lie within D of omega^tau.
    std::vector<double> act(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) {
        double t1 = entry_time(v, omega, target.point(j), Direction::Backward, Closure::Open, cfg);
        act[j] = std::min(t1, E.min_sample_time_within(target.point(j), reach));
    }

    std::optional<NoncontrollabilityCertificate> best;
    for (const auto& c : cands) {
        double t_bar = f[c.k].time;
        double tau = T - t_bar;
        double q = 0.0;
        for (std::size_t j = 0; j < target.size(); ++j)
            if (act[j] <= tau) q += target.weight(j);
        double late = gamma - f[c.k].cumulative;
        double bound = dilation * (late - q);
        if (bound > 0 && (!best || bound > best->lower_bound))
            best = NoncontrollabilityCertificate{c.level, t_bar, tau, dilation, late, q, E.spatial_tolerance(), bound};
    }
    return best;
}

}  // namespace crowdctl
