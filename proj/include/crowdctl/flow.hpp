#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "geometry.hpp"
#include "region.hpp"

namespace crowdctl {

struct FlowConfig {
    double dt = 1e-3;
    double horizon = 50.0;

    void validate() const {
        if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
        if (!(horizon > 0) || !std::isfinite(horizon)) throw ValidationError("horizon must be positive");
    }
};

enum class Direction { Forward, Backward };
enum class Closure { Open, Closed };

inline constexpr double kBoundaryTol = 1e-9;

template <class F>
Point rk4_step(const F& f, const Point& x, double h) {
    Point k1 = f(x);
    Point k2 = f(x + (0.5 * h) * k1);
    Point k3 = f(x + (0.5 * h) * k2);
    Point k4 = f(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Phi_t(x); negative t integrates backward. Fixed steps of dt plus one remainder step.
inline Point integrate_flow(const VectorField& v, const Point& x, double t, const FlowConfig& cfg = {}) {
    if (std::abs(t) > cfg.horizon * (1 + 1e-12)) throw HorizonError("flow time exceeds the horizon");
    double sgn = t < 0 ? -1.0 : 1.0;
    double remaining = std::abs(t);
    auto steps = static_cast<long>(std::floor(remaining / cfg.dt));
    Point p = x;
    for (long k = 0; k < steps; ++k) p = rk4_step(v, p, sgn * cfg.dt);
    double rest = remaining - steps * cfg.dt;
    if (rest > 0) p = rk4_step(v, p, sgn * rest);
    return p;
}

inline bool region_member(const ControlRegion& omega, const Point& x, Closure c) {
    double sd = omega.signed_distance(x);
    return c == Closure::Open ? sd > 0 : sd >= -kBoundaryTol;
}

// First time the (forward or backward) trajectory of x meets omega; +inf if it does not
// within the horizon. Grid bracketing on dt, then bisection to dt * 1e-3.
inline double entry_time(const VectorField& v, const ControlRegion& omega, const Point& x, Direction dir,
                         Closure closure = Closure::Open, const FlowConfig& cfg = {}) {
    if (region_member(omega, x, closure)) return 0.0;
    const double sgn = dir == Direction::Forward ? 1.0 : -1.0;
    const double tol = cfg.dt * 1e-3;
    Point p = x;
    double t = 0.0;
    while (t < cfg.horizon) {
        double h = std::min(cfg.dt, cfg.horizon - t);
        Point q = rk4_step(v, p, sgn * h);
        if (region_member(omega, q, closure)) {
            double lo = 0.0, hi = h;
            while (hi - lo > tol) {
                double mid = 0.5 * (lo + hi);
                if (region_member(omega, rk4_step(v, p, sgn * mid), closure)) hi = mid;
                else lo = mid;
            }
            return t + hi;
        }
        p = q;
        t += h;
    }
    return kInf;
}

struct EvolutedSample {
    Point position;
    double time;
};

// omega^t = union over tau in (0, t) of Phi_tau(omega), represented by a backward
// membership march and by advected boundary samples for distance queries.
class EvolutedSet {
public:
    EvolutedSet(VectorField v, ControlRegion omega, double t, FlowConfig cfg, double boundary_spacing = 0.05)
        : v_(std::move(v)), omega_(std::move(omega)), t_(t), cfg_(cfg) {
        if (t < 0) throw ValidationError("evoluted-set time must be nonnegative");
        if (t > cfg.horizon) throw HorizonError("evoluted-set time exceeds the horizon");
        std::vector<Point> base = omega_.boundary_samples(boundary_spacing);
        int d = omega_.dim();
        double cover = d == 1 ? 0.0 : 0.5 * boundary_spacing * std::sqrt(static_cast<double>(d - 1)) * 1.01;

        Box sweep = omega_.bounding_box();
        // Layers every `layer` time units; intermediate positions drift by at most M * layer.
        FieldBounds pre = v_.bounds(sweep);
        layer_ = pre.sup_norm > 0 ? std::clamp(boundary_spacing / pre.sup_norm, cfg.dt, std::max(cfg.dt, t)) : std::max(cfg.dt, t);
        std::vector<Point> cur = base;
        double tau = 0.0;
        while (tau < t_ || samples_.empty()) {
            for (const auto& p : cur) samples_.push_back({p, tau});
            double next = tau + layer_;
            if (next >= t_) break;
            for (auto& p : cur) {
                double done = 0.0;
                while (done < layer_ - 1e-15) {
                    double h = std::min(cfg.dt, layer_ - done);
                    p = rk4_step(v_, p, h);
                    done += h;
                }
            }
            tau = next;
        }
        for (const auto& s : samples_) sweep = bounding_union(sweep, Box(s.position, s.position));
        FieldBounds fb = v_.bounds(sweep);
        rho_ = cover * std::exp(fb.lipschitz * t_) + fb.sup_norm * layer_ + 1e-9;
    }

    double time() const { return t_; }
    double spatial_tolerance() const { return rho_; }
    const std::vector<EvolutedSample>& samples() const { return samples_; }

    // x in omega^t up to the dt time grid: some tau_k = k dt < t has Phi_{-tau_k}(x) near omega.
    bool contains(const Point& x) const {
        Point p = x;
        double tau = 0.0;
        while (tau < t_) {
            if (omega_.signed_distance(p) > -kBoundaryTol) return true;
            p = rk4_step(v_, p, -cfg_.dt);
            tau += cfg_.dt;
        }
        return false;
    }

    // Smallest sample time among boundary samples within `radius` of y; +inf if none.
    double min_sample_time_within(const Point& y, double radius) const {
        build_index(radius);
        const int d = y.dim;
        std::array<long, kMaxDim> base{};
        for (int i = 0; i < d; ++i) base[i] = static_cast<long>(std::floor(y[i] / cell_));
        double best = kInf;
        std::array<long, kMaxDim> off{};
        for (int i = 0; i < d; ++i) off[i] = -1;
        for (;;) {
            std::array<long, kMaxDim> key{};
            for (int i = 0; i < d; ++i) key[i] = base[i] + off[i];
            auto it = index_.find(hash(key));
            if (it != index_.end())
                for (std::size_t s : it->second)
                    if (samples_[s].time < best && dist(samples_[s].position, y) < radius) best = samples_[s].time;
            int k = 0;
            while (k < d && ++off[k] > 1) off[k++] = -1;
            if (k == d) break;
        }
        return best;
    }

private:
    VectorField v_;
    ControlRegion omega_;
    double t_;
    FlowConfig cfg_;
    double layer_ = 0.0;
    double rho_ = 0.0;
    std::vector<EvolutedSample> samples_;
    mutable double cell_ = -1.0;
    mutable std::unordered_map<std::size_t, std::vector<std::size_t>> index_;

    static std::size_t hash(const std::array<long, kMaxDim>& k) {
        std::size_t h = 1469598103934665603ULL;
        for (long v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
        return h;
    }

    void build_index(double radius) const {
        if (cell_ == radius) return;
        cell_ = radius;
        index_.clear();
        for (std::size_t s = 0; s < samples_.size(); ++s) {
            std::array<long, kMaxDim> key{};
            for (int i = 0; i < samples_[s].position.dim; ++i)
                key[i] = static_cast<long>(std::floor(samples_[s].position[i] / cell_));
            index_[hash(key)].push_back(s);
        }
    }
};

}  // namespace crowdctl
