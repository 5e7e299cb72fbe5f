#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "geometry.hpp"
#include "region.hpp"

namespace crowdctl {

// Which one-sided limit to use at a breakpoint.
enum class Side { Right, Left };

// Quintic smoothstep: 1 for rho <= r, 0 for rho >= R, C^2 in between.
inline double tube_blend(double rho, double r, double R) {
    if (rho <= r) return 1.0;
    if (rho >= R) return 0.0;
    double s = (R - rho) / (R - r);
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

// Feedback tube around a moving center over [t_start, t_end). Centers and radii are
// piecewise linear in time; the feedforward is the center velocity.
struct ControlWindow {
    double t_start = 0.0, t_end = 0.0;
    std::vector<double> knot_times;
    std::vector<Point> centers;
    std::vector<double> radius_times;
    std::vector<double> inner, outer;
    double gain = 1.0;
    int source = -1, target = -1;

    void validate() const {
        if (!(t_end > t_start)) throw ValidationError("control window must have positive length");
        if (knot_times.size() < 2 || knot_times.size() != centers.size())
            throw ValidationError("control window needs matching knot times and centers");
        if (knot_times.front() != t_start || knot_times.back() != t_end)
            throw ValidationError("center polyline must span its window");
        for (std::size_t i = 1; i < knot_times.size(); ++i)
            if (!(knot_times[i] > knot_times[i - 1])) throw ValidationError("knot times must increase");
        if (radius_times.empty() || radius_times.size() != inner.size() || inner.size() != outer.size())
            throw ValidationError("radius samples are inconsistent");
        for (std::size_t i = 0; i < inner.size(); ++i)
            if (!(inner[i] > 0 && outer[i] > inner[i])) throw ValidationError("tube radii must satisfy 0 < r < R");
        if (!(gain > 0)) throw ValidationError("gain must be positive");
    }

    std::size_t segment(double t, Side side) const {
        auto it = side == Side::Right ? std::upper_bound(knot_times.begin(), knot_times.end(), t)
                                      : std::lower_bound(knot_times.begin(), knot_times.end(), t);
        std::size_t s = it == knot_times.begin() ? 0 : static_cast<std::size_t>(it - knot_times.begin()) - 1;
        return std::min(s, knot_times.size() - 2);
    }
    Point center(double t, Side side = Side::Right) const {
        std::size_t s = segment(t, side);
        double a = (t - knot_times[s]) / (knot_times[s + 1] - knot_times[s]);
        return centers[s] + a * (centers[s + 1] - centers[s]);
    }
    Point velocity(double t, Side side = Side::Right) const {
        std::size_t s = segment(t, side);
        return (centers[s + 1] - centers[s]) * (1.0 / (knot_times[s + 1] - knot_times[s]));
    }
    std::pair<double, double> radii(double t) const {
        if (radius_times.size() == 1 || t <= radius_times.front()) return {inner.front(), outer.front()};
        if (t >= radius_times.back()) return {inner.back(), outer.back()};
        std::size_t s = static_cast<std::size_t>(std::upper_bound(radius_times.begin(), radius_times.end(), t) - radius_times.begin()) - 1;
        double a = (t - radius_times[s]) / (radius_times[s + 1] - radius_times[s]);
        return {inner[s] + a * (inner[s + 1] - inner[s]), outer[s] + a * (outer[s + 1] - outer[s])};
    }
    bool active(double t, Side side) const {
        return side == Side::Right ? (t >= t_start && t < t_end) : (t > t_start && t <= t_end);
    }
};

struct ActiveTube {
    Point center, feedforward;
    double r = 0.0, R = 0.0, gain = 0.0;
};

// Tubes active at one instant, sorted by first coordinate.
class ControlSlice {
public:
    ControlSlice(const VectorField* v, const ControlRegion* omega, std::vector<ActiveTube> tubes)
        : v_(v), omega_(omega), tubes_(std::move(tubes)) {
        std::sort(tubes_.begin(), tubes_.end(), [](const ActiveTube& a, const ActiveTube& b) { return a.center[0] < b.center[0]; });
        for (const auto& t : tubes_) max_R_ = std::max(max_R_, t.R);
        keys_.reserve(tubes_.size());
        for (const auto& t : tubes_) keys_.push_back(t.center[0]);
    }

    const std::vector<ActiveTube>& tubes() const { return tubes_; }

    Point operator()(const Point& x) const {
        Point u(x.dim);
        if (tubes_.empty() || !(omega_->signed_distance(x) > 0)) return u;
        auto first = std::lower_bound(keys_.begin(), keys_.end(), x[0] - max_R_);
        bool have_v = false;
        Point vx;
        for (auto it = first; it != keys_.end() && *it <= x[0] + max_R_; ++it) {
            const ActiveTube& tb = tubes_[static_cast<std::size_t>(it - keys_.begin())];
            double rho = dist(x, tb.center);
            if (rho >= tb.R) continue;
            if (!have_v) { vx = (*v_)(x); have_v = true; }
            double b = tube_blend(rho, tb.r, tb.R);
            u += b * (tb.feedforward + tb.gain * (tb.center - x) - vx);
        }
        return u;
    }

private:
    const VectorField* v_;
    const ControlRegion* omega_;
    std::vector<ActiveTube> tubes_;
    std::vector<double> keys_;
    double max_R_ = 0.0;
};

// Time-dependent control u(x, t), identically zero outside omega.
class ControlField {
public:
    ControlField() = default;
    ControlField(VectorField v, ControlRegion omega, std::vector<ControlWindow> windows)
        : v_(std::move(v)), omega_(std::move(omega)), windows_(std::move(windows)) {
        for (const auto& w : windows_) w.validate();
        std::sort(windows_.begin(), windows_.end(), [](const ControlWindow& a, const ControlWindow& b) { return a.t_start < b.t_start; });
        for (const auto& w : windows_) {
            breakpoints_.push_back(w.t_start);
            breakpoints_.push_back(w.t_end);
        }
        std::sort(breakpoints_.begin(), breakpoints_.end());
        breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());
        compute_bounds();
    }

    const VectorField& field() const { return v_; }
    const ControlRegion& region() const { return omega_; }
    const std::vector<ControlWindow>& windows() const { return windows_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    double sup_bound() const { return sup_; }
    double lipschitz_bound() const { return lip_; }

    ControlSlice slice(double t, Side side = Side::Right) const {
        std::vector<ActiveTube> tubes;
        for (const auto& w : windows_) {
            if (w.t_start > t) break;
            if (!w.active(t, side)) continue;
            auto [r, R] = w.radii(t);
            tubes.push_back({w.center(t, side), w.velocity(t, side), r, R, w.gain});
        }
        return ControlSlice(&v_, &omega_, std::move(tubes));
    }

    Point operator()(const Point& x, double t, Side side = Side::Right) const { return slice(t, side)(x); }

private:
    VectorField v_;
    ControlRegion omega_;
    std::vector<ControlWindow> windows_;
    std::vector<double> breakpoints_;
    double sup_ = 0.0, lip_ = 0.0;

    void compute_bounds() {
        if (windows_.empty() || omega_.empty()) return;
        FieldBounds fb = v_.bounds(omega_.bounding_box());
        for (const auto& w : windows_) {
            double ff = 0.0;
            for (std::size_t s = 0; s + 1 < w.knot_times.size(); ++s)
                ff = std::max(ff, norm(w.centers[s + 1] - w.centers[s]) / (w.knot_times[s + 1] - w.knot_times[s]));
            double Rmax = *std::max_element(w.outer.begin(), w.outer.end());
            double gap = kInf;
            for (std::size_t i = 0; i < w.inner.size(); ++i) gap = std::min(gap, w.outer[i] - w.inner[i]);
            double mag = ff + fb.sup_norm + w.gain * Rmax;
            sup_ = std::max(sup_, mag);
            lip_ = std::max(lip_, (15.0 / 8.0) * mag / gap + w.gain + fb.lipschitz);
        }
    }
};

}  // namespace crowdctl
