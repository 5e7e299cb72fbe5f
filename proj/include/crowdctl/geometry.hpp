#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdctl {

inline constexpr int kMaxDim = 3;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Small fixed-capacity vector; coordinates beyond `dim` are kept at zero.
struct Point {
    std::array<double, kMaxDim> c{};
    int dim = 0;

    Point() = default;
    explicit Point(int d) : dim(d) {}
    Point(std::initializer_list<double> xs) : dim(static_cast<int>(xs.size())) {
        if (dim > kMaxDim) throw std::invalid_argument("point dimension exceeds 3");
        std::copy(xs.begin(), xs.end(), c.begin());
    }
    static Point from(const std::vector<double>& xs) {
        if (xs.empty() || xs.size() > kMaxDim) throw std::invalid_argument("point dimension must be 1..3");
        Point p(static_cast<int>(xs.size()));
        std::copy(xs.begin(), xs.end(), p.c.begin());
        return p;
    }
    static Point filled(int d, double v) {
        Point p(d);
        for (int i = 0; i < d; ++i) p.c[i] = v;
        return p;
    }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    Point& operator+=(const Point& o) { for (int i = 0; i < kMaxDim; ++i) c[i] += o.c[i]; return *this; }
    Point& operator-=(const Point& o) { for (int i = 0; i < kMaxDim; ++i) c[i] -= o.c[i]; return *this; }
    Point& operator*=(double s) { for (int i = 0; i < kMaxDim; ++i) c[i] *= s; return *this; }

    friend Point operator+(Point a, const Point& b) { a += b; return a; }
    friend Point operator-(Point a, const Point& b) { a -= b; return a; }
    friend Point operator*(Point a, double s) { a *= s; return a; }
    friend Point operator*(double s, Point a) { a *= s; return a; }
    friend Point operator-(Point a) { a *= -1.0; return a; }
    friend bool operator==(const Point& a, const Point& b) { return a.dim == b.dim && a.c == b.c; }

    std::vector<double> to_vector() const { return {c.begin(), c.begin() + dim}; }
};

inline double dot(const Point& a, const Point& b) {
    return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}
inline double norm2(const Point& a) { return dot(a, a); }
inline double norm(const Point& a) { return std::sqrt(norm2(a)); }
inline double dist(const Point& a, const Point& b) { return norm(a - b); }

// Axis-aligned box, treated as the open set (lo, hi).
struct Box {
    Point lo, hi;

    Box() = default;
    Box(Point l, Point h) : lo(l), hi(h) {
        if (lo.dim != hi.dim) throw std::invalid_argument("box corner dimensions differ");
    }
    int dim() const { return lo.dim; }
    bool empty() const {
        for (int i = 0; i < dim(); ++i)
            if (!(lo[i] < hi[i])) return true;
        return false;
    }
    double width(int i) const { return hi[i] - lo[i]; }
    double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= std::max(0.0, width(i));
        return v;
    }
    Point center() const { return 0.5 * (lo + hi); }
    bool contains_open(const Point& x) const {
        for (int i = 0; i < dim(); ++i)
            if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
        return true;
    }
    // Half-open [lo, hi) membership, used for grid cells.
    bool contains_half_open(const Point& x) const {
        for (int i = 0; i < dim(); ++i)
            if (!(x[i] >= lo[i] && x[i] < hi[i])) return false;
        return true;
    }
    double diameter() const { return dist(lo, hi); }
    std::vector<Point> corners() const {
        std::vector<Point> out;
        int d = dim();
        for (int mask = 0; mask < (1 << d); ++mask) {
            Point p(d);
            for (int i = 0; i < d; ++i) p[i] = (mask >> i & 1) ? hi[i] : lo[i];
            out.push_back(p);
        }
        return out;
    }
};

inline Box intersect(const Box& a, const Box& b) {
    Box r = a;
    for (int i = 0; i < a.dim(); ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::min(a.hi[i], b.hi[i]);
    }
    return r;
}

inline double overlap_volume(const Box& a, const Box& b) {
    Box r = intersect(a, b);
    return r.empty() ? 0.0 : r.volume();
}

inline Box bounding_union(const Box& a, const Box& b) {
    Box r = a;
    for (int i = 0; i < a.dim(); ++i) {
        r.lo[i] = std::min(a.lo[i], b.lo[i]);
        r.hi[i] = std::max(a.hi[i], b.hi[i]);
    }
    return r;
}

inline Box bounding_box(const std::vector<Point>& pts) {
    if (pts.empty()) throw std::invalid_argument("bounding box of empty point set");
    Box b(pts[0], pts[0]);
    for (const auto& p : pts)
        for (int i = 0; i < p.dim; ++i) {
            b.lo[i] = std::min(b.lo[i], p[i]);
            b.hi[i] = std::max(b.hi[i], p[i]);
        }
    return b;
}

// Euclidean distance from x to the closed box.
inline double distance_to_box(const Box& b, const Point& x) {
    double s = 0.0;
    for (int i = 0; i < b.dim(); ++i) {
        double e = std::max({b.lo[i] - x[i], 0.0, x[i] - b.hi[i]});
        s += e * e;
    }
    return std::sqrt(s);
}

}  // namespace crowdctl
