#pragma once

#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace crowdctl {

struct BallShape {
    Point center;
    double radius = 0.0;
};

struct PolygonShape {
    std::vector<Point> vertices;  // counter-clockwise, d = 2
};

// Open control region. signed_distance > 0 exactly on the interior.
class ControlRegion {
public:
    using Shape = std::variant<Box, BallShape, PolygonShape>;

    ControlRegion() = default;
    explicit ControlRegion(Box b) : shape_(std::move(b)) { dim_ = std::get<Box>(shape_).dim(); }
    static ControlRegion ball(const Point& c, double r) {
        ControlRegion g;
        g.shape_ = BallShape{c, r};
        g.dim_ = c.dim;
        return g;
    }
    static ControlRegion polygon(std::vector<Point> v) {
        if (v.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
        for (const auto& p : v)
            if (p.dim != 2) throw ValidationError("polygon vertices must be 2-dimensional");
        if (signed_area(v) < 0) std::reverse(v.begin(), v.end());
        ControlRegion g;
        g.shape_ = PolygonShape{std::move(v)};
        g.dim_ = 2;
        return g;
    }

    int dim() const { return dim_; }
    const Shape& shape() const { return shape_; }

    bool is_convex() const {
        if (auto* p = std::get_if<PolygonShape>(&shape_)) {
            const auto& v = p->vertices;
            std::size_t n = v.size();
            for (std::size_t i = 0; i < n; ++i) {
                const Point& a = v[i];
                const Point& b = v[(i + 1) % n];
                const Point& c = v[(i + 2) % n];
                if (cross(b - a, c - b) < -1e-12) return false;
            }
        }
        return true;
    }

    bool empty() const {
        if (auto* b = std::get_if<Box>(&shape_)) return b->empty();
        if (auto* s = std::get_if<BallShape>(&shape_)) return !(s->radius > 0);
        const auto& v = std::get<PolygonShape>(shape_).vertices;
        return v.size() < 3 || signed_area(v) <= 1e-300;
    }

    double signed_distance(const Point& x) const {
        if (auto* b = std::get_if<Box>(&shape_)) {
            if (b->empty()) return -kInf;
            if (b->contains_open(x)) {
                double m = kInf;
                for (int i = 0; i < b->dim(); ++i) m = std::min({m, x[i] - b->lo[i], b->hi[i] - x[i]});
                return m;
            }
            return -distance_to_box(*b, x);
        }
        if (auto* s = std::get_if<BallShape>(&shape_)) {
            if (!(s->radius > 0)) return -kInf;
            return s->radius - dist(x, s->center);
        }
        const auto& v = std::get<PolygonShape>(shape_).vertices;
        if (v.size() < 3) return -kInf;
        double m = kInf;
        std::size_t n = v.size();
        for (std::size_t i = 0; i < n; ++i) m = std::min(m, segment_distance(x, v[i], v[(i + 1) % n]));
        return inside_polygon(v, x) ? m : -m;
    }

    bool contains(const Point& x) const { return signed_distance(x) > 0; }

    // {x : d(x, complement) > r}; non-convex polygons are rejected.
    ControlRegion erode(double r) const {
        if (r < 0) throw ValidationError("erosion radius must be nonnegative");
        if (auto* b = std::get_if<Box>(&shape_)) {
            Box e = *b;
            for (int i = 0; i < e.dim(); ++i) {
                e.lo[i] += r;
                e.hi[i] -= r;
            }
            return ControlRegion(e);
        }
        if (auto* s = std::get_if<BallShape>(&shape_)) return ball(s->center, s->radius - r);
        if (!is_convex()) throw ValidationError("erosion of a non-convex polygon is not supported");
        std::vector<Point> poly = std::get<PolygonShape>(shape_).vertices;
        const std::vector<Point> orig = poly;
        std::size_t n = orig.size();
        for (std::size_t i = 0; i < n && poly.size() >= 3; ++i) {
            Point a = orig[i], b = orig[(i + 1) % n];
            Point e = b - a;
            Point inward{-e[1], e[0]};
            inward *= 1.0 / norm(inward);
            poly = clip_half_plane(poly, a + r * inward, inward);
        }
        ControlRegion g;
        g.shape_ = PolygonShape{poly};
        g.dim_ = 2;
        return g;
    }

    Box bounding_box() const {
        if (auto* b = std::get_if<Box>(&shape_)) return *b;
        if (auto* s = std::get_if<BallShape>(&shape_)) {
            return Box(s->center - Point::filled(dim_, s->radius), s->center + Point::filled(dim_, s->radius));
        }
        return crowdctl::bounding_box(std::get<PolygonShape>(shape_).vertices);
    }

    // Points on the boundary with spacing at most about h.
    std::vector<Point> boundary_samples(double h) const {
        std::vector<Point> out;
        if (empty()) return out;
        if (auto* b = std::get_if<Box>(&shape_)) {
            int d = b->dim();
            if (d == 1) return {b->lo, b->hi};
            for (int face_axis = 0; face_axis < d; ++face_axis) {
                for (int side = 0; side < 2; ++side) {
                    std::vector<int> counts(d, 1);
                    for (int i = 0; i < d; ++i)
                        if (i != face_axis) counts[i] = std::max(2, static_cast<int>(std::ceil(b->width(i) / h)) + 1);
                    std::vector<int> idx(d, 0);
                    for (;;) {
                        Point p(d);
                        for (int i = 0; i < d; ++i) {
                            if (i == face_axis) p[i] = side ? b->hi[i] : b->lo[i];
                            else p[i] = b->lo[i] + b->width(i) * idx[i] / (counts[i] - 1);
                        }
                        out.push_back(p);
                        int k = 0;
                        while (k < d && ++idx[k] >= counts[k]) idx[k++] = 0;
                        if (k == d) break;
                    }
                }
            }
            return out;
        }
        if (auto* s = std::get_if<BallShape>(&shape_)) {
            if (dim_ == 1) return {s->center - Point{s->radius}, s->center + Point{s->radius}};
            if (dim_ == 2) {
                int m = std::max(8, static_cast<int>(std::ceil(2 * std::numbers::pi * s->radius / h)));
                for (int k = 0; k < m; ++k) {
                    double a = 2 * std::numbers::pi * k / m;
                    out.push_back(s->center + Point{s->radius * std::cos(a), s->radius * std::sin(a)});
                }
                return out;
            }
            int m = std::max(32, static_cast<int>(std::ceil(4 * std::numbers::pi * s->radius * s->radius / (h * h))));
            double golden = std::numbers::pi * (3 - std::sqrt(5.0));
            for (int k = 0; k < m; ++k) {
                double z = 1 - 2 * (k + 0.5) / m;
                double rr = std::sqrt(1 - z * z);
                out.push_back(s->center + s->radius * Point{rr * std::cos(golden * k), rr * std::sin(golden * k), z});
            }
            return out;
        }
        const auto& v = std::get<PolygonShape>(shape_).vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point& a = v[i];
            const Point& b = v[(i + 1) % v.size()];
            int m = std::max(1, static_cast<int>(std::ceil(dist(a, b) / h)));
            for (int k = 0; k < m; ++k) out.push_back(a + (static_cast<double>(k) / m) * (b - a));
        }
        return out;
    }

private:
    Shape shape_;
    int dim_ = 0;

    static double cross(const Point& a, const Point& b) { return a[0] * b[1] - a[1] * b[0]; }

    static double signed_area(const std::vector<Point>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += cross(v[i], v[(i + 1) % v.size()]);
        return 0.5 * s;
    }

    static double segment_distance(const Point& x, const Point& a, const Point& b) {
        Point ab = b - a;
        double len2 = norm2(ab);
        double t = len2 > 0 ? std::clamp(dot(x - a, ab) / len2, 0.0, 1.0) : 0.0;
        return dist(x, a + t * ab);
    }

    static bool inside_polygon(const std::vector<Point>& v, const Point& x) {
        bool in = false;
        for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
            if ((v[i][1] > x[1]) != (v[j][1] > x[1])) {
                double xc = v[j][0] + (x[1] - v[j][1]) * (v[i][0] - v[j][0]) / (v[i][1] - v[j][1]);
                if (x[0] < xc) in = !in;
            }
        }
        return in;
    }

    // Keeps {p : (p - origin) . normal >= 0}.
    static std::vector<Point> clip_half_plane(const std::vector<Point>& poly, const Point& origin, const Point& normal) {
        std::vector<Point> out;
        std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& p = poly[i];
            const Point& q = poly[(i + 1) % n];
            double dp = dot(p - origin, normal), dq = dot(q - origin, normal);
            if (dp >= 0) out.push_back(p);
            if ((dp >= 0) != (dq >= 0)) out.push_back(p + (dp / (dp - dq)) * (q - p));
        }
        return out;
    }
};

}  // namespace crowdctl
