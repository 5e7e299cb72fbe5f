#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "measures.hpp"

namespace crowdctl {

template <class M>
concept MassMeasure = requires(const M& m, const Box& b, const Point& x) {
    { m.dim() } -> std::convertible_to<int>;
    { m.total_mass() } -> std::convertible_to<double>;
    { m.mass_in(b) } -> std::convertible_to<double>;
    { m.centroid_in(b) } -> std::convertible_to<Point>;
    { m.support_bbox_in(b) } -> std::convertible_to<std::optional<Box>>;
    { m.density_at(x) } -> std::convertible_to<double>;
    { m.support_bbox() } -> std::convertible_to<Box>;
};

struct MeshCell {
    Box outer;             // slice of mass gamma / n^4, tightened to the support
    Box inner;             // symmetric shrink with mass gamma / n^4 - gamma / n^6
    double mass = 0.0;     // measured mass of `outer`
    double inner_mass = 0.0;
    Point representative;  // mass centroid of `inner`
    std::array<int, kMaxDim> grid{};
    int column = 0, row = 0;
    bool zero_density_representative = false;
};

struct Mesh {
    int n = 0;
    int dim = 0;
    double gamma = 0.0;
    Box bbox;
    std::vector<MeshCell> cells;
};

// Smallest cube (alpha0, alpha1)^d containing the support.
inline Box cube_hull(const Box& support) {
    double a0 = support.lo[0], a1 = support.hi[0];
    for (int i = 1; i < support.dim(); ++i) {
        a0 = std::min(a0, support.lo[i]);
        a1 = std::max(a1, support.hi[i]);
    }
    return Box(Point::filled(support.dim(), a0), Point::filled(support.dim(), a1));
}

namespace detail {

// Smallest x in [b.lo[axis], b.hi[axis]] with mass(b restricted to [lo, x)) >= target.
template <MassMeasure M>
double cut_at_mass(const M& mu, const Box& b, int axis, double target) {
    double lo = b.lo[axis], hi = b.hi[axis];
    double scale = std::max(1.0, std::abs(hi) + std::abs(lo));
    auto upto = [&](double x) {
        Box s = b;
        s.hi[axis] = x;
        return mu.mass_in(s);
    };
    if (upto(hi) <= target) return hi;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * scale; ++it) {
        double mid = 0.5 * (lo + hi);
        if (upto(mid) >= target) hi = mid;
        else lo = mid;
    }
    return hi;
}

inline Box shrink(const Box& b, double e) {
    Box r = b;
    for (int i = 0; i < b.dim(); ++i) {
        r.lo[i] += e;
        r.hi[i] -= e;
    }
    return r;
}

}  // namespace detail

// Mesh of n^d grid cells, each cut into columns of mass gamma/n^3 along x1 and then
// into n rows of mass gamma/n^4 (along x2 in 2D, along x1 in 1D).
template <MassMeasure M>
Mesh build_mesh(const M& mu, int n, std::optional<Box> bbox = std::nullopt) {
    const int d = mu.dim();
    if (d < 1 || d > 2) throw ValidationError("mesh construction supports d = 1 or 2");
    if (n < 1) throw ValidationError("mesh parameter n must be positive");
    const double gamma = mu.total_mass();
    if (!(gamma > 0)) throw ValidationError("cannot mesh a zero-mass measure");
    Box support = mu.support_bbox();
    Box box = bbox ? *bbox : cube_hull(support);
    for (int i = 0; i < d; ++i)
        if (support.lo[i] < box.lo[i] - 1e-12 || support.hi[i] > box.hi[i] + 1e-12)
            throw ValidationError("measure support is not contained in the mesh bounding box");

    Mesh mesh{n, d, gamma, box, {}};
    const double n3 = std::pow(n, 3), n4 = std::pow(n, 4), n6 = std::pow(n, 6);
    const double col_mass = gamma / n3, row_mass = gamma / n4, inner_mass = gamma / n4 - gamma / n6;
    const int row_axis = d == 1 ? 0 : 1;

    std::array<int, kMaxDim> k{};
    for (;;) {
        Box cell = box;
        for (int i = 0; i < d; ++i) {
            double h = box.width(i) / n;
            cell.lo[i] = box.lo[i] + h * k[i];
            cell.hi[i] = k[i] + 1 == n ? box.hi[i] : box.lo[i] + h * (k[i] + 1);
        }
        double m = mu.mass_in(cell);
        int cols = static_cast<int>(std::floor(m / col_mass + 1e-7));
        double a = cell.lo[0];
        for (int ci = 0; ci < cols; ++ci) {
            Box rest = cell;
            rest.lo[0] = a;
            double a_next = detail::cut_at_mass(mu, rest, 0, col_mass);
            Box col = rest;
            col.hi[0] = a_next;
            double r = col.lo[row_axis];
            for (int rj = 0; rj < n; ++rj) {
                Box rrest = col;
                rrest.lo[row_axis] = r;
                double r_next = detail::cut_at_mass(mu, rrest, row_axis, row_mass);
                Box slice = rrest;
                slice.hi[row_axis] = r_next;
                r = r_next;
                auto tight = mu.support_bbox_in(slice);
                if (!tight) continue;
                MeshCell c;
                c.outer = *tight;
                c.mass = mu.mass_in(c.outer);
                double half = kInf;
                for (int i = 0; i < d; ++i) half = std::min(half, 0.5 * c.outer.width(i));
                double lo = 0.0, hi = half;
                for (int it = 0; it < 200 && hi - lo > 1e-16 * (1 + half); ++it) {
                    double mid = 0.5 * (lo + hi);
                    if (mu.mass_in(detail::shrink(c.outer, mid)) >= inner_mass) lo = mid;
                    else hi = mid;
                }
                c.inner = detail::shrink(c.outer, lo);
                c.inner_mass = mu.mass_in(c.inner);
                c.representative = mu.centroid_in(c.inner);
                c.zero_density_representative = mu.density_at(c.representative) == 0.0;
                c.grid = k;
                c.column = ci;
                c.row = rj;
                mesh.cells.push_back(c);
            }
            a = a_next;
        }
        int i = 0;
        while (i < d && ++k[i] == n) k[i++] = 0;
        if (i == d) break;
    }
    return mesh;
}

// Among the cube hull and the support box padded on each side by k/steps of a tight grid
// width (k = 0..steps per axis), the mesh keeping most cells; representatives on zero
// density are ranked last, earlier candidates win ties.
template <MassMeasure M>
Mesh build_fitted_mesh(const M& mu, int n, int steps = 16) {
    Box support = mu.support_bbox();
    const int d = mu.dim();
    std::optional<Mesh> best;
    auto score = [](const Mesh& m) {
        bool clean = std::none_of(m.cells.begin(), m.cells.end(), [](const MeshCell& c) { return c.zero_density_representative; });
        return std::pair{clean, m.cells.size()};
    };
    auto consider = [&](const Box& b) {
        Mesh m = build_mesh(mu, n, b);
        if (!best || score(m) > score(*best)) best = std::move(m);
    };
    consider(cube_hull(support));
    std::array<int, kMaxDim> k{};
    for (;;) {
        Box b = support;
        for (int i = 0; i < d; ++i) {
            double pad = support.width(i) / n * k[i] / steps;
            b.lo[i] -= pad;
            b.hi[i] += pad;
        }
        consider(b);
        int i = 0;
        while (i < d && ++k[i] > steps) k[i++] = 0;
        if (i == d) break;
    }
    return *best;
}

inline void write_mesh_csv(const Mesh& mesh, std::ostream& os) {
    const int d = mesh.dim;
    for (int i = 0; i < d; ++i) os << "k" << i + 1 << ",";
    os << "column,row,";
    for (const char* pre : {"outer_lo", "outer_hi", "inner_lo", "inner_hi"})
        for (int i = 0; i < d; ++i) os << pre << i + 1 << ",";
    os << "mass,inner_mass,";
    for (int i = 0; i < d; ++i) os << "rep" << i + 1 << ",";
    os << "zero_density\n" << std::setprecision(15);
    for (const auto& c : mesh.cells) {
        for (int i = 0; i < d; ++i) os << c.grid[i] << ",";
        os << c.column << "," << c.row << ",";
        for (const Point* p : {&c.outer.lo, &c.outer.hi, &c.inner.lo, &c.inner.hi})
            for (int i = 0; i < d; ++i) os << (*p)[i] << ",";
        os << c.mass << "," << c.inner_mass << ",";
        for (int i = 0; i < d; ++i) os << c.representative[i] << ",";
        os << (c.zero_density_representative ? 1 : 0) << "\n";
    }
}

}  // namespace crowdctl
