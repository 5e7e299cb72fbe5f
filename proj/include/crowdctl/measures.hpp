#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace crowdctl {

// Finite set of weighted atoms.
class ParticleCloud {
public:
    ParticleCloud() = default;
    ParticleCloud(int dim, std::vector<Point> points, std::vector<double> weights)
        : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
        if (points_.size() != weights_.size()) throw ValidationError("cloud points and weights differ in length");
        for (const auto& p : points_)
            if (p.dim != dim_) throw ValidationError("cloud point has wrong dimension");
        for (double w : weights_)
            if (!(w >= 0) || !std::isfinite(w)) throw ValidationError("cloud weights must be finite and nonnegative");
    }
    static ParticleCloud equal(int dim, std::vector<Point> points, double total_mass) {
        std::size_t n = points.size();
        std::vector<double> w(n, n ? total_mass / static_cast<double>(n) : 0.0);
        return ParticleCloud(dim, std::move(points), std::move(w));
    }

    int dim() const { return dim_; }
    std::size_t size() const { return points_.size(); }
    const std::vector<Point>& points() const { return points_; }
    std::vector<Point>& points() { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const Point& point(std::size_t i) const { return points_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    double total_mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }
    bool equal_atoms(double rel = 1e-12) const {
        if (weights_.empty()) return true;
        double w0 = weights_[0];
        for (double w : weights_)
            if (std::abs(w - w0) > rel * std::max(1.0, std::abs(w0))) return false;
        return true;
    }

private:
    int dim_ = 0;
    std::vector<Point> points_;
    std::vector<double> weights_;
};

struct DensityBox {
    Box box;
    double density = 0.0;
};

// Piecewise-constant density on pairwise-disjoint axis-aligned boxes.
class BoxDensitySpec {
public:
    BoxDensitySpec() = default;
    BoxDensitySpec(int dim, std::vector<DensityBox> comps, std::optional<double> stated_total = std::nullopt)
        : dim_(dim), comps_(std::move(comps)) {
        if (comps_.empty()) throw ValidationError("density spec has no components");
        for (const auto& c : comps_) {
            if (c.box.dim() != dim_) throw ValidationError("density box has wrong dimension");
            if (c.box.empty()) throw ValidationError("density box is empty");
            if (!(c.density >= 0) || !std::isfinite(c.density)) throw ValidationError("density must be finite and nonnegative");
        }
        for (std::size_t i = 0; i < comps_.size(); ++i)
            for (std::size_t j = i + 1; j < comps_.size(); ++j)
                if (overlap_volume(comps_[i].box, comps_[j].box) > 0)
                    throw ValidationError("density boxes " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        if (stated_total) {
            double m = total_mass();
            if (std::abs(m - *stated_total) > 1e-9 * std::max(1.0, std::abs(*stated_total)))
                throw ValidationError("density integrates to " + std::to_string(m) + ", stated total is " + std::to_string(*stated_total));
        }
    }

    int dim() const { return dim_; }
    const std::vector<DensityBox>& components() const { return comps_; }

    double total_mass() const {
        double m = 0.0;
        for (const auto& c : comps_) m += c.density * c.box.volume();
        return m;
    }
    double mass_in(const Box& b) const {
        double m = 0.0;
        for (const auto& c : comps_) m += c.density * overlap_volume(c.box, b);
        return m;
    }
    Point centroid_in(const Box& b) const {
        Point s(dim_);
        double m = 0.0;
        for (const auto& c : comps_) {
            Box r = intersect(c.box, b);
            if (r.empty() || c.density == 0) continue;
            double w = c.density * r.volume();
            s += w * r.center();
            m += w;
        }
        return m > 0 ? s * (1.0 / m) : b.center();
    }
    // Bounding box of the positive-density part inside b.
    std::optional<Box> support_bbox_in(const Box& b) const {
        std::optional<Box> out;
        for (const auto& c : comps_) {
            Box r = intersect(c.box, b);
            if (r.empty() || c.density == 0) continue;
            out = out ? bounding_union(*out, r) : r;
        }
        return out;
    }
    double density_at(const Point& x) const {
        for (const auto& c : comps_)
            if (c.box.contains_open(x)) return c.density;
        return 0.0;
    }
    Box support_bbox() const {
        Box b = comps_[0].box;
        for (const auto& c : comps_) b = bounding_union(b, c.box);
        return b;
    }

private:
    int dim_ = 0;
    std::vector<DensityBox> comps_;
};

// Mass queries on a cloud, so mesh construction can run on empirical measures.
class CloudMeasure {
public:
    explicit CloudMeasure(const ParticleCloud& c) : cloud_(&c) {}
    int dim() const { return cloud_->dim(); }
    double total_mass() const { return cloud_->total_mass(); }
    double mass_in(const Box& b) const {
        double m = 0.0;
        for (std::size_t i = 0; i < cloud_->size(); ++i)
            if (b.contains_half_open(cloud_->point(i))) m += cloud_->weight(i);
        return m;
    }
    Point centroid_in(const Box& b) const {
        Point s(dim());
        double m = 0.0;
        for (std::size_t i = 0; i < cloud_->size(); ++i)
            if (b.contains_half_open(cloud_->point(i))) {
                s += cloud_->weight(i) * cloud_->point(i);
                m += cloud_->weight(i);
            }
        return m > 0 ? s * (1.0 / m) : b.center();
    }
    std::optional<Box> support_bbox_in(const Box& b) const {
        std::optional<Box> out;
        for (const auto& p : cloud_->points())
            if (b.contains_half_open(p)) out = out ? bounding_union(*out, Box(p, p)) : Box(p, p);
        return out;
    }
    double density_at(const Point&) const { return -1.0; }  // unknown for atoms
    Box support_bbox() const { return bounding_box(cloud_->points()); }

private:
    const ParticleCloud* cloud_;
};

enum class SamplingMode { Stratified, Random };

namespace detail {

// Largest-remainder apportionment of n atoms proportionally to weights; ties go to the lower index.
inline std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t n) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double q = static_cast<double>(n) * weights[i] / total;
        counts[i] = static_cast<std::size_t>(std::floor(q + 1e-12));
        used += counts[i];
        rem.push_back({q - static_cast<double>(counts[i]), i});
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < n && k < rem.size(); ++k, ++used) ++counts[rem[k].second];
    return counts;
}

// Equal-mass stratification of a box: slabs along `axis`, each slab stratified over the remaining axes.
// Points along the last axis at quantile midpoints. When `spread` is set, the coordinate on
// axis d-2 is also spread over the slab at distinct midpoints in a coprime-stride order, so
// the marginal on that axis is stratified as well.
inline void stratify_box(const Box& b, std::size_t count, int axis, std::vector<Point>& out, bool spread = false) {
    if (count == 0) return;
    int d = b.dim();
    if (axis == d - 1) {
        std::size_t stride = 1;
        if (spread) {
            stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.618 * static_cast<double>(count))));
            while (std::gcd(stride, count) != 1) ++stride;
        }
        for (std::size_t k = 0; k < count; ++k) {
            Point p = b.center();
            p[axis] = b.lo[axis] + b.width(axis) * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
            if (spread) {
                const double j = static_cast<double>((k * stride) % count);
                p[axis - 1] = b.lo[axis - 1] + b.width(axis - 1) * (j + 0.5) / static_cast<double>(count);
            }
            out.push_back(p);
        }
        return;
    }
    int rest = d - axis;
    double gm = 1.0;
    for (int i = axis; i < d; ++i) gm *= b.width(i);
    gm = std::pow(gm, 1.0 / rest);
    double ideal = std::pow(static_cast<double>(count), 1.0 / rest) * b.width(axis) / gm;
    std::size_t slabs = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(ideal)), 1, count);
    std::size_t base = count / slabs, extra = count % slabs;
    double x = b.lo[axis];
    for (std::size_t s = 0; s < slabs; ++s) {
        std::size_t k = base + (s < extra ? 1 : 0);
        double w = b.width(axis) * static_cast<double>(k) / static_cast<double>(count);
        Box slab = b;
        slab.lo[axis] = x;
        slab.hi[axis] = s + 1 == slabs ? b.hi[axis] : x + w;
        stratify_box(slab, k, axis + 1, out, axis == d - 2);
        x += w;
    }
}

}  // namespace detail

// n equal-weight atoms approximating the spec; total mass is preserved.
inline ParticleCloud sample_density(const BoxDensitySpec& spec, std::size_t n, SamplingMode mode = SamplingMode::Stratified,
                                    std::uint64_t seed = 42) {
    double total = spec.total_mass();
    if (!(total > 0)) throw ValidationError("cannot sample a zero-mass density");
    if (n == 0) throw ValidationError("atom count must be positive");
    std::vector<double> masses;
    for (const auto& c : spec.components()) masses.push_back(c.density * c.box.volume());
    std::vector<Point> pts;
    pts.reserve(n);
    if (mode == SamplingMode::Stratified) {
        auto counts = detail::apportion(masses, n);
        for (std::size_t i = 0; i < counts.size(); ++i) detail::stratify_box(spec.components()[i].box, counts[i], 0, pts);
    } else {
        std::mt19937_64 rng(seed);
        std::discrete_distribution<std::size_t> pick(masses.begin(), masses.end());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t k = 0; k < n; ++k) {
            const Box& b = spec.components()[pick(rng)].box;
            Point p(spec.dim());
            for (int i = 0; i < spec.dim(); ++i) p[i] = b.lo[i] + b.width(i) * u(rng);
            pts.push_back(p);
        }
    }
    return ParticleCloud::equal(spec.dim(), std::move(pts), total);
}

// Histogram of a cloud on a regular grid over `domain`.
struct DensityGrid {
    Box domain;
    std::array<int, kMaxDim> resolution{1, 1, 1};
    std::vector<double> mass;
    double out_of_domain_mass = 0.0;

    int dim() const { return domain.dim(); }
    double cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= domain.width(i) / resolution[i];
        return v;
    }
    double density(std::size_t k) const { return mass[k] / cell_volume(); }
    double max_density() const {
        double m = 0.0;
        for (std::size_t k = 0; k < mass.size(); ++k) m = std::max(m, density(k));
        return m;
    }
    std::size_t index(const std::array<int, kMaxDim>& ix) const {
        std::size_t k = 0;
        for (int i = dim() - 1; i >= 0; --i) k = k * resolution[i] + ix[i];
        return k;
    }
};

// Resolution chosen so the cell side is close to h on every axis.
inline std::array<int, kMaxDim> resolution_for(const Box& domain, double h) {
    std::array<int, kMaxDim> r{1, 1, 1};
    for (int i = 0; i < domain.dim(); ++i) r[i] = std::max(1, static_cast<int>(std::llround(domain.width(i) / h)));
    return r;
}

// Flat index of the grid cell holding p, or -1 when p lies outside the closed domain.
inline long density_cell(const Box& domain, const std::array<int, kMaxDim>& resolution, const Point& p) {
    long k = 0;
    for (int i = domain.dim() - 1; i >= 0; --i) {
        if (p[i] < domain.lo[i] || p[i] > domain.hi[i]) return -1;
        int c = std::min(static_cast<int>(std::floor((p[i] - domain.lo[i]) / domain.width(i) * resolution[i])), resolution[i] - 1);
        k = k * resolution[i] + c;
    }
    return k;
}

inline DensityGrid estimate_density(const ParticleCloud& cloud, const Box& domain, std::array<int, kMaxDim> resolution) {
    DensityGrid g;
    g.domain = domain;
    g.resolution = resolution;
    std::size_t cells = 1;
    for (int i = 0; i < domain.dim(); ++i) {
        if (resolution[i] < 1) throw ValidationError("grid resolution must be positive");
        cells *= static_cast<std::size_t>(resolution[i]);
    }
    g.mass.assign(cells, 0.0);
    for (std::size_t a = 0; a < cloud.size(); ++a) {
        long k = density_cell(domain, resolution, cloud.point(a));
        if (k >= 0) g.mass[static_cast<std::size_t>(k)] += cloud.weight(a);
        else g.out_of_domain_mass += cloud.weight(a);
    }
    return g;
}

// Whitespace-separated matrix: one row per grid y index, columns along x.
inline void write_density_matrix(const DensityGrid& g, std::ostream& os) {
    os << std::setprecision(10);
    int nx = g.resolution[0];
    int ny = g.dim() >= 2 ? g.resolution[1] : 1;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            std::array<int, kMaxDim> ix{i, j, 0};
            os << (i ? " " : "") << g.density(g.index(ix));
        }
        os << '\n';
    }
}

inline void write_cloud_csv(const ParticleCloud& cloud, std::ostream& os) {
    for (int i = 0; i < cloud.dim(); ++i) os << "x" << (i + 1) << ",";
    os << "weight\n" << std::setprecision(17);
    for (std::size_t a = 0; a < cloud.size(); ++a) {
        for (int i = 0; i < cloud.dim(); ++i) os << cloud.point(a)[i] << ",";
        os << cloud.weight(a) << '\n';
    }
}

inline ParticleCloud read_cloud_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("cloud CSV is empty");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    int dim = static_cast<int>(header.size()) - 1;
    if (dim < 1 || dim > kMaxDim || header.back() != "weight") throw ValidationError("cloud CSV header must be x1..xd,weight");
    for (int i = 0; i < dim; ++i)
        if (header[i] != "x" + std::to_string(i + 1)) throw ValidationError("cloud CSV header must be x1..xd,weight");
    std::vector<Point> pts;
    std::vector<double> w;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) {
            try {
                vals.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ValidationError("cloud CSV line " + std::to_string(lineno) + ": bad number");
            }
        }
        if (static_cast<int>(vals.size()) != dim + 1) throw ValidationError("cloud CSV line " + std::to_string(lineno) + ": wrong column count");
        pts.push_back(Point::from({vals.begin(), vals.end() - 1}));
        w.push_back(vals.back());
    }
    return ParticleCloud(dim, std::move(pts), std::move(w));
}

}  // namespace crowdctl
