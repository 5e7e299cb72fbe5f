#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "region.hpp"

namespace crowdctl {

// Square cost matrix; +inf marks a forbidden pair.
class CostMatrix {
public:
    CostMatrix() = default;
    explicit CostMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
    explicit CostMatrix(const std::vector<std::vector<double>>& rows) : n_(rows.size()), data_() {
        data_.reserve(n_ * n_);
        for (const auto& r : rows) {
            if (r.size() != n_) throw ValidationError("cost matrix must be square");
            for (double x : r) {
                if (std::isnan(x) || x == -kInf) throw ValidationError("cost entries must be finite or +inf");
                data_.push_back(x);
            }
        }
    }
    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double max_finite() const {
        double m = 0.0;
        for (double x : data_)
            if (std::isfinite(x)) m = std::max(m, std::abs(x));
        return m;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

enum class AssignmentKind { MinSum, Bottleneck, PartialMinSum, PartialBottleneck };

inline const char* to_string(AssignmentKind k) {
    switch (k) {
        case AssignmentKind::MinSum: return "min-sum";
        case AssignmentKind::Bottleneck: return "bottleneck";
        case AssignmentKind::PartialMinSum: return "partial-min-sum";
        case AssignmentKind::PartialBottleneck: return "partial-bottleneck";
    }
    return "?";
}

// sigma[i] is the column of row i, or -1 for a dropped row (partial kinds only).
struct Assignment {
    std::vector<int> sigma;
    double value = 0.0;
    AssignmentKind kind = AssignmentKind::MinSum;
    std::size_t dropped = 0;
};

namespace detail {

using Adjacency = std::vector<std::vector<int>>;

// Maximum bipartite matching; returns row -> column (-1 unmatched).
inline std::vector<int> hopcroft_karp(const Adjacency& adj, std::size_t ncols, std::size_t* size_out = nullptr) {
    const std::size_t n = adj.size();
    const int NIL = -1;
    std::vector<int> mr(n, NIL), mc(ncols, NIL), distv(n);
    auto bfs = [&]() {
        std::queue<int> q;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (mr[i] == NIL) { distv[i] = 0; q.push(static_cast<int>(i)); }
            else distv[i] = -1;
        }
        while (!q.empty()) {
            int r = q.front();
            q.pop();
            for (int c : adj[r]) {
                int r2 = mc[c];
                if (r2 == NIL) found = true;
                else if (distv[r2] < 0) { distv[r2] = distv[r] + 1; q.push(r2); }
            }
        }
        return found;
    };
    std::vector<std::size_t> it(n);
    std::function<bool(int)> dfs = [&](int r) -> bool {
        for (; it[r] < adj[r].size(); ++it[r]) {
            int c = adj[r][it[r]];
            int r2 = mc[c];
            if (r2 == NIL || (distv[r2] == distv[r] + 1 && dfs(r2))) {
                mr[r] = c;
                mc[c] = r;
                return true;
            }
        }
        distv[r] = -1;
        return false;
    };
    std::size_t size = 0;
    while (bfs()) {
        std::fill(it.begin(), it.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (mr[i] == NIL && dfs(static_cast<int>(i))) ++size;
    }
    if (size_out) *size_out = size;
    return mr;
}

// Lexicographically smallest perfect matching of the graph, starting from a perfect `match`.
inline std::vector<int> lex_smallest_perfect(Adjacency adj, std::vector<int> match) {
    const std::size_t n = adj.size();
    for (auto& a : adj) std::sort(a.begin(), a.end());
    std::vector<int> inv(n, -1);
    for (std::size_t i = 0; i < n; ++i) inv[match[i]] = static_cast<int>(i);
    std::vector<char> row_fixed(n, 0), col_fixed(n, 0), seen(n, 0);

    std::function<bool(int, int)> augment = [&](int r, int target) -> bool {
        for (int c : adj[r]) {
            if (col_fixed[c] || seen[c]) continue;
            seen[c] = 1;
            if (c == target || (inv[c] >= 0 && !row_fixed[inv[c]] && augment(inv[c], target))) {
                match[r] = c;
                inv[c] = r;
                return true;
            }
        }
        return false;
    };

    for (std::size_t i = 0; i < n; ++i) {
        for (int j : adj[i]) {
            if (j == match[i]) break;
            if (col_fixed[j]) continue;
            int old_col = match[i];
            int holder = inv[j];
            std::vector<int> saved_match = match, saved_inv = inv;
            row_fixed[i] = 1;
            col_fixed[j] = 1;
            match[i] = j;
            inv[j] = static_cast<int>(i);
            inv[old_col] = -1;
            std::fill(seen.begin(), seen.end(), 0);
            if (augment(holder, old_col)) break;
            match = std::move(saved_match);
            inv = std::move(saved_inv);
            row_fixed[i] = 0;
            col_fixed[j] = 0;
        }
        row_fixed[i] = 1;
        col_fixed[match[i]] = 1;
    }
    return match;
}

inline Adjacency finite_graph(const CostMatrix& c, double threshold = kInf) {
    Adjacency adj(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j)
            if (std::isfinite(c(i, j)) && c(i, j) <= threshold) adj[i].push_back(static_cast<int>(j));
    return adj;
}

[[noreturn]] inline void throw_infeasible(const CostMatrix& c) {
    std::size_t m = 0;
    auto partial = hopcroft_karp(finite_graph(c), c.size(), &m);
    throw InfeasibleAssignmentError("no finite-cost perfect assignment; maximum matching has size " + std::to_string(m) +
                                        " of " + std::to_string(c.size()),
                                    m, std::move(partial));
}

}  // namespace detail

// Minimizes (1/n) sum_i c(i, sigma(i)); among optimal assignments returns the lexicographically smallest.
inline Assignment solve_min_sum(const CostMatrix& c) {
    const std::size_t n = c.size();
    Assignment out;
    out.kind = AssignmentKind::MinSum;
    if (n == 0) return out;
    // Shortest augmenting path Hungarian method with row potentials u and column potentials v.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = kInf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            if (!std::isfinite(delta)) detail::throw_infeasible(c);
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(n);
    for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = static_cast<int>(j - 1);

    double tol = 1e-9 * (1.0 + c.max_finite());
    detail::Adjacency tight(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::isfinite(c(i, j)) && c(i, j) - u[i + 1] - v[j + 1] <= tol) tight[i].push_back(static_cast<int>(j));
    out.sigma = detail::lex_smallest_perfect(std::move(tight), std::move(match));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += c(i, out.sigma[i]);
    out.value = s / static_cast<double>(n);
    return out;
}

// Minimizes max_i c(i, sigma(i)); lexicographically smallest among optimal assignments.
inline Assignment solve_bottleneck(const CostMatrix& c) {
    const std::size_t n = c.size();
    Assignment out;
    out.kind = AssignmentKind::Bottleneck;
    if (n == 0) return out;
    std::vector<double> vals;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::isfinite(c(i, j))) vals.push_back(c(i, j));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto perfect = [&](double thr, std::vector<int>* m) {
        std::size_t size = 0;
        auto r = detail::hopcroft_karp(detail::finite_graph(c, thr), n, &size);
        if (m) *m = std::move(r);
        return size == n;
    };
    if (vals.empty() || !perfect(vals.back(), nullptr)) detail::throw_infeasible(c);
    std::size_t lo = 0, hi = vals.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (perfect(vals[mid], nullptr)) hi = mid;
        else lo = mid + 1;
    }
    std::vector<int> match;
    perfect(vals[lo], &match);
    out.sigma = detail::lex_smallest_perfect(detail::finite_graph(c, vals[lo]), std::move(match));
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, c(i, out.sigma[i]));
    out.value = m;
    return out;
}

// Up to R rows may be left unassigned: R zero-cost dummy rows and columns, dummy-dummy forbidden.
inline Assignment solve_partial(const CostMatrix& c, std::size_t R, bool bottleneck = false) {
    const std::size_t n = c.size();
    if (R > n) throw ValidationError("cannot drop more pairs than there are rows");
    const std::size_t m = n + R;
    CostMatrix padded(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i < n && j < n) padded(i, j) = c(i, j);
            else if (i >= n && j >= n) padded(i, j) = kInf;
        }
    Assignment full = bottleneck ? solve_bottleneck(padded) : solve_min_sum(padded);
    Assignment out;
    out.kind = bottleneck ? AssignmentKind::PartialBottleneck : AssignmentKind::PartialMinSum;
    out.sigma.assign(n, -1);
    double s = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int j = full.sigma[i];
        if (j < static_cast<int>(n)) {
            out.sigma[i] = j;
            s += c(i, j);
            mx = std::max(mx, c(i, j));
        } else {
            ++out.dropped;
        }
    }
    out.value = bottleneck ? mx : (n ? s / static_cast<double>(n) : 0.0);
    return out;
}

// A point of omega together with the time it is reached (source) or left (target).
struct SpaceTimePoint {
    Point y;
    double s = 0.0;
};

// K_ij = |(y0_i - y1_j, s0_i - (T - s1_j))| when s0_i < T - s1_j, else +inf. Requires convex omega.
inline CostMatrix build_space_time_costs(const std::vector<SpaceTimePoint>& from, const std::vector<SpaceTimePoint>& to, double T,
                                         const ControlRegion& omega) {
    if (!omega.is_convex()) throw ValidationError("space-time costs need a convex control region");
    if (from.size() != to.size()) throw ValidationError("space-time cost sides differ in size");
    std::size_t n = from.size();
    CostMatrix K(n, kInf);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double arrive = T - to[j].s;
            if (from[i].s < arrive) {
                double dtm = arrive - from[i].s;
                K(i, j) = std::sqrt(norm2(from[i].y - to[j].y) + dtm * dtm);
            }
        }
    return K;
}

// Straight motion from a at time ta to b at time tb.
struct TimedSegment {
    Point a, b;
    double ta = 0.0, tb = 0.0;
    Point at(double t) const { return tb > ta ? a + ((t - ta) / (tb - ta)) * (b - a) : a; }
};

struct NonCrossingReport {
    bool ok = true;
    double min_distance = kInf;
    int i = -1, j = -1;
};

// Minimum of |p(t) - q(t)| over [lo, hi] for two linear motions.
inline double min_distance_linear(const TimedSegment& p, const TimedSegment& q, double lo, double hi) {
    Point d0 = p.at(lo) - q.at(lo);
    Point d1 = p.at(hi) - q.at(hi);
    Point dd = d1 - d0;
    double den = norm2(dd);
    double s = den > 0 ? std::clamp(-dot(d0, dd) / den, 0.0, 1.0) : 0.0;
    return norm(d0 + s * dd);
}

inline NonCrossingReport verify_non_crossing(const std::vector<TimedSegment>& segs, double tol = 1e-9) {
    NonCrossingReport r;
    for (std::size_t i = 0; i < segs.size(); ++i)
        for (std::size_t j = i + 1; j < segs.size(); ++j) {
            double lo = std::max(segs[i].ta, segs[j].ta);
            double hi = std::min(segs[i].tb, segs[j].tb);
            if (lo > hi) continue;
            double m = min_distance_linear(segs[i], segs[j], lo, hi);
            if (m < r.min_distance) {
                r.min_distance = m;
                r.i = static_cast<int>(i);
                r.j = static_cast<int>(j);
            }
        }
    r.ok = r.min_distance > tol;
    return r;
}

}  // namespace crowdctl
