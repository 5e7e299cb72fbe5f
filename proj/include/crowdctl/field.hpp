#pragma once

#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "expression.hpp"
#include "geometry.hpp"

namespace crowdctl {

struct FieldBounds {
    double sup_norm = 0.0;   // M
    double lipschitz = 0.0;  // L
};

// Autonomous, globally Lipschitz drift v : R^d -> R^d.
class VectorField {
public:
    enum class Kind { Constant, Rotation, Expression };

    static VectorField constant(const Point& value) {
        VectorField f;
        f.kind_ = Kind::Constant;
        f.dim_ = value.dim;
        f.constant_ = value;
        return f;
    }

    // v(x) = rate * (-x2, x1)
    static VectorField rotation(double rate = 1.0) {
        VectorField f;
        f.kind_ = Kind::Rotation;
        f.dim_ = 2;
        f.rate_ = rate;
        return f;
    }

    // Comma-separated components over x1..xd.
    static VectorField parse(const std::string& text, int dim) {
        if (dim < 1 || dim > kMaxDim) throw ValidationError("field dimension must be 1..3");
        std::vector<Expression> comps;
        std::size_t start = 0;
        int depth = 0;
        for (std::size_t i = 0; i <= text.size(); ++i) {
            if (i < text.size() && text[i] == '(') ++depth;
            if (i < text.size() && text[i] == ')') --depth;
            if (i == text.size() || (text[i] == ',' && depth == 0)) {
                comps.push_back(Expression::parse(std::string_view(text).substr(start, i - start), dim, start));
                start = i + 1;
            }
        }
        if (static_cast<int>(comps.size()) != dim)
            throw ValidationError("field has " + std::to_string(comps.size()) + " components, expected " + std::to_string(dim));

        bool all_const = true;
        for (const auto& c : comps) all_const = all_const && c.is_constant();
        if (all_const) {
            Point v(dim);
            for (int i = 0; i < dim; ++i) v[i] = comps[i].constant_value();
            return constant(v);
        }
        if (dim == 2 && is_unit_rotation(comps)) return rotation(1.0);

        VectorField f;
        f.kind_ = Kind::Expression;
        f.dim_ = dim;
        f.exprs_ = std::make_shared<const std::vector<Expression>>(std::move(comps));
        return f;
    }

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    double rotation_rate() const { return rate_; }
    const Point& constant_value() const { return constant_; }

    Point operator()(const Point& x) const {
        switch (kind_) {
            case Kind::Constant: return constant_;
            case Kind::Rotation: {
                Point r(2);
                r[0] = -rate_ * x[1];
                r[1] = rate_ * x[0];
                return r;
            }
            case Kind::Expression: {
                Point r(dim_);
                for (int i = 0; i < dim_; ++i) r[i] = (*exprs_)[i].eval(x);
                return r;
            }
        }
        return Point(dim_);
    }

    // Sup norm and Lipschitz constant over `box`; exact for the closed-form kinds,
    // sampled with a 25% safety factor for expressions.
    FieldBounds bounds(const Box& box) const {
        FieldBounds b;
        if (kind_ == Kind::Constant) {
            b.sup_norm = norm(constant_);
            return b;
        }
        if (kind_ == Kind::Rotation) {
            double r = 0.0;
            for (const auto& c : box.corners()) r = std::max(r, norm(c));
            b.sup_norm = std::abs(rate_) * r;
            b.lipschitz = std::abs(rate_);
            return b;
        }
        const int per_axis = dim_ == 1 ? 257 : dim_ == 2 ? 41 : 13;
        double scale = std::max(1e-3, box.diameter());
        double h = 1e-6 * scale;
        Point x(dim_);
        std::vector<int> idx(dim_, 0);
        for (;;) {
            for (int i = 0; i < dim_; ++i) x[i] = box.lo[i] + box.width(i) * idx[i] / (per_axis - 1);
            Point f0 = (*this)(x);
            b.sup_norm = std::max(b.sup_norm, norm(f0));
            double frob = 0.0;
            for (int j = 0; j < dim_; ++j) {
                Point xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                Point g = ((*this)(xp) - (*this)(xm)) * (0.5 / h);
                frob += norm2(g);
            }
            b.lipschitz = std::max(b.lipschitz, std::sqrt(frob));
            int k = 0;
            while (k < dim_ && ++idx[k] == per_axis) idx[k++] = 0;
            if (k == dim_) break;
        }
        b.sup_norm *= 1.25;
        b.lipschitz *= 1.25;
        return b;
    }

private:
    Kind kind_ = Kind::Constant;
    int dim_ = 0;
    Point constant_;
    double rate_ = 0.0;
    std::shared_ptr<const std::vector<Expression>> exprs_;

    static bool is_unit_rotation(const std::vector<Expression>& c) {
        using Op = Expression::Op;
        const auto& n0 = c[0].nodes();
        const auto& r0 = c[0].root();
        const auto& r1 = c[1].root();
        bool first = r0.op == Op::Neg && n0[r0.a].op == Op::Var && n0[r0.a].var == 1;
        bool second = r1.op == Op::Var && r1.var == 0;
        return first && second;
    }
};

}  // namespace crowdctl
