#pragma once
/**
 * @file metric.hpp
 * @brief Leaf metric sigma and warping gamma = 1/|Y|^2 of the warped product
 * P x_{1/sqrt(gamma)} R, evaluated in a single global chart of P.
 *
 * One-dimensional leaves are embedded in the two-component types with
 * sigma = diag(sigma11, 1) and every x2 derivative zero, so the n = 2
 * formulas apply unchanged.
 */
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "capgraph/error.hpp"
#include "capgraph/expression.hpp"

namespace capgraph {

using Vec2 = std::array<double, 2>;

/// Symmetric 2x2 matrix stored by its upper triangle.
struct Sym2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    double det() const { return xx * yy - xy * xy; }
    Sym2 inverse() const {
        const double d = det();
        return {yy / d, -xy / d, xx / d};
    }
    Vec2 apply(const Vec2& v) const { return {xx * v[0] + xy * v[1], xy * v[0] + yy * v[1]}; }
    double quad(const Vec2& a, const Vec2& b) const {
        return a[0] * (xx * b[0] + xy * b[1]) + a[1] * (xy * b[0] + yy * b[1]);
    }
    double quad(const Vec2& a) const { return quad(a, a); }
    double min_eigenvalue() const {
        const double m = 0.5 * (xx + yy);
        const double d = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
        return m - d;
    }
};

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

enum class MetricPreset { euclidean, product, radial_warp, custom };

inline const char* to_string(MetricPreset p) {
    switch (p) {
        case MetricPreset::euclidean: return "euclidean";
        case MetricPreset::product: return "product";
        case MetricPreset::radial_warp: return "radial-warp";
        case MetricPreset::custom: return "custom";
    }
    return "?";
}

/**
 * @brief The geometry of the warped product: sigma(x), gamma(x) and their
 * chart derivatives. Derivatives come from symbolic differentiation of the
 * defining expressions unless gradient expressions are supplied.
 */
class MetricField {
public:
    /// sigma = identity, gamma = 1.
    static MetricField euclidean(int dim) {
        return MetricField(dim, MetricPreset::euclidean, Expression(1.0), Expression(0.0), Expression(1.0),
                           Expression(1.0));
    }

    /// Riemannian product P x R: gamma = 1 with a user leaf metric.
    static MetricField product(int dim, Expression s11, Expression s12, Expression s22) {
        return MetricField(dim, MetricPreset::product, std::move(s11), std::move(s12), std::move(s22),
                           Expression(1.0));
    }

    /// sigma = lambda(r)^2 * identity and gamma = gamma(r).
    static MetricField radial_warp(int dim, const Expression& conformal, Expression gamma) {
        const Expression sq = conformal * conformal;
        return MetricField(dim, MetricPreset::radial_warp, sq, Expression(0.0), sq, std::move(gamma));
    }

    /// Fully user-specified metric. Optional explicit gamma gradient is
    /// cross-checked against finite differences by check_consistency().
    static MetricField custom(int dim, Expression s11, Expression s12, Expression s22, Expression gamma,
                              std::optional<std::array<Expression, 2>> grad_gamma = std::nullopt) {
        MetricField m(dim, MetricPreset::custom, std::move(s11), std::move(s12), std::move(s22), std::move(gamma));
        if (grad_gamma) m.dgamma_ = *grad_gamma;
        return m;
    }

    int dim() const { return dim_; }
    MetricPreset preset() const { return preset_; }

    Sym2 sigma(const Vec2& x) const {
        const EvalPoint p = point(x);
        if (dim_ == 1) return {s_[0](p), 0.0, 1.0};
        return {s_[0](p), s_[1](p), s_[2](p)};
    }
    Sym2 sigma_inv(const Vec2& x) const { return sigma(x).inverse(); }
    double sqrt_det_sigma(const Vec2& x) const { return std::sqrt(sigma(x).det()); }

    /// Chart derivatives d sigma / d x_k, k = 0, 1.
    std::array<Sym2, 2> dsigma(const Vec2& x) const {
        const EvalPoint p = point(x);
        std::array<Sym2, 2> out{};
        for (int k = 0; k < 2; ++k) {
            if (dim_ == 1) {
                out[k] = {k == 0 ? ds_[0][0](p) : 0.0, 0.0, 0.0};
            } else {
                out[k] = {ds_[k][0](p), ds_[k][1](p), ds_[k][2](p)};
            }
        }
        return out;
    }

    double gamma(const Vec2& x) const { return gamma_(point(x)); }

    Vec2 grad_gamma(const Vec2& x) const {
        const EvalPoint p = point(x);
        return {dgamma_[0](p), dim_ == 1 ? 0.0 : dgamma_[1](p)};
    }

    /// |Y| = 1/sqrt(gamma).
    double killing_norm(const Vec2& x) const { return 1.0 / std::sqrt(gamma(x)); }

    /**
     * @brief Checks the pointwise invariants: sigma positive definite,
     * gamma > 0, and grad_gamma against central differences (relative
     * error below 1e-6). Throws InvalidInput on failure.
     */
    void check_consistency(const Vec2& x) const {
        const Sym2 s = sigma(x);
        if (!(s.min_eigenvalue() > 0.0) || !std::isfinite(s.det()))
            throw InvalidInput("leaf metric is not positive definite at (" + std::to_string(x[0]) + ", " +
                               std::to_string(x[1]) + ")");
        const double g = gamma(x);
        if (!(g > 0.0) || !std::isfinite(g))
            throw InvalidInput("gamma must be positive at (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) +
                               ")");
        const Vec2 dg = grad_gamma(x);
        for (int k = 0; k < dim_; ++k) {
            const double h = 1e-5 * std::max(1.0, std::fabs(x[k]));
            Vec2 xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd = (gamma(xp) - gamma(xm)) / (2.0 * h);
            const double scale = std::max({std::fabs(fd), std::fabs(dg[k]), 1e-6 * g});
            if (std::fabs(fd - dg[k]) > 1e-6 * scale)
                throw InvalidInput("gamma gradient disagrees with finite differences in component " +
                                   std::to_string(k + 1));
        }
    }

private:
    MetricField(int dim, MetricPreset preset, Expression s11, Expression s12, Expression s22, Expression gamma)
        : dim_(dim), preset_(preset), s_{std::move(s11), std::move(s12), std::move(s22)}, gamma_(std::move(gamma)) {
        if (dim_ != 1 && dim_ != 2) throw InvalidInput("leaf dimension must be 1 or 2");
        for (int k = 0; k < 2; ++k) {
            const Variable v = k == 0 ? Variable::x1 : Variable::x2;
            for (int c = 0; c < 3; ++c) ds_[k][c] = s_[c].derivative(v);
            dgamma_[k] = gamma_.derivative(v);
        }
    }

    EvalPoint point(const Vec2& x) const { return {x[0], dim_ == 1 ? 0.0 : x[1], 0.0}; }

    int dim_;
    MetricPreset preset_;
    std::array<Expression, 3> s_;
    Expression gamma_;
    std::array<std::array<Expression, 3>, 2> ds_;
    std::array<Expression, 2> dgamma_;
};

}  // namespace capgraph
