#pragma once
/**
 * @file geometry.hpp
 * @brief Pointwise quantities of the Killing graph of u: slope factor W,
 * unit normal N, contact angle with the Killing cylinder and the mean
 * curvature operator in strong form.
 *
 * Conventions: grad_u is the chart covector du; its sigma-raised vector is
 * v = sigma^{-1} du and |du|^2_sigma = du . v. The ambient metric in the
 * (s, x) chart is sigma + (1/gamma) ds^2 with Y = d/ds.
 */
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "capgraph/error.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"
#include "capgraph/recovery.hpp"

namespace capgraph {

namespace geometry_detail {

inline void require_finite(const Vec2& x, const Vec2& g) {
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(g[0]) || !std::isfinite(g[1]))
        throw InvalidInput("non-finite point or gradient");
}

// Product of symmetric matrices a*b*a (symmetric result).
inline Sym2 sandwich(const Sym2& a, const Sym2& b) {
    const double m00 = a.xx * b.xx + a.xy * b.xy, m01 = a.xx * b.xy + a.xy * b.yy;
    const double m10 = a.xy * b.xx + a.yy * b.xy, m11 = a.xy * b.xy + a.yy * b.yy;
    return {m00 * a.xx + m01 * a.xy, m00 * a.xy + m01 * a.yy, m10 * a.xy + m11 * a.yy};
}

inline double trace_product(const Sym2& a, const Sym2& b) { return a.xx * b.xx + 2.0 * a.xy * b.xy + a.yy * b.yy; }

}  // namespace geometry_detail

/// W = sqrt(gamma + |du|^2_sigma).
inline double slope_factor(const MetricField& metric, const Vec2& x, const Vec2& grad_u) {
    geometry_detail::require_finite(x, grad_u);
    return std::sqrt(metric.gamma(x) + metric.sigma_inv(x).quad(grad_u));
}

/// Graph point data: slope factor and the ambient components of N.
struct GraphPointFrame {
    Vec2 x{};
    Vec2 grad_u{};
    double W = 1.0;
    double normal_s = 1.0;  // ds component, gamma / W
    Vec2 normal_x{};        // chart components, -sigma^{ij} d_j u / W

    /// sigma(N_x, N_x) + N_s^2 / gamma; equals 1 up to rounding.
    double ambient_norm_sq(const MetricField& metric) const {
        return metric.sigma(x).quad(normal_x) + normal_s * normal_s / metric.gamma(x);
    }
    /// <N, Y> in the ambient metric; equals 1/W.
    double along_killing(const MetricField& metric) const { return normal_s / metric.gamma(x); }
    /// <N, nu> for a horizontal vector nu.
    double angle_with(const MetricField& metric, const Vec2& nu) const {
        return metric.sigma(x).quad(normal_x, nu);
    }
};

/// N = (gamma Y - grad u) / W, the unit normal with <N, Y> > 0.
inline GraphPointFrame graph_normal(const MetricField& metric, const Vec2& x, const Vec2& grad_u) {
    GraphPointFrame f;
    f.x = x;
    f.grad_u = grad_u;
    f.W = slope_factor(metric, x, grad_u);
    const Vec2 v = metric.sigma_inv(x).apply(grad_u);
    f.normal_s = metric.gamma(x) / f.W;
    f.normal_x = {-v[0] / f.W, -v[1] / f.W};
    return f;
}

/**
 * @brief <N, nu> = -du(nu) / W at a boundary point, for the inward
 * sigma-unit conormal nu. Throws InvalidInput when sigma(nu, nu) differs
 * from 1 by more than 1e-10.
 */
inline double contact_angle(const MetricField& metric, const Vec2& x, const Vec2& grad_u, const Vec2& nu) {
    geometry_detail::require_finite(x, grad_u);
    const double nn = metric.sigma(x).quad(nu);
    if (std::fabs(nn - 1.0) > 1e-10) throw InvalidInput("conormal is not sigma-unit");
    return -dot(grad_u, nu) / slope_factor(metric, x, grad_u);
}

/**
 * @brief div(grad u / W) - <grad gamma / 2 gamma, grad u / W> at x, given
 * the chart gradient and Hessian of u there.
 */
inline double mean_curvature_pointwise(const MetricField& metric, const Vec2& x, const Vec2& g, const Sym2& H) {
    using geometry_detail::sandwich;
    using geometry_detail::trace_product;
    geometry_detail::require_finite(x, g);
    const Sym2 si = metric.sigma_inv(x);
    const auto ds = metric.dsigma(x);
    const std::array<Sym2, 2> dsi{sandwich(si, ds[0]), sandwich(si, ds[1])};  // minus d(sigma^{-1})
    const double gam = metric.gamma(x);
    const Vec2 dgam = metric.grad_gamma(x);

    const Vec2 v = si.apply(g);
    const double W = std::sqrt(gam + dot(g, v));
    const Vec2 Hv = H.apply(v);

    Vec2 dW{};
    for (int k = 0; k < 2; ++k) dW[k] = (dgam[k] - dsi[k].quad(g) + 2.0 * Hv[k]) / (2.0 * W);

    // d_i v^i = d_i(sigma^{ij}) g_j + sigma^{ij} H_ij
    const Vec2 r0 = dsi[0].apply(g);
    const Vec2 r1 = dsi[1].apply(g);
    const double div_v = -(r0[0] + r1[1]) + trace_product(si, H);

    Vec2 dlog{};
    for (int k = 0; k < 2; ++k) dlog[k] = 0.5 * trace_product(si, ds[k]);

    const double div_X = div_v / W - dot(v, dW) / (W * W) + dot(v, dlog) / W;
    return div_X - dot(dgam, v) / (2.0 * gam * W);
}

/**
 * @brief Strong-form mean curvature at a mesh vertex, with derivatives of u
 * from a quadratic least-squares fit over the vertex patch. Throws
 * DegenerateStencil when the patch cannot support the fit.
 */
inline double mean_curvature_strong(const MetricField& metric, const Mesh& mesh, const ScalarField& u, int vertex,
                                    const PatchRecovery& recovery) {
    const LocalJet jet = recovery.fit(u, vertex);
    return mean_curvature_pointwise(metric, mesh.vertices[vertex], jet.grad, jet.hess);
}

inline double mean_curvature_strong(const MetricField& metric, const Mesh& mesh, const ScalarField& u, int vertex) {
    return mean_curvature_strong(metric, mesh, u, vertex, PatchRecovery(mesh));
}

}  // namespace capgraph
