#pragma once
/**
 * @file mms.hpp
 * @brief Manufactured capillary problems: data (Psi, Phi) for which a given
 * closed-form u is the exact solution at tau = 1.
 */
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "capgraph/error.hpp"
#include "capgraph/expression.hpp"
#include "capgraph/geometry.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"
#include "capgraph/problem.hpp"

namespace capgraph {

/// Chart covector normal of the exact domain boundary, pointing inward.
using BoundaryNormalFn = std::function<Vec2(const Vec2&)>;

/// Inward normal of the disk or of the outer circle of an annulus.
inline BoundaryNormalFn disk_inward_normal() {
    return [](const Vec2& x) {
        const double r = std::hypot(x[0], x[1]);
        return Vec2{-x[0] / r, -x[1] / r};
    };
}

/// Inward normal of the annulus inner_radius <= |x| <= radius.
inline BoundaryNormalFn annulus_inward_normal(double inner_radius, double radius) {
    const double mid = 0.5 * (inner_radius + radius);
    return [mid](const Vec2& x) {
        const double r = std::hypot(x[0], x[1]);
        const double sgn = r > mid ? -1.0 : 1.0;
        return Vec2{sgn * x[0] / r, sgn * x[1] / r};
    };
}

/// u_exact with its symbolic first and second chart derivatives.
class ExactSolution {
public:
    explicit ExactSolution(Expression u, int dim) : dim_(dim), u_(std::move(u)) {
        ux_ = u_.derivative(Variable::x1);
        uxx_ = ux_.derivative(Variable::x1);
        if (dim_ == 2) {
            uy_ = u_.derivative(Variable::x2);
            uxy_ = ux_.derivative(Variable::x2);
            uyy_ = uy_.derivative(Variable::x2);
        }
    }

    double value(const Vec2& x) const { return u_(x[0], x[1]); }
    Vec2 gradient(const Vec2& x) const { return {ux_(x[0], x[1]), dim_ == 2 ? uy_(x[0], x[1]) : 0.0}; }
    Sym2 hessian(const Vec2& x) const {
        if (dim_ == 1) return {uxx_(x[0], x[1]), 0.0, 0.0};
        return {uxx_(x[0], x[1]), uxy_(x[0], x[1]), uyy_(x[0], x[1])};
    }
    ScalarField interpolate(const Mesh& mesh) const {
        ScalarField out(static_cast<Eigen::Index>(mesh.vertices.size()));
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) out[static_cast<Eigen::Index>(v)] = value(mesh.vertices[v]);
        return out;
    }
    const Expression& expression() const { return u_; }

private:
    int dim_;
    Expression u_, ux_, uy_, uxx_, uxy_, uyy_;
};

/**
 * @brief Psi(x, s) = nH[u_exact](x) + kappa0 (s - u_exact(x)) and
 * Phi(x) = <N, nu> of u_exact on Gamma, so u_exact solves N_1 exactly.
 *
 * The conormal comes from @p normal when given, otherwise from the nearest
 * mesh boundary facet. Throws InvalidInput when |Phi| >= 1 at a boundary
 * sample (no admissible contact angle).
 */
inline CapillaryProblem mms_manufacture(const MetricField& metric, const Mesh& mesh, const Expression& u_exact,
                                        double kappa0 = 1.0, BoundaryNormalFn normal = nullptr) {
    if (!(kappa0 > 0.0)) throw InvalidInput("kappa0 must be positive");
    auto exact = std::make_shared<const ExactSolution>(u_exact, metric.dim());

    if (!normal) {
        auto facets = std::make_shared<std::vector<std::pair<Vec2, Vec2>>>();  // (midpoint, normal)
        for (const auto& f : mesh.boundary) {
            Vec2 m = mesh.vertices[f.v[0]];
            if (f.vertex_count == 2) {
                const Vec2& b = mesh.vertices[f.v[1]];
                m = {0.5 * (m[0] + b[0]), 0.5 * (m[1] + b[1])};
            }
            facets->push_back({m, f.normal});
        }
        normal = [facets](const Vec2& x) {
            double best = std::numeric_limits<double>::infinity();
            Vec2 n{1.0, 0.0};
            for (const auto& [m, nn] : *facets) {
                const double d = std::hypot(x[0] - m[0], x[1] - m[1]);
                if (d < best) {
                    best = d;
                    n = nn;
                }
            }
            return n;
        };
    }

    const auto mp = std::make_shared<const MetricField>(metric);
    auto angle = [exact, mp, normal](const Vec2& x) {
        const Vec2 n = normal(x);
        const Sym2 si = mp->sigma_inv(x);
        const Vec2 raised = si.apply(n);
        const double len = std::sqrt(si.quad(n));
        const Vec2 nu{raised[0] / len, raised[1] / len};
        return contact_angle(*mp, x, exact->gradient(x), nu);
    };

    CapillaryProblem p;
    p.psi = [exact, mp, kappa0](const Vec2& x, double s) {
        const double nh = mean_curvature_pointwise(*mp, x, exact->gradient(x), exact->hessian(x));
        return nh + kappa0 * (s - exact->value(x));
    };
    p.dpsi_ds = [kappa0](const Vec2&, double) { return kappa0; };
    p.phi = [angle](const Vec2& x, double) { return angle(x); };
    p.dphi_ds = [](const Vec2&, double) { return 0.0; };
    p.psi_text = "mms[" + u_exact.to_string() + "]";
    p.phi_text = "mms[" + u_exact.to_string() + "]";

    for (const auto& f : mesh.boundary)
        for (int i = 0; i < f.vertex_count; ++i)
            if (std::fabs(angle(mesh.vertices[f.v[i]])) >= 1.0)
                throw InvalidInput("manufactured contact angle has |Phi| >= 1");
    return p;
}

}  // namespace capgraph
