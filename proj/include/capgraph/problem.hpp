#pragma once
/**
 * @file problem.hpp
 * @brief Capillary data: prescribed mean curvature Psi(x, s), contact angle
 * cosine Phi(x, s), the structural conditions they must satisfy, and the
 * a-priori height bound that follows from positive gravity.
 */
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "capgraph/error.hpp"
#include "capgraph/expression.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"

namespace capgraph {

using DataFunction = std::function<double(const Vec2&, double)>;

/// Constants the user may declare; cross-checked against samples.
struct DeclaredConstants {
    std::optional<double> beta;
    std::optional<double> mu;
    std::optional<double> beta_prime;
    std::optional<double> c_psi;
    std::optional<double> c_phi;
};

struct CapillaryProblem {
    DataFunction psi;      // prescribed nH
    DataFunction dpsi_ds;  // d Psi / ds
    DataFunction phi;      // prescribed <N, nu> on Gamma
    DataFunction dphi_ds;  // d Phi / ds, must be <= 0
    DeclaredConstants declared;
    std::string psi_text;
    std::string phi_text;

    /**
     * @brief Builds data from expressions. Missing s-derivatives are derived
     * symbolically (UnsupportedDerivative if that is impossible).
     */
    static CapillaryProblem from_expressions(const Expression& psi, const Expression& phi,
                                             std::optional<Expression> dpsi_ds = std::nullopt,
                                             std::optional<Expression> dphi_ds = std::nullopt) {
        const Expression dpsi = dpsi_ds ? *dpsi_ds : psi.derivative(Variable::s);
        const Expression dphi = dphi_ds ? *dphi_ds : phi.derivative(Variable::s);
        CapillaryProblem p;
        p.psi = [psi](const Vec2& x, double s) { return psi(x[0], x[1], s); };
        p.dpsi_ds = [dpsi](const Vec2& x, double s) { return dpsi(x[0], x[1], s); };
        p.phi = [phi](const Vec2& x, double s) { return phi(x[0], x[1], s); };
        p.dphi_ds = [dphi](const Vec2& x, double s) { return dphi(x[0], x[1], s); };
        p.psi_text = psi.to_string();
        p.phi_text = phi.to_string();
        return p;
    }

    static CapillaryProblem from_strings(const std::string& psi, const std::string& phi) {
        return from_expressions(Expression::parse(psi), Expression::parse(phi));
    }
};

struct ConditionResult {
    std::string id;    // "i" .. "v", or "dpsi_ds-consistency"
    std::string name;
    bool passed = false;
    double margin = 0.0;  // positive when satisfied
    std::string detail;
};

struct ValidationReport {
    std::vector<ConditionResult> conditions;
    double beta = 0.0;        // effective: min(sampled, declared)
    double mu = 0.0;          // effective: max(sampled, declared)
    double beta_prime = 0.0;  // effective: min(sampled, declared)
    double c_psi = 0.0;       // sampled sup |Psi| + |grad Psi|
    double c_phi = 0.0;       // sampled |Phi|_2
    double sampled_beta = 0.0;
    double sampled_mu = 0.0;
    std::pair<double, double> s_range{0.0, 0.0};

    bool all_passed() const {
        return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.passed; });
    }
    const ConditionResult* find(const std::string& id) const {
        for (const auto& c : conditions)
            if (c.id == id) return &c;
        return nullptr;
    }
};

namespace problem_detail {

inline std::vector<Vec2> interior_samples(const Mesh& mesh) {
    std::vector<Vec2> pts(mesh.vertices.begin(), mesh.vertices.end());
    const int nv = mesh.vertices_per_cell();
    for (const auto& c : mesh.cells) {
        Vec2 m{0.0, 0.0};
        for (int i = 0; i < nv; ++i) {
            m[0] += mesh.vertices[c[i]][0] / nv;
            m[1] += mesh.vertices[c[i]][1] / nv;
        }
        pts.push_back(m);
    }
    return pts;
}

inline std::vector<Vec2> boundary_samples(const Mesh& mesh) {
    std::vector<Vec2> pts;
    for (const auto& f : mesh.boundary) {
        pts.push_back(mesh.vertices[f.v[0]]);
        if (f.vertex_count == 2) {
            const Vec2& a = mesh.vertices[f.v[0]];
            const Vec2& b = mesh.vertices[f.v[1]];
            pts.push_back({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])});
        }
    }
    return pts;
}

// Nested grid: multiples of `step` inside the range plus both end points, so
// enlarging the range only adds samples.
inline std::vector<double> s_grid(double lo, double hi, double step) {
    std::vector<double> s{lo, hi, 0.0};
    for (double k = std::ceil(lo / step); k * step <= hi; k += 1.0) s.push_back(k * step);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    s.erase(std::remove_if(s.begin(), s.end(), [&](double v) { return v < lo || v > hi; }), s.end());
    return s;
}

inline double fd_step(double v) { return 1e-5 * std::max(1.0, std::fabs(v)); }

}  // namespace problem_detail

/**
 * @brief Samples the structural conditions (i)-(v) on mesh points and an
 * s-grid covering @p s_range. Violations are reported, never thrown.
 *
 * (i)   |Psi| + |grad Psi| <= C_psi (checked when C_psi is declared)
 * (ii)  d Psi / ds >= beta > 0
 * (iii) d Phi / ds <= 0
 * (iv)  1 - Phi^2 >= beta' > 0
 * (v)   |Phi|_2 <= C_phi (checked when C_phi is declared)
 */
inline ValidationReport validate_conditions(const CapillaryProblem& problem, const Mesh& mesh,
                                            const MetricField& metric, std::pair<double, double> s_range,
                                            double s_step = 0.25) {
    using problem_detail::fd_step;
    if (!(s_range.first <= s_range.second)) throw InvalidInput("s_range must be an ordered interval");
    const auto interior = problem_detail::interior_samples(mesh);
    const auto bdry = problem_detail::boundary_samples(mesh);
    const auto svals = problem_detail::s_grid(s_range.first, s_range.second, s_step);
    const double inf = std::numeric_limits<double>::infinity();

    double beta = inf, mu = -inf, c_psi = 0.0, worst_consistency = 0.0;
    for (const auto& x : interior) {
        const Sym2 si = metric.sigma_inv(x);
        const double gam = metric.gamma(x);
        mu = std::max(mu, problem.psi(x, 0.0));
        for (double s : svals) {
            const double val = problem.psi(x, s);
            const double ds = problem.dpsi_ds(x, s);
            beta = std::min(beta, ds);

            const double hs = fd_step(s);
            const double fd = (problem.psi(x, s + hs) - problem.psi(x, s - hs)) / (2.0 * hs);
            const double scale = std::max({std::fabs(fd), std::fabs(ds), 1e-8});
            worst_consistency = std::max(worst_consistency, std::fabs(fd - ds) / scale);

            Vec2 gx{0.0, 0.0};
            for (int k = 0; k < metric.dim(); ++k) {
                const double h = fd_step(x[k]);
                Vec2 xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                gx[k] = (problem.psi(xp, s) - problem.psi(xm, s)) / (2.0 * h);
            }
            const double grad_norm = std::sqrt(si.quad(gx) + gam * ds * ds);
            c_psi = std::max(c_psi, std::fabs(val) + grad_norm);
        }
    }

    double max_dphi = -inf, beta_prime = inf, c_phi = 0.0;
    for (const auto& x : bdry) {
        for (double s : svals) {
            const double f = problem.phi(x, s);
            max_dphi = std::max(max_dphi, problem.dphi_ds(x, s));
            beta_prime = std::min(beta_prime, 1.0 - f * f);
            // C^2 seminorms by central differences in (x, s)
            double d1 = 0.0, d2 = 0.0;
            for (int k = 0; k <= metric.dim(); ++k) {
                const bool along_s = k == metric.dim();
                const double h = 1e-4 * std::max(1.0, std::fabs(along_s ? s : x[k]));
                Vec2 xp = x, xm = x;
                double sp = s, sm = s;
                if (along_s) {
                    sp += h;
                    sm -= h;
                } else {
                    xp[k] += h;
                    xm[k] -= h;
                }
                const double fp = problem.phi(xp, sp), fm = problem.phi(xm, sm);
                d1 = std::max(d1, std::fabs(fp - fm) / (2.0 * h));
                d2 = std::max(d2, std::fabs(fp - 2.0 * f + fm) / (h * h));
            }
            c_phi = std::max(c_phi, std::fabs(f) + d1 + d2);
        }
    }
    if (bdry.empty()) {
        max_dphi = 0.0;
        beta_prime = 1.0;
    }

    ValidationReport rep;
    rep.s_range = s_range;
    rep.sampled_beta = beta;
    rep.sampled_mu = mu;
    rep.beta = problem.declared.beta ? std::min(beta, *problem.declared.beta) : beta;
    rep.mu = problem.declared.mu ? std::max(mu, *problem.declared.mu) : mu;
    rep.beta_prime = problem.declared.beta_prime ? std::min(beta_prime, *problem.declared.beta_prime) : beta_prime;
    rep.c_psi = c_psi;
    rep.c_phi = c_phi;

    auto add = [&](std::string id, std::string name, bool ok, double margin, std::string detail) {
        rep.conditions.push_back({std::move(id), std::move(name), ok, margin, std::move(detail)});
    };
    const auto& d = problem.declared;
    add("i", "bounded potential", !d.c_psi || c_psi <= *d.c_psi, d.c_psi ? *d.c_psi - c_psi : 0.0,
        "sampled sup |Psi| + |grad Psi| = " + std::to_string(c_psi));
    {
        const bool declared_ok = !d.beta || (*d.beta > 0.0 && beta >= *d.beta);
        add("ii", "positive gravity", beta > 0.0 && declared_ok, rep.beta,
            "sampled inf dPsi/ds = " + std::to_string(beta));
    }
    add("iii", "angle monotone in s", max_dphi <= 1e-14, -max_dphi,
        "sampled sup dPhi/ds = " + std::to_string(max_dphi));
    {
        const bool declared_ok = !d.beta_prime || beta_prime >= *d.beta_prime;
        add("iv", "angle bounded away from +-1", beta_prime > 0.0 && declared_ok, rep.beta_prime,
            "sampled inf 1 - Phi^2 = " + std::to_string(beta_prime));
    }
    add("v", "angle C2 bound", !d.c_phi || c_phi <= *d.c_phi, d.c_phi ? *d.c_phi - c_phi : 0.0,
        "sampled |Phi|_2 = " + std::to_string(c_phi));
    add("dpsi_ds-consistency", "dPsi/ds matches central differences", worst_consistency <= 1e-6,
        1e-6 - worst_consistency, "worst relative error = " + std::to_string(worst_consistency));
    return rep;
}

/// Default s-interval used when the caller does not supply one.
inline constexpr std::pair<double, double> kDefaultSRange{-10.0, 10.0};

struct HeightBound {
    double value = 0.0;   // max(0, raw)
    double raw = 0.0;     // ratio * mu / beta
    double ratio = 1.0;   // sup |Y| / inf |Y|
    double mu = 0.0;
    double beta = 0.0;
    bool degenerate = false;  // mu < 0: only the one-sided statement survives
};

/**
 * @brief |u| <= (sup |Y| / inf |Y|) (mu / beta) with |Y| = gamma^{-1/2},
 * sup/inf over vertices and cell quadrature points.
 * Throws PreconditionError when beta <= 0.
 */
inline HeightBound height_bound(const ValidationReport& report, const MetricField& metric, const Mesh& mesh) {
    if (!(report.beta > 0.0)) throw PreconditionError("height bound requires beta > 0");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    auto visit = [&](const Vec2& x) {
        const double y = metric.killing_norm(x);
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    };
    for (const auto& v : mesh.vertices) visit(v);
    const auto& rule = mesh.dim == 1 ? quadrature::segment() : quadrature::triangle();
    for (const auto& c : mesh.cells) {
        for (const auto& b : rule.bary) {
            Vec2 x{0.0, 0.0};
            for (int i = 0; i < mesh.vertices_per_cell(); ++i) {
                x[0] += b[i] * mesh.vertices[c[i]][0];
                x[1] += b[i] * mesh.vertices[c[i]][1];
            }
            visit(x);
        }
    }
    HeightBound hb;
    hb.ratio = hi / lo;
    hb.mu = report.mu;
    hb.beta = report.beta;
    hb.raw = hb.ratio * report.mu / report.beta;
    hb.degenerate = report.mu < 0.0;
    hb.value = std::max(0.0, hb.raw);
    return hb;
}

inline HeightBound height_bound(const CapillaryProblem& problem, const MetricField& metric, const Mesh& mesh) {
    return height_bound(validate_conditions(problem, mesh, metric, kDefaultSRange), metric, mesh);
}

}  // namespace capgraph
