#pragma once
/**
 * @file oracle1d.hpp
 * @brief Independent reference solver for one-dimensional leaves: a
 * finite-volume discretization of
 *
 *   ( gamma^{-1/2} sigma^{-1/2} u' / W )' = sqrt(sigma) gamma^{-1/2} tau Psi(x, u),
 *   u' / (sqrt(sigma) W) = -tau Phi at a,  +tau Phi at b,
 *
 * on a dense uniform grid, solved by full Newton with a tridiagonal
 * Jacobian. Shares no code with the finite-element path beyond the data.
 */
#include <cmath>
#include <string>
#include <vector>

#include "capgraph/error.hpp"
#include "capgraph/metric.hpp"
#include "capgraph/problem.hpp"

namespace capgraph {

/// The oracle did not converge; a test using it is inconclusive.
class OracleFailed : public Error {
public:
    using Error::Error;
};

struct DenseSolution {
    double a = 0.0;
    double b = 1.0;
    std::vector<double> x;
    std::vector<double> u;
    int newton_iterations = 0;

    /// Piecewise-linear evaluation on the dense grid.
    double operator()(double at) const {
        const double m = static_cast<double>(u.size() - 1);
        double t = (at - a) / (b - a) * m;
        t = std::clamp(t, 0.0, m);
        const auto i = std::min(static_cast<std::size_t>(t), u.size() - 2);
        const double w = t - static_cast<double>(i);
        return (1.0 - w) * u[i] + w * u[i + 1];
    }
};

namespace oracle_detail {

// Thomas algorithm for a tridiagonal system (lower, diag, upper).
inline std::vector<double> solve_tridiagonal(std::vector<double> lo, std::vector<double> di, std::vector<double> up,
                                             std::vector<double> rhs) {
    const std::size_t n = di.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (di[i - 1] == 0.0) throw OracleFailed("zero pivot in tridiagonal solve");
        const double m = lo[i] / di[i - 1];
        di[i] -= m * up[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / di[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - up[i] * x[i + 1]) / di[i];
    return x;
}

}  // namespace oracle_detail

/**
 * @brief Dense-grid solution of the one-dimensional problem N_tau on
 * [a, b] with @p m_dense cells. Reaches tau through the steps 1/4, 1/2,
 * 3/4, 1 from u = 0. Throws OracleFailed when Newton does not converge.
 */
inline DenseSolution oracle_1d_solve(const CapillaryProblem& problem, const MetricField& metric, double a, double b,
                                     int m_dense, double tau = 1.0, double tol = 1e-12) {
    if (metric.dim() != 1) throw InvalidInput("oracle requires a one-dimensional leaf");
    if (!(a < b) || m_dense < 2) throw InvalidInput("oracle needs a < b and m_dense >= 2");
    const std::size_t n = static_cast<std::size_t>(m_dense) + 1;
    const double dx = (b - a) / m_dense;

    DenseSolution sol;
    sol.a = a;
    sol.b = b;
    sol.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.x[i] = i + 1 == n ? b : a + dx * static_cast<double>(i);

    // Grid coefficients: at nodes rho = sqrt(sigma / gamma); at midpoints the
    // flux factor c = 1/sqrt(gamma sigma) with gamma, sigma for W.
    std::vector<double> rho(n), g_node(n), mid_gamma(n - 1), mid_sigma(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 x{sol.x[i], 0.0};
        g_node[i] = metric.gamma(x);
        rho[i] = std::sqrt(metric.sigma(x).xx / g_node[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec2 x{0.5 * (sol.x[i] + sol.x[i + 1]), 0.0};
        mid_gamma[i] = metric.gamma(x);
        mid_sigma[i] = metric.sigma(x).xx;
    }

    auto flux = [&](std::size_t i, const std::vector<double>& u, double& dflux) {
        const double p = (u[i + 1] - u[i]) / dx;
        const double gam = mid_gamma[i], sig = mid_sigma[i];
        const double c = 1.0 / std::sqrt(gam * sig);
        const double q = gam + p * p / sig;
        dflux = c * gam / (q * std::sqrt(q));
        return c * p / std::sqrt(q);
    };

    auto evaluate = [&](const std::vector<double>& u, double t, std::vector<double>* lo, std::vector<double>* di,
                        std::vector<double>* up) {
        std::vector<double> G(n, 0.0);
        if (lo) {
            lo->assign(n, 0.0);
            di->assign(n, 0.0);
            up->assign(n, 0.0);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double dF = 0.0;
            const double F = flux(i, u, dF);
            const double wl = i == 0 ? 2.0 / dx : 1.0 / dx;
            const double wr = i + 2 == n ? 2.0 / dx : 1.0 / dx;
            G[i] += wl * F;
            G[i + 1] -= wr * F;
            if (lo) {
                // dF/du_{i+1} = dF/dx, dF/du_i = -dF/dx
                (*di)[i] += -wl * dF / dx;
                (*up)[i] += wl * dF / dx;
                (*lo)[i + 1] += wr * dF / dx;
                (*di)[i + 1] += -wr * dF / dx;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 x{sol.x[i], 0.0};
            G[i] -= rho[i] * t * problem.psi(x, u[i]);
            if (lo) (*di)[i] -= rho[i] * t * problem.dpsi_ds(x, u[i]);
        }
        // Boundary fluxes F(a) = -gamma^{-1/2} tau Phi, F(b) = +gamma^{-1/2} tau Phi.
        const double half = 2.0 / dx;
        {
            const Vec2 x{a, 0.0};
            const double ig = 1.0 / std::sqrt(g_node[0]);
            G[0] -= half * (-ig * t * problem.phi(x, u[0]));
            if (lo) (*di)[0] -= half * (-ig * t * problem.dphi_ds(x, u[0]));
        }
        {
            const Vec2 x{b, 0.0};
            const double ig = 1.0 / std::sqrt(g_node[n - 1]);
            G[n - 1] += half * (ig * t * problem.phi(x, u[n - 1]));
            if (lo) (*di)[n - 1] += half * (ig * t * problem.dphi_ds(x, u[n - 1]));
        }
        return G;
    };

    auto inf_norm = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    };
    auto two_norm = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x * x;
        return std::sqrt(m);
    };

    std::vector<double> u(n, 0.0);
    for (double t : {0.25 * tau, 0.5 * tau, 0.75 * tau, tau}) {
        // Residual scale: equations are divided by dx; compare against dx-free tolerance.
        for (int it = 0;; ++it) {
            std::vector<double> lo, di, up;
            const auto G = evaluate(u, t, &lo, &di, &up);
            if (inf_norm(G) * dx <= tol) break;
            if (it >= 100) throw OracleFailed("oracle Newton did not converge");
            std::vector<double> rhs(n);
            for (std::size_t i = 0; i < n; ++i) rhs[i] = -G[i];
            const auto step = oracle_detail::solve_tridiagonal(lo, di, up, rhs);
            const double g0 = two_norm(G);
            double lambda = 1.0;
            bool ok = false;
            for (int h = 0; h < 40; ++h, lambda *= 0.5) {
                std::vector<double> trial(n);
                for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + lambda * step[i];
                const double g1 = two_norm(evaluate(trial, t, nullptr, nullptr, nullptr));
                if (std::isfinite(g1) && g1 <= (1.0 - 1e-4 * lambda) * g0) {
                    u = std::move(trial);
                    ok = true;
                    break;
                }
            }
            if (!ok) {
                // Already at the rounding floor of the residual?
                if (inf_norm(G) * dx <= 1e3 * tol) break;
                throw OracleFailed("oracle line search failed");
            }
            ++sol.newton_iterations;
        }
    }
    sol.u = std::move(u);
    return sol;
}

}  // namespace capgraph
