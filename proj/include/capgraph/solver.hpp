#pragma once
/**
 * @file solver.hpp
 * @brief Damped Newton corrector and adaptive continuation in tau from the
 * trivial solution u = 0 of N_0 to the full problem N_1.
 */
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "capgraph/assembly.hpp"
#include "capgraph/error.hpp"
#include "capgraph/problem.hpp"

namespace capgraph {

struct NewtonOptions {
    double tol = 1e-10;        // on the max-norm of the residual
    int max_iter = 50;
    int max_halvings = 30;
    double linear_tol = 1e-12; // normwise backward error of each linear solve
    AssemblyOptions assembly{};
};

struct NewtonReport {
    int iterations = 0;
    double final_residual = 0.0;          // max-norm
    std::vector<double> residual_norms;   // 2-norm merit of each accepted iterate
    std::vector<double> damping;          // step length used at each iteration
    bool converged = false;
};

namespace solver_detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Solves J x = rhs; throws SingularJacobian when the factorization breaks
/// down or the normwise backward error stays above @p tol after refinement.
inline Eigen::VectorXd linear_solve(const SparseMatrix& J, const Eigen::VectorXd& rhs, double tol,
                                    const Eigen::VectorXd& iterate) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(J);
    if (ldlt.info() != Eigen::Success) throw SingularJacobian("Jacobian factorization failed", to_std(iterate));
    Eigen::VectorXd x = ldlt.solve(rhs);
    // Normwise backward error ||r|| / (||J|| ||x|| + ||b||), with the max-row-sum norm of J.
    double jn = 0.0;
    {
        Eigen::VectorXd rows = Eigen::VectorXd::Zero(J.rows());
        for (int k = 0; k < J.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(J, k); it; ++it) rows[it.row()] += std::fabs(it.value());
        jn = rows.size() ? rows.maxCoeff() : 0.0;
    }
    auto small = [&](const Eigen::VectorXd& r) {
        return r.lpNorm<Eigen::Infinity>() <=
               tol * (jn * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>());
    };
    for (int refine = 0; refine < 3; ++refine) {
        if (!x.allFinite()) break;
        const Eigen::VectorXd r = rhs - J * x;
        if (small(r)) return x;
        x += ldlt.solve(r);
    }
    if (x.allFinite() && small(rhs - J * x)) return x;
    throw SingularJacobian("linear solve did not reach the requested relative residual", to_std(iterate));
}

}  // namespace solver_detail

/**
 * @brief Newton iteration for R(u, tau) = 0 with backtracking (factor 1/2,
 * Armijo decrease of the residual 2-norm). Throws LineSearchFailed,
 * MaxIterationsExceeded or SingularJacobian carrying the last iterate.
 */
inline std::pair<ScalarField, NewtonReport> newton_solve(const Discretization& disc, ScalarField u, double tau,
                                                         const CapillaryProblem& problem,
                                                         const NewtonOptions& opts = {}) {
    if (!(opts.tol > 0.0)) throw InvalidInput("Newton tolerance must be positive");
    if (!u.allFinite()) throw InvalidInput("initial iterate has non-finite values");
    NewtonReport rep;
    Eigen::VectorXd R = residual(disc, u, tau, problem, opts.assembly);
    double merit = R.norm();
    rep.residual_norms.push_back(merit);
    for (;;) {
        rep.final_residual = R.lpNorm<Eigen::Infinity>();
        if (rep.final_residual <= opts.tol) {
            rep.converged = true;
            return {std::move(u), std::move(rep)};
        }
        if (rep.iterations >= opts.max_iter)
            throw MaxIterationsExceeded("Newton did not converge in " + std::to_string(opts.max_iter) +
                                            " iterations (residual " + std::to_string(rep.final_residual) + ")",
                                        solver_detail::to_std(u));
        const SparseMatrix J = jacobian(disc, u, tau, problem, opts.assembly);
        const Eigen::VectorXd step = solver_detail::linear_solve(J, -R, opts.linear_tol, u);

        // The full step is taken when it passes the Armijo test; otherwise
        // the halving with the smallest residual norm that passes.
        double lambda = 1.0;
        bool accepted = false;
        ScalarField best_u;
        Eigen::VectorXd best_R;
        double best_merit = std::numeric_limits<double>::infinity();
        double best_lambda = 0.0;
        for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
            ScalarField trial = u + lambda * step;
            Eigen::VectorXd Rt;
            try {
                Rt = residual(disc, trial, tau, problem, opts.assembly);
            } catch (const EvalError&) {
                continue;
            }
            const double mt = Rt.norm();
            if (!(std::isfinite(mt) && mt <= (1.0 - 1e-4 * lambda) * merit)) continue;
            if (mt < best_merit) {
                best_merit = mt;
                best_u = std::move(trial);
                best_R = std::move(Rt);
                best_lambda = lambda;
            }
            if (h == 0) break;
        }
        if (std::isfinite(best_merit)) {
            u = std::move(best_u);
            R = std::move(best_R);
            merit = best_merit;
            lambda = best_lambda;
            accepted = true;
        }
        if (!accepted)
            throw LineSearchFailed("no sufficient decrease after " + std::to_string(opts.max_halvings) + " halvings",
                                   solver_detail::to_std(u));
        ++rep.iterations;
        rep.damping.push_back(lambda);
        rep.residual_norms.push_back(merit);
    }
}

enum class ContinuationStatus { advancing, converged, stalled };

inline const char* to_string(ContinuationStatus s) {
    switch (s) {
        case ContinuationStatus::advancing: return "advancing";
        case ContinuationStatus::converged: return "converged";
        case ContinuationStatus::stalled: return "stalled";
    }
    return "?";
}

struct ContinuationStep {
    double tau = 0.0;
    int newton_iterations = 0;
    double residual_norm = 0.0;
};

/// One attempted step, accepted or not; emitted to the progress callback.
struct ProgressRecord {
    double tau = 0.0;
    double dtau = 0.0;
    int newton_iterations = 0;
    double residual_norm = 0.0;
    bool accepted = false;
    std::string message;
};

struct ContinuationConfig {
    double dtau = 0.1;
    double dtau_min = 1e-4;
    double dtau_max = 0.25;
    int easy_iterations = 4;  // a step is "easy" at or below this many Newton iterations
    int easy_steps_to_grow = 3;
    NewtonOptions newton{};
    std::function<void(const ProgressRecord&)> progress;
};

struct ContinuationState {
    double tau = 0.0;
    ScalarField u;
    double dtau = 0.0;
    std::vector<ContinuationStep> history;
    ContinuationStatus status = ContinuationStatus::advancing;
};

/// Continuation could not advance: dtau fell below dtau_min.
class ContinuationStalled : public SolverError {
public:
    explicit ContinuationStalled(ContinuationState state)
        : SolverError("continuation stalled at tau = " + std::to_string(state.tau),
                      solver_detail::to_std(state.u)),
          state_(std::move(state)) {}
    const ContinuationState& state() const noexcept { return state_; }

private:
    ContinuationState state_;
};

namespace solver_detail {

inline void check_config(const ContinuationConfig& cfg) {
    if (!(cfg.dtau > 0.0 && cfg.dtau <= 1.0)) throw InvalidInput("dtau must lie in (0, 1]");
    if (!(cfg.dtau_min > 0.0 && cfg.dtau_min <= cfg.dtau)) throw InvalidInput("dtau_min must lie in (0, dtau]");
    if (!(cfg.dtau_max >= cfg.dtau && cfg.dtau_max <= 1.0)) throw InvalidInput("dtau_max must lie in [dtau, 1]");
}

}  // namespace solver_detail

/**
 * @brief Advances tau from 0 to 1. Predictor: last solution, or the secant
 * through the last two. Failed corrector steps halve dtau; three easy steps
 * in a row double it up to dtau_max. Throws ContinuationStalled once dtau
 * drops below dtau_min.
 */
inline ContinuationState continuation_solve(const Discretization& disc, const CapillaryProblem& problem,
                                            const ContinuationConfig& cfg = {}) {
    solver_detail::check_config(cfg);
    const auto n = static_cast<Eigen::Index>(disc.mesh().vertices.size());
    ContinuationState st;
    st.dtau = cfg.dtau;

    auto emit = [&](double tau, int iters, double res, bool ok, std::string msg) {
        if (cfg.progress) cfg.progress({tau, st.dtau, iters, res, ok, std::move(msg)});
    };

    auto [u0, rep0] = newton_solve(disc, ScalarField::Zero(n), 0.0, problem, cfg.newton);
    st.u = std::move(u0);
    st.history.push_back({0.0, rep0.iterations, rep0.final_residual});
    emit(0.0, rep0.iterations, rep0.final_residual, true, "start");

    std::optional<std::pair<double, ScalarField>> previous;  // (tau, u) before the current point
    int easy_streak = 0;
    while (st.tau < 1.0) {
        const double target = std::min(1.0, st.tau + st.dtau);
        ScalarField guess = st.u;
        if (previous) {
            const double span = st.tau - previous->first;
            guess = st.u + (st.u - previous->second) * ((target - st.tau) / span);
        }
        try {
            auto [u, rep] = newton_solve(disc, std::move(guess), target, problem, cfg.newton);
            previous = std::pair{st.tau, st.u};
            st.tau = target;
            st.u = std::move(u);
            st.history.push_back({target, rep.iterations, rep.final_residual});
            emit(target, rep.iterations, rep.final_residual, true, "accepted");
            if (rep.iterations <= cfg.easy_iterations) {
                if (++easy_streak >= cfg.easy_steps_to_grow) {
                    st.dtau = std::min(2.0 * st.dtau, cfg.dtau_max);
                    easy_streak = 0;
                }
            } else {
                easy_streak = 0;
            }
        } catch (const SolverError& e) {
            easy_streak = 0;
            st.dtau *= 0.5;
            emit(target, 0, std::numeric_limits<double>::quiet_NaN(), false, e.what());
            if (st.dtau < cfg.dtau_min) {
                st.status = ContinuationStatus::stalled;
                throw ContinuationStalled(std::move(st));
            }
        }
    }
    st.status = ContinuationStatus::converged;
    return st;
}

/// Validates conditions (i)-(v) first unless @p unsafe; throws
/// PreconditionError for an invalid problem.
inline ContinuationState continuation_solve(const CapillaryProblem& problem, const MetricField& metric,
                                            const Mesh& mesh, const ContinuationConfig& cfg = {},
                                            bool unsafe = false) {
    if (!unsafe) {
        const auto rep = validate_conditions(problem, mesh, metric, kDefaultSRange);
        if (!rep.all_passed()) throw PreconditionError("problem violates the structural conditions");
    }
    const Discretization disc(mesh, metric);
    return continuation_solve(disc, problem, cfg);
}

/// Uniform noise in [-amplitude, amplitude] from a seeded 64-bit Mersenne
/// twister, mapped with 53-bit resolution (identical across platforms).
inline ScalarField uniform_noise(Eigen::Index n, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ScalarField out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        out[i] = amplitude * (2.0 * unit - 1.0);
    }
    return out;
}

struct UniquenessResult {
    double spread = 0.0;  // max pairwise max-norm distance between converged restarts
    int converged = 0;
    int failed = 0;
    std::vector<std::string> failures;
};

/**
 * @brief Re-solves N_1 by Newton from @p trials starts u* + uniform noise of
 * the given amplitude and reports the spread of the converged solutions.
 */
inline UniquenessResult uniqueness_probe(const Discretization& disc, const CapillaryProblem& problem,
                                         const ScalarField& u_star, double amplitude, int trials,
                                         std::uint64_t seed, const NewtonOptions& opts = {}) {
    UniquenessResult res;
    std::vector<ScalarField> sols;
    for (int t = 0; t < trials; ++t) {
        ScalarField start = u_star + uniform_noise(u_star.size(), amplitude, seed + static_cast<std::uint64_t>(t));
        try {
            sols.push_back(newton_solve(disc, std::move(start), 1.0, problem, opts).first);
            ++res.converged;
        } catch (const SolverError& e) {
            ++res.failed;
            res.failures.emplace_back(e.what());
        }
    }
    for (std::size_t i = 0; i < sols.size(); ++i)
        for (std::size_t j = i + 1; j < sols.size(); ++j)
            res.spread = std::max(res.spread, (sols[i] - sols[j]).lpNorm<Eigen::Infinity>());
    return res;
}

}  // namespace capgraph
