#pragma once
/**
 * @file assembly.hpp
 * @brief P1 finite-element discretization of the capillary functional:
 * energy, weak residual and analytic Jacobian of the homotopy family
 *
 *   R_a(u) = int (1/sqrt(gamma)) [ <du, dphi_a>_sigma / W + tau Psi(x,u) phi_a ] dsigma
 *          - int_Gamma (1/sqrt(gamma)) tau Phi(x,u) phi_a dl.
 *
 * Cell loops are split into a fixed number of chunks independent of the
 * thread count; chunk results are merged in chunk order, so results are
 * bit-identical for any --threads value.
 */
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "capgraph/error.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"
#include "capgraph/problem.hpp"

namespace capgraph {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct AssemblyOptions {
    int threads = 1;
};

/**
 * @brief Metric-weighted quadrature data for a mesh, computed once and
 * shared by every assembly call. Immutable after construction.
 */
class Discretization {
public:
    struct CellPoint {
        Vec2 x{};
        double weight = 0.0;  // reference weight * chart measure * sqrt(det sigma)
        double gamma = 1.0;
        double inv_sqrt_gamma = 1.0;
        Sym2 sigma_inv{};
        std::array<double, 3> phi{};
    };
    struct FacetPoint {
        Vec2 x{};
        double weight = 0.0;  // sigma-length measure (1 for end points)
        double inv_sqrt_gamma = 1.0;
        std::array<double, 2> phi{};
    };

    Discretization(const Mesh& mesh, const MetricField& metric) : mesh_(&mesh), metric_(&metric) {
        if (mesh.dim != metric.dim()) throw InvalidInput("mesh and metric dimensions differ");
        const auto& rule = mesh.dim == 1 ? quadrature::segment() : quadrature::triangle();
        const int nv = mesh.vertices_per_cell();
        grads_.resize(mesh.cells.size());
        points_.reserve(mesh.cells.size() * rule.weights.size());
        for (std::size_t k = 0; k < mesh.cells.size(); ++k) {
            const auto& c = mesh.cells[k];
            const double measure = mesh.chart_measure(k);
            if (!(measure > 0.0)) throw InvalidInput("cell " + std::to_string(k) + " has nonpositive measure");
            grads_[k] = basis_gradients(mesh, k, measure);
            for (std::size_t q = 0; q < rule.weights.size(); ++q) {
                CellPoint p;
                for (int i = 0; i < nv; ++i) {
                    p.phi[i] = rule.bary[q][i];
                    p.x[0] += rule.bary[q][i] * mesh.vertices[c[i]][0];
                    p.x[1] += rule.bary[q][i] * mesh.vertices[c[i]][1];
                }
                const Sym2 sig = metric.sigma(p.x);
                p.sigma_inv = sig.inverse();
                p.gamma = metric.gamma(p.x);
                if (!(p.gamma > 0.0) || !(sig.min_eigenvalue() > 0.0))
                    throw InvalidInput("metric invalid at a quadrature point");
                p.inv_sqrt_gamma = 1.0 / std::sqrt(p.gamma);
                p.weight = rule.weights[q] * measure * std::sqrt(sig.det());
                points_.push_back(p);
            }
        }
        points_per_cell_ = static_cast<int>(rule.weights.size());

        facet_begin_.push_back(0);
        for (const auto& f : mesh.boundary) {
            if (f.vertex_count == 1) {
                FacetPoint p;
                p.x = mesh.vertices[f.v[0]];
                p.weight = 1.0;
                p.inv_sqrt_gamma = 1.0 / std::sqrt(metric.gamma(p.x));
                p.phi = {1.0, 0.0};
                facet_points_.push_back(p);
            } else {
                const auto& seg = quadrature::segment();
                const Vec2& a = mesh.vertices[f.v[0]];
                const Vec2& b = mesh.vertices[f.v[1]];
                const Vec2 e{b[0] - a[0], b[1] - a[1]};
                for (std::size_t q = 0; q < seg.weights.size(); ++q) {
                    FacetPoint p;
                    p.phi = {seg.bary[q][0], seg.bary[q][1]};
                    p.x = {p.phi[0] * a[0] + p.phi[1] * b[0], p.phi[0] * a[1] + p.phi[1] * b[1]};
                    p.weight = seg.weights[q] * std::sqrt(metric.sigma(p.x).quad(e));
                    p.inv_sqrt_gamma = 1.0 / std::sqrt(metric.gamma(p.x));
                    facet_points_.push_back(p);
                }
            }
            facet_begin_.push_back(static_cast<int>(facet_points_.size()));
        }
    }

    const Mesh& mesh() const { return *mesh_; }
    const MetricField& metric() const { return *metric_; }
    int points_per_cell() const { return points_per_cell_; }
    const CellPoint& point(std::size_t cell, int q) const { return points_[cell * points_per_cell_ + q]; }
    const std::array<Vec2, 3>& basis_gradients(std::size_t cell) const { return grads_[cell]; }

    std::size_t facet_point_begin(std::size_t facet) const { return static_cast<std::size_t>(facet_begin_[facet]); }
    std::size_t facet_point_end(std::size_t facet) const { return static_cast<std::size_t>(facet_begin_[facet + 1]); }
    const FacetPoint& facet_point(std::size_t i) const { return facet_points_[i]; }

    /// Chart gradient of the P1 interpolant of u on a cell.
    Vec2 cell_gradient(const ScalarField& u, std::size_t cell) const {
        const auto& c = mesh_->cells[cell];
        Vec2 g{0.0, 0.0};
        for (int i = 0; i < mesh_->vertices_per_cell(); ++i) {
            g[0] += u[c[i]] * grads_[cell][i][0];
            g[1] += u[c[i]] * grads_[cell][i][1];
        }
        return g;
    }

    /// Sigma-weighted area of Omega: sum of quadrature weights.
    double sigma_volume() const {
        double a = 0.0;
        for (const auto& p : points_) a += p.weight;
        return a;
    }

private:
    static std::array<Vec2, 3> basis_gradients(const Mesh& m, std::size_t k, double measure) {
        const auto& c = m.cells[k];
        if (m.dim == 1) return {Vec2{-1.0 / measure, 0.0}, Vec2{1.0 / measure, 0.0}, Vec2{0.0, 0.0}};
        std::array<Vec2, 3> g{};
        for (int i = 0; i < 3; ++i) {
            const Vec2& pj = m.vertices[c[(i + 1) % 3]];
            const Vec2& pk = m.vertices[c[(i + 2) % 3]];
            g[i] = {(pj[1] - pk[1]) / (2.0 * measure), (pk[0] - pj[0]) / (2.0 * measure)};
        }
        return g;
    }

    const Mesh* mesh_;
    const MetricField* metric_;
    std::vector<std::array<Vec2, 3>> grads_;
    std::vector<CellPoint> points_;
    int points_per_cell_ = 0;
    std::vector<FacetPoint> facet_points_;
    std::vector<int> facet_begin_;
};

namespace assembly_detail {

inline constexpr std::size_t kChunks = 32;

/// Runs body(chunk, begin, end) over fixed cell chunks on up to `threads` workers.
template <class Body>
void for_each_chunk(std::size_t count, int threads, Body&& body) {
    const std::size_t chunks = std::min(kChunks, std::max<std::size_t>(count, 1));
    auto range = [&](std::size_t c) {
        return std::pair{count * c / chunks, count * (c + 1) / chunks};
    };
    const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(chunks)));
    if (workers == 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            auto [b, e] = range(c);
            body(c, b, e);
        }
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) {
                auto [b, e] = range(c);
                body(c, b, e);
            }
        });
    }
    for (auto& t : pool) t.join();
}

inline void check_inputs(const Discretization& disc, const ScalarField& u, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("tau must lie in [0, 1]");
    if (static_cast<std::size_t>(u.size()) != disc.mesh().vertices.size())
        throw InvalidInput("field size does not match the mesh vertex count");
    if (!u.allFinite()) throw InvalidInput("field has non-finite values");
}

inline double interpolate(const ScalarField& u, const std::array<int, 3>& c, const std::array<double, 3>& phi,
                          int nv) {
    double s = 0.0;
    for (int i = 0; i < nv; ++i) s += phi[i] * u[c[i]];
    return s;
}

/// Adaptive Simpson quadrature of f on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    struct Rec {
        static double run(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                          double fb, double whole, double tol, int depth) {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
            return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return Rec::run(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace assembly_detail

/// Weak residual of the homotopy problem N_tau.
inline Eigen::VectorXd residual(const Discretization& disc, const ScalarField& u, double tau,
                                const CapillaryProblem& problem, const AssemblyOptions& opts = {}) {
    using namespace assembly_detail;
    check_inputs(disc, u, tau);
    const Mesh& mesh = disc.mesh();
    const int nv = mesh.vertices_per_cell();
    const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
    const std::size_t chunks = std::min(kChunks, std::max<std::size_t>(mesh.cells.size(), 1));
    std::vector<Eigen::VectorXd> parts(chunks, Eigen::VectorXd::Zero(n));

    for_each_chunk(mesh.cells.size(), opts.threads, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        Eigen::VectorXd& R = parts[chunk];
        for (std::size_t k = b; k < e; ++k) {
            const auto& c = mesh.cells[k];
            const auto& grads = disc.basis_gradients(k);
            const Vec2 g = disc.cell_gradient(u, k);
            for (int q = 0; q < disc.points_per_cell(); ++q) {
                const auto& p = disc.point(k, q);
                const Vec2 v = p.sigma_inv.apply(g);
                const double W = std::sqrt(p.gamma + dot(g, v));
                const double wq = p.weight * p.inv_sqrt_gamma;
                const double source = tau == 0.0 ? 0.0 : tau * problem.psi(p.x, interpolate(u, c, p.phi, nv));
                for (int a = 0; a < nv; ++a) R[c[a]] += wq * (dot(v, grads[a]) / W + source * p.phi[a]);
            }
        }
    });
    Eigen::VectorXd R = Eigen::VectorXd::Zero(n);
    for (const auto& part : parts) R += part;

    if (tau != 0.0) {
        for (std::size_t f = 0; f < mesh.boundary.size(); ++f) {
            const auto& facet = mesh.boundary[f];
            for (std::size_t i = disc.facet_point_begin(f); i < disc.facet_point_end(f); ++i) {
                const auto& p = disc.facet_point(i);
                double uq = 0.0;
                for (int a = 0; a < facet.vertex_count; ++a) uq += p.phi[a] * u[facet.v[a]];
                const double wet = tau * problem.phi(p.x, uq) * p.weight * p.inv_sqrt_gamma;
                for (int a = 0; a < facet.vertex_count; ++a) R[facet.v[a]] -= wet * p.phi[a];
            }
        }
    }
    return R;
}

/**
 * @brief Analytic Jacobian dR/du:
 * J_ab = int (1/sqrt(gamma)) [ dphi_b^T D dphi_a + tau Psi_s phi_a phi_b ]
 *      - int_Gamma (1/sqrt(gamma)) tau Phi_s phi_a phi_b,
 * D = (sigma^{-1} - v v^T / W^2) / W.
 */
inline SparseMatrix jacobian(const Discretization& disc, const ScalarField& u, double tau,
                             const CapillaryProblem& problem, const AssemblyOptions& opts = {}) {
    using namespace assembly_detail;
    using Triplet = Eigen::Triplet<double>;
    check_inputs(disc, u, tau);
    const Mesh& mesh = disc.mesh();
    const int nv = mesh.vertices_per_cell();
    const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
    const std::size_t chunks = std::min(kChunks, std::max<std::size_t>(mesh.cells.size(), 1));
    std::vector<std::vector<Triplet>> parts(chunks);

    for_each_chunk(mesh.cells.size(), opts.threads, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        auto& trips = parts[chunk];
        trips.reserve((e - b) * nv * nv);
        for (std::size_t k = b; k < e; ++k) {
            const auto& c = mesh.cells[k];
            const auto& grads = disc.basis_gradients(k);
            const Vec2 g = disc.cell_gradient(u, k);
            double local[3][3] = {};
            for (int q = 0; q < disc.points_per_cell(); ++q) {
                const auto& p = disc.point(k, q);
                const Vec2 v = p.sigma_inv.apply(g);
                const double W2 = p.gamma + dot(g, v);
                const double W = std::sqrt(W2);
                const Sym2 D{(p.sigma_inv.xx - v[0] * v[0] / W2) / W, (p.sigma_inv.xy - v[0] * v[1] / W2) / W,
                             (p.sigma_inv.yy - v[1] * v[1] / W2) / W};
                const double wq = p.weight * p.inv_sqrt_gamma;
                const double react =
                    tau == 0.0 ? 0.0 : tau * problem.dpsi_ds(p.x, interpolate(u, c, p.phi, nv));
                for (int a = 0; a < nv; ++a)
                    for (int bb = 0; bb < nv; ++bb)
                        local[a][bb] += wq * (D.quad(grads[bb], grads[a]) + react * p.phi[a] * p.phi[bb]);
            }
            for (int a = 0; a < nv; ++a)
                for (int bb = 0; bb < nv; ++bb) trips.emplace_back(c[a], c[bb], local[a][bb]);
        }
    });
    std::vector<Triplet> all;
    for (auto& part : parts) all.insert(all.end(), part.begin(), part.end());

    if (tau != 0.0) {
        for (std::size_t f = 0; f < mesh.boundary.size(); ++f) {
            const auto& facet = mesh.boundary[f];
            for (std::size_t i = disc.facet_point_begin(f); i < disc.facet_point_end(f); ++i) {
                const auto& p = disc.facet_point(i);
                double uq = 0.0;
                for (int a = 0; a < facet.vertex_count; ++a) uq += p.phi[a] * u[facet.v[a]];
                const double w = tau * problem.dphi_ds(p.x, uq) * p.weight * p.inv_sqrt_gamma;
                if (w == 0.0) continue;
                for (int a = 0; a < facet.vertex_count; ++a)
                    for (int bb = 0; bb < facet.vertex_count; ++bb)
                        all.emplace_back(facet.v[a], facet.v[bb], -w * p.phi[a] * p.phi[bb]);
            }
        }
    }
    SparseMatrix J(n, n);
    J.setFromTriplets(all.begin(), all.end());
    J.makeCompressed();
    return J;
}

/**
 * @brief Discrete energy whose gradient is the residual:
 * E = int (1/sqrt(gamma)) W dsigma + int (1/sqrt(gamma)) int_0^u tau Psi(x,s) ds dsigma
 *   - int_Gamma (1/sqrt(gamma)) int_0^u tau Phi(x,s) ds dl.
 * Inner s-integrals use adaptive Simpson with tolerance 1e-10.
 */
inline double energy(const Discretization& disc, const ScalarField& u, double tau, const CapillaryProblem& problem,
                     const AssemblyOptions& opts = {}) {
    using namespace assembly_detail;
    check_inputs(disc, u, tau);
    constexpr double kTol = 1e-10;
    const Mesh& mesh = disc.mesh();
    const int nv = mesh.vertices_per_cell();
    const std::size_t chunks = std::min(kChunks, std::max<std::size_t>(mesh.cells.size(), 1));
    std::vector<double> parts(chunks, 0.0);

    for_each_chunk(mesh.cells.size(), opts.threads, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t k = b; k < e; ++k) {
            const auto& c = mesh.cells[k];
            const Vec2 g = disc.cell_gradient(u, k);
            for (int q = 0; q < disc.points_per_cell(); ++q) {
                const auto& p = disc.point(k, q);
                const double W = std::sqrt(p.gamma + p.sigma_inv.quad(g));
                double potential = 0.0;
                if (tau != 0.0) {
                    const double uq = interpolate(u, c, p.phi, nv);
                    potential = tau * adaptive_simpson([&](double s) { return problem.psi(p.x, s); }, 0.0, uq, kTol);
                }
                acc += p.weight * p.inv_sqrt_gamma * (W + potential);
            }
        }
        parts[chunk] = acc;
    });
    double E = 0.0;
    for (double p : parts) E += p;

    if (tau != 0.0) {
        for (std::size_t f = 0; f < mesh.boundary.size(); ++f) {
            const auto& facet = mesh.boundary[f];
            for (std::size_t i = disc.facet_point_begin(f); i < disc.facet_point_end(f); ++i) {
                const auto& p = disc.facet_point(i);
                double uq = 0.0;
                for (int a = 0; a < facet.vertex_count; ++a) uq += p.phi[a] * u[facet.v[a]];
                const double wet = adaptive_simpson([&](double s) { return problem.phi(p.x, s); }, 0.0, uq, kTol);
                E -= tau * wet * p.weight * p.inv_sqrt_gamma;
            }
        }
    }
    return E;
}

/// Residual, Jacobian and energy at one state.
struct AssembledSystem {
    Eigen::VectorXd residual;
    SparseMatrix jacobian;
    double energy = 0.0;
    double tau = 0.0;
};

inline AssembledSystem assemble(const Discretization& disc, const ScalarField& u, double tau,
                                const CapillaryProblem& problem, const AssemblyOptions& opts = {}) {
    return {residual(disc, u, tau, problem, opts), jacobian(disc, u, tau, problem, opts),
            energy(disc, u, tau, problem, opts), tau};
}

// Convenience overloads that build the quadrature cache on the fly.
inline Eigen::VectorXd residual(const ScalarField& u, double tau, const CapillaryProblem& problem,
                                const MetricField& metric, const Mesh& mesh) {
    return residual(Discretization(mesh, metric), u, tau, problem);
}
inline SparseMatrix jacobian(const ScalarField& u, double tau, const CapillaryProblem& problem,
                             const MetricField& metric, const Mesh& mesh) {
    return jacobian(Discretization(mesh, metric), u, tau, problem);
}
inline double energy(const ScalarField& u, double tau, const CapillaryProblem& problem, const MetricField& metric,
                     const Mesh& mesh) {
    return energy(Discretization(mesh, metric), u, tau, problem);
}

}  // namespace capgraph
