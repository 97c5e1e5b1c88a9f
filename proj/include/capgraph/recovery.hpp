#pragma once
/**
 * @file recovery.hpp
 * @brief Quadratic least-squares recovery of derivatives from nodal values
 * over vertex patches.
 */
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capgraph/error.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"

namespace capgraph {

/// Local quadratic q(y) = value + grad.(y - center) + 1/2 (y - center)^T hess (y - center).
struct LocalJet {
    Vec2 center{};
    double value = 0.0;
    Vec2 grad{};
    Sym2 hess{0.0, 0.0, 0.0};

    double operator()(const Vec2& y) const {
        const Vec2 d{y[0] - center[0], y[1] - center[1]};
        return value + dot(grad, d) + 0.5 * hess.quad(d);
    }
    Vec2 gradient(const Vec2& y) const {
        const Vec2 d{y[0] - center[0], y[1] - center[1]};
        const Vec2 hd = hess.apply(d);
        return {grad[0] + hd[0], grad[1] + hd[1]};
    }
};

class PatchRecovery {
public:
    /// Patches are the @p rings -neighbourhoods of each vertex.
    explicit PatchRecovery(const Mesh& mesh, int rings = 2) : mesh_(&mesh) {
        const auto adj = mesh.vertex_neighbors();
        patches_.resize(mesh.vertices.size());
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            std::set<int> patch{static_cast<int>(v)};
            std::vector<int> frontier{static_cast<int>(v)};
            for (int r = 0; r < rings; ++r) {
                std::vector<int> next;
                for (int w : frontier)
                    for (int z : adj[w])
                        if (patch.insert(z).second) next.push_back(z);
                frontier = std::move(next);
            }
            patches_[v].assign(patch.begin(), patch.end());
        }
    }

    const std::vector<int>& patch(int vertex) const { return patches_[vertex]; }

    /// Fits a quadratic to @p u over the patch of @p vertex.
    LocalJet fit(const ScalarField& u, int vertex) const {
        std::vector<double> values;
        values.reserve(patches_[vertex].size());
        for (int w : patches_[vertex]) values.push_back(u[w]);
        return fit_points(mesh_->dim, mesh_->vertices[vertex], points(vertex), values);
    }

    std::vector<Vec2> points(int vertex) const {
        std::vector<Vec2> pts;
        for (int w : patches_[vertex]) pts.push_back(mesh_->vertices[w]);
        return pts;
    }

    /// Least-squares quadratic through scattered (point, value) pairs,
    /// expanded about @p center.
    static LocalJet fit_points(int dim, const Vec2& center, const std::vector<Vec2>& pts,
                               const std::vector<double>& values) {
        const int unknowns = dim == 1 ? 3 : 6;
        const auto n = static_cast<Eigen::Index>(pts.size());
        if (n < unknowns) throw DegenerateStencil("patch has too few points for a quadratic fit");
        double scale = 0.0;
        for (const auto& p : pts) scale = std::max(scale, std::hypot(p[0] - center[0], p[1] - center[1]));
        if (!(scale > 0.0)) throw DegenerateStencil("patch has zero extent");

        Eigen::MatrixXd A(n, unknowns);
        Eigen::VectorXd b(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double dx = (pts[i][0] - center[0]) / scale;
            const double dy = (pts[i][1] - center[1]) / scale;
            if (dim == 1) {
                A.row(i) << 1.0, dx, 0.5 * dx * dx;
            } else {
                A.row(i) << 1.0, dx, dy, 0.5 * dx * dx, dx * dy, 0.5 * dy * dy;
            }
            b[i] = values[i];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        qr.setThreshold(1e-10);
        if (qr.rank() < unknowns) throw DegenerateStencil("patch points are degenerate for a quadratic fit");
        const Eigen::VectorXd c = qr.solve(b);

        LocalJet jet;
        jet.center = center;
        jet.value = c[0];
        if (dim == 1) {
            jet.grad = {c[1] / scale, 0.0};
            jet.hess = {c[2] / (scale * scale), 0.0, 0.0};
        } else {
            jet.grad = {c[1] / scale, c[2] / scale};
            const double s2 = scale * scale;
            jet.hess = {c[3] / s2, c[4] / s2, c[5] / s2};
        }
        return jet;
    }

private:
    const Mesh* mesh_;
    std::vector<std::vector<int>> patches_;
};

}  // namespace capgraph
