#pragma once
/**
 * @file mesh.hpp
 * @brief Simplicial meshes of a domain Omega in the leaf P (segments for
 * n = 1, triangles for n = 2), boundary facets with inward conormals, and
 * graph distance fields.
 */
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "capgraph/error.hpp"
#include "capgraph/metric.hpp"

namespace capgraph {

/// Nodal values of a piecewise-linear field, one per mesh vertex.
using ScalarField = Eigen::VectorXd;

/// Boundary facet: an edge (n = 2) or an end point (n = 1) of Gamma.
struct BoundaryFacet {
    std::array<int, 2> v{-1, -1};
    int vertex_count = 2;
    int tag = 0;   // boundary component
    int cell = -1; // the unique adjacent cell
    Vec2 normal{}; // inward chart covector normal, Euclidean unit length
};

struct Mesh {
    int dim = 2;
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> cells;  // dim + 1 entries used
    std::vector<BoundaryFacet> boundary;

    int vertices_per_cell() const { return dim + 1; }
    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t cell_count() const { return cells.size(); }

    /// Longest edge in the chart.
    double max_edge_length() const {
        double h = 0.0;
        for (const auto& c : cells) {
            for (int i = 0; i < vertices_per_cell(); ++i)
                for (int j = i + 1; j < vertices_per_cell(); ++j) {
                    const Vec2& a = vertices[c[i]];
                    const Vec2& b = vertices[c[j]];
                    h = std::max(h, std::hypot(a[0] - b[0], a[1] - b[1]));
                }
        }
        return h;
    }

    /// Signed chart measure of a cell (length or area).
    double chart_measure(std::size_t cell) const {
        const auto& c = cells[cell];
        const Vec2& a = vertices[c[0]];
        const Vec2& b = vertices[c[1]];
        if (dim == 1) return b[0] - a[0];
        const Vec2& d = vertices[c[2]];
        return 0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]));
    }

    std::vector<bool> boundary_vertex_mask() const {
        std::vector<bool> mask(vertices.size(), false);
        for (const auto& f : boundary)
            for (int i = 0; i < f.vertex_count; ++i) mask[f.v[i]] = true;
        return mask;
    }

    /// Vertex adjacency lists (sorted, without self).
    std::vector<std::vector<int>> vertex_neighbors() const {
        std::vector<std::vector<int>> adj(vertices.size());
        for (const auto& c : cells)
            for (int i = 0; i < vertices_per_cell(); ++i)
                for (int j = 0; j < vertices_per_cell(); ++j)
                    if (i != j) adj[c[i]].push_back(c[j]);
        for (auto& a : adj) {
            std::sort(a.begin(), a.end());
            a.erase(std::unique(a.begin(), a.end()), a.end());
        }
        return adj;
    }

    /// Cells incident to each vertex.
    std::vector<std::vector<int>> vertex_cells() const {
        std::vector<std::vector<int>> out(vertices.size());
        for (std::size_t k = 0; k < cells.size(); ++k)
            for (int i = 0; i < vertices_per_cell(); ++i) out[cells[k][i]].push_back(static_cast<int>(k));
        return out;
    }

    std::size_t boundary_component_count() const {
        int m = -1;
        for (const auto& f : boundary) m = std::max(m, f.tag);
        return static_cast<std::size_t>(m + 1);
    }
};

/// Reference quadrature rules of order 2.
namespace quadrature {

struct Rule {
    std::vector<std::array<double, 3>> bary;  // barycentric coordinates
    std::vector<double> weights;              // sum to 1 (fraction of the measure)
};

/// Three-point rule on triangles, exact for quadratics.
inline const Rule& triangle() {
    static const Rule rule{{{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                            {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                            {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}},
                           {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    return rule;
}

/// Two-point Gauss rule on segments, exact for cubics.
inline const Rule& segment() {
    static const double g = 0.5 / std::sqrt(3.0);
    static const Rule rule{{{0.5 + g, 0.5 - g, 0.0}, {0.5 - g, 0.5 + g, 0.0}}, {0.5, 0.5}};
    return rule;
}

}  // namespace quadrature

/**
 * @brief Inward sigma-unit conormal of a boundary facet at chart point x:
 * nu^i = sigma^{ij} n_j / sqrt(sigma^{kl} n_k n_l) for the chart covector
 * normal n.
 */
inline Vec2 inward_conormal(const MetricField& metric, const BoundaryFacet& f, const Vec2& x) {
    const Sym2 si = metric.sigma_inv(x);
    const Vec2 raised = si.apply(f.normal);
    const double norm = std::sqrt(si.quad(f.normal));
    return {raised[0] / norm, raised[1] / norm};
}

namespace mesh_detail {

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline void orient_cells(Mesh& m) {
    for (std::size_t k = 0; k < m.cells.size(); ++k) {
        const double vol = m.chart_measure(k);
        if (vol < 0.0) std::swap(m.cells[k][0], m.cells[k][1]);
    }
}

}  // namespace mesh_detail

/**
 * @brief Derives boundary facets from cell connectivity. Facets receive tag
 * 0; callers retag them per boundary component. Throws InvalidInput for
 * non-conforming meshes (a facet shared by more than two cells).
 */
inline void build_boundary(Mesh& m) {
    m.boundary.clear();
    if (m.dim == 1) {
        std::vector<int> count(m.vertices.size(), 0);
        std::vector<int> owner(m.vertices.size(), -1);
        for (std::size_t k = 0; k < m.cells.size(); ++k)
            for (int i = 0; i < 2; ++i) {
                ++count[m.cells[k][i]];
                owner[m.cells[k][i]] = static_cast<int>(k);
            }
        for (std::size_t v = 0; v < m.vertices.size(); ++v) {
            if (count[v] > 2) throw InvalidInput("non-conforming 1D mesh at vertex " + std::to_string(v));
            if (count[v] != 1) continue;
            BoundaryFacet f;
            f.v = {static_cast<int>(v), -1};
            f.vertex_count = 1;
            f.cell = owner[v];
            const auto& c = m.cells[f.cell];
            const int other = c[0] == static_cast<int>(v) ? c[1] : c[0];
            f.normal = {m.vertices[other][0] > m.vertices[v][0] ? 1.0 : -1.0, 0.0};
            m.boundary.push_back(f);
        }
        return;
    }
    std::map<std::uint64_t, std::pair<int, int>> edges;  // key -> (count, cell)
    for (std::size_t k = 0; k < m.cells.size(); ++k) {
        for (int i = 0; i < 3; ++i) {
            auto& e = edges[mesh_detail::edge_key(m.cells[k][i], m.cells[k][(i + 1) % 3])];
            ++e.first;
            e.second = static_cast<int>(k);
        }
    }
    for (std::size_t k = 0; k < m.cells.size(); ++k) {
        const auto& c = m.cells[k];
        for (int i = 0; i < 3; ++i) {
            const int a = c[i], b = c[(i + 1) % 3], opp = c[(i + 2) % 3];
            const auto& e = edges[mesh_detail::edge_key(a, b)];
            if (e.first > 2) throw InvalidInput("non-conforming mesh: edge shared by more than two cells");
            if (e.first != 1) continue;
            BoundaryFacet f;
            f.v = {a, b};
            f.vertex_count = 2;
            f.cell = static_cast<int>(k);
            const Vec2& pa = m.vertices[a];
            const Vec2& pb = m.vertices[b];
            Vec2 n{-(pb[1] - pa[1]), pb[0] - pa[0]};
            const double len = std::hypot(n[0], n[1]);
            n = {n[0] / len, n[1] / len};
            const Vec2& po = m.vertices[opp];
            if ((po[0] - pa[0]) * n[0] + (po[1] - pa[1]) * n[1] < 0.0) n = {-n[0], -n[1]};
            f.normal = n;
            m.boundary.push_back(f);
        }
    }
}

/**
 * @brief Checks conformity and positive orientation; throws InvalidInput.
 */
inline void check_mesh(const Mesh& m) {
    if (m.dim != 1 && m.dim != 2) throw InvalidInput("mesh dimension must be 1 or 2");
    if (m.cells.empty()) throw InvalidInput("mesh has no cells");
    for (std::size_t k = 0; k < m.cells.size(); ++k) {
        for (int i = 0; i < m.vertices_per_cell(); ++i) {
            const int v = m.cells[k][i];
            if (v < 0 || static_cast<std::size_t>(v) >= m.vertices.size())
                throw InvalidInput("cell " + std::to_string(k) + " references a missing vertex");
        }
        if (!(m.chart_measure(k) > 0.0)) throw InvalidInput("cell " + std::to_string(k) + " is not positively oriented");
    }
    Mesh copy = m;
    build_boundary(copy);  // throws on non-conforming facets
    if (copy.boundary.size() != m.boundary.size())
        throw InvalidInput("boundary facet list does not match the mesh boundary");
}

inline constexpr std::size_t kMaxVertices = 4'000'000;

/// Uniform mesh of [a, b] with m cells. Facet at a has tag 0, at b tag 1.
inline Mesh generate_interval_mesh(double a, double b, int m) {
    if (!(a < b) || m < 2) throw InvalidInput("interval mesh needs a < b and at least 2 cells");
    Mesh mesh;
    mesh.dim = 1;
    mesh.vertices.reserve(m + 1);
    for (int i = 0; i <= m; ++i) {
        const double x = i == m ? b : a + (b - a) * static_cast<double>(i) / m;
        mesh.vertices.push_back({x, 0.0});
    }
    for (int i = 0; i < m; ++i) mesh.cells.push_back({i, i + 1, -1});
    build_boundary(mesh);
    for (auto& f : mesh.boundary) f.tag = f.v[0] == 0 ? 0 : 1;
    std::sort(mesh.boundary.begin(), mesh.boundary.end(),
              [](const BoundaryFacet& x, const BoundaryFacet& y) { return x.tag < y.tag; });
    return mesh;
}

namespace mesh_detail {

// Triangulates the strip between two closed rings by angle-ordered walking.
inline void stitch_rings(const std::vector<int>& inner, const std::vector<int>& outer,
                         std::vector<std::array<int, 3>>& cells) {
    const std::size_t na = inner.size(), nb = outer.size();
    std::size_t i = 0, j = 0;
    while (i < na || j < nb) {
        const double ta = static_cast<double>(i + 1) / static_cast<double>(na);
        const double tb = static_cast<double>(j + 1) / static_cast<double>(nb);
        if (j == nb || (i < na && ta < tb)) {
            cells.push_back({inner[i % na], outer[j % nb], inner[(i + 1) % na]});
            ++i;
        } else {
            cells.push_back({inner[i % na], outer[j % nb], outer[(j + 1) % nb]});
            ++j;
        }
    }
}

inline std::vector<int> add_ring(Mesh& m, double radius, std::size_t count) {
    std::vector<int> ids;
    ids.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
        ids.push_back(static_cast<int>(m.vertices.size()));
        m.vertices.push_back({radius * std::cos(t), radius * std::sin(t)});
    }
    return ids;
}

}  // namespace mesh_detail

/**
 * @brief Concentric-ring triangulation of the disk |x| <= radius. Ring k
 * carries 6k vertices; the outer ring lies exactly on the circle.
 * Deterministic for fixed inputs.
 */
inline Mesh generate_disk_mesh(double radius, double h) {
    if (!(radius > 0.0) || !(h > 0.0) || !(h < radius))
        throw InvalidInput("disk mesh needs radius > 0 and 0 < h < radius");
    const double rings_d = std::ceil(radius / h - 1e-9);
    if (1.0 + 3.0 * rings_d * (rings_d + 1.0) > static_cast<double>(kMaxVertices))
        throw ResourceError("disk mesh with h = " + std::to_string(h) + " exceeds the vertex budget");
    const int rings = static_cast<int>(rings_d);
    Mesh m;
    m.dim = 2;
    m.vertices.push_back({0.0, 0.0});
    std::vector<int> prev{0};
    for (int k = 1; k <= rings; ++k) {
        const double rk = k == rings ? radius : radius * k / rings;
        auto ring = mesh_detail::add_ring(m, rk, static_cast<std::size_t>(6 * k));
        if (k == 1) {
            for (std::size_t j = 0; j < ring.size(); ++j)
                m.cells.push_back({0, ring[j], ring[(j + 1) % ring.size()]});
        } else {
            mesh_detail::stitch_rings(prev, ring, m.cells);
        }
        prev = std::move(ring);
    }
    mesh_detail::orient_cells(m);
    build_boundary(m);
    return m;
}

/**
 * @brief Ring triangulation of inner_radius <= |x| <= radius. The outer
 * circle is boundary component 0 and the inner circle component 1.
 */
inline Mesh generate_annulus_mesh(double inner_radius, double radius, double h) {
    if (!(inner_radius > 0.0) || !(radius > inner_radius) || !(h > 0.0) || !(h < radius - inner_radius))
        throw InvalidInput("annulus mesh needs 0 < inner_radius < radius and 0 < h < radius - inner_radius");
    const double layers_d = std::ceil((radius - inner_radius) / h - 1e-9);
    const double per_ring = std::ceil(2.0 * std::numbers::pi * radius / h);
    if ((layers_d + 1.0) * per_ring > static_cast<double>(kMaxVertices))
        throw ResourceError("annulus mesh with h = " + std::to_string(h) + " exceeds the vertex budget");
    const int layers = static_cast<int>(layers_d);
    Mesh m;
    m.dim = 2;
    std::vector<int> prev;
    for (int k = 0; k <= layers; ++k) {
        const double rk = k == layers ? radius : inner_radius + (radius - inner_radius) * k / layers;
        const auto count = static_cast<std::size_t>(std::max(8.0, std::ceil(2.0 * std::numbers::pi * rk / h)));
        auto ring = mesh_detail::add_ring(m, rk, count);
        if (k > 0) mesh_detail::stitch_rings(prev, ring, m.cells);
        prev = std::move(ring);
    }
    mesh_detail::orient_cells(m);
    build_boundary(m);
    const double mid = 0.5 * (inner_radius + radius);
    for (auto& f : m.boundary) {
        const Vec2& p = m.vertices[f.v[0]];
        f.tag = std::hypot(p[0], p[1]) > mid ? 0 : 1;
    }
    return m;
}

namespace mesh_detail {

inline double sigma_edge_length(const MetricField& metric, const Vec2& a, const Vec2& b) {
    const Vec2 mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    const Vec2 e{b[0] - a[0], b[1] - a[1]};
    return std::sqrt(metric.sigma(mid).quad(e));
}

/**
 * Smallest value of (1 - t) da + t db + |c - (a + t (b - a))|_S over
 * t in [0, 1]: the distance at c when it is reached through the edge ab of
 * a triangle, with the distance interpolated linearly along ab.
 */
inline double through_edge(const Sym2& S, const Vec2& a, const Vec2& b, const Vec2& c, double da, double db) {
    const Vec2 e{b[0] - a[0], b[1] - a[1]};
    const Vec2 w{c[0] - a[0], c[1] - a[1]};
    const double A = S.quad(w), B = S.quad(w, e), C = S.quad(e);
    auto f = [&](double t) { return (1.0 - t) * da + t * db + std::sqrt(std::max(0.0, A - 2.0 * B * t + C * t * t)); };
    double best = std::min(f(0.0), f(1.0));
    const double delta = db - da;
    if (C > 0.0 && delta * delta < C) {
        const double D = std::max(0.0, A * C - B * B);
        const double t = (B - delta * std::sqrt(D / (C - delta * delta))) / C;
        if (t > 0.0 && t < 1.0) best = std::min(best, f(t));
    }
    return best;
}

/**
 * Label-setting shortest paths from @p sources. A vertex is reached either
 * along a mesh edge or across a cell from the opposite edge, once both ends
 * of that edge are final.
 */
inline ScalarField dijkstra(const Mesh& mesh, const MetricField& metric, const std::vector<int>& sources) {
    const auto adj = mesh.vertex_neighbors();
    const auto cells_of = mesh.vertex_cells();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(mesh.vertices.size(), inf);
    std::vector<bool> done(mesh.vertices.size(), false);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    auto relax = [&](int w, double nd) {
        if (nd < dist[w]) {
            dist[w] = nd;
            queue.push({nd, w});
        }
    };
    for (int s : sources) {
        dist[s] = 0.0;
        queue.push({0.0, s});
    }
    while (!queue.empty()) {
        const auto [d, v] = queue.top();
        queue.pop();
        if (done[v] || d > dist[v]) continue;
        done[v] = true;
        for (int w : adj[v])
            if (!done[w]) relax(w, d + sigma_edge_length(metric, mesh.vertices[v], mesh.vertices[w]));
        if (mesh.dim != 2) continue;
        for (int k : cells_of[v]) {
            const auto& c = mesh.cells[static_cast<std::size_t>(k)];
            for (int i = 0; i < 3; ++i) {
                const int w = c[i];
                const int u = c[(i + 1) % 3] == v ? c[(i + 2) % 3] : c[(i + 1) % 3];
                if (w == v || u == v || done[w] || !done[u]) continue;
                const Vec2& p = mesh.vertices[v];
                const Vec2& q = mesh.vertices[u];
                const Vec2& r = mesh.vertices[w];
                const Vec2 centroid{(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0};
                relax(w, through_edge(metric.sigma(centroid), p, q, r, d, dist[u]));
            }
        }
    }
    ScalarField out(static_cast<Eigen::Index>(dist.size()));
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] == inf) throw UnreachableVertex("vertex " + std::to_string(i) + " is unreachable");
        out[static_cast<Eigen::Index>(i)] = dist[i];
    }
    return out;
}

}  // namespace mesh_detail

/**
 * @brief Approximate sigma-distance from vertex @p source: shortest paths
 * through the mesh with sigma-lengths, first-order accurate in h.
 */
inline ScalarField geodesic_distance_field(const Mesh& mesh, const MetricField& metric, int source) {
    if (source < 0 || static_cast<std::size_t>(source) >= mesh.vertices.size())
        throw InvalidInput("source vertex out of range");
    return mesh_detail::dijkstra(mesh, metric, {source});
}

/// Approximate sigma-distance to the nearest boundary vertex; zero on Gamma.
inline ScalarField boundary_distance_field(const Mesh& mesh, const MetricField& metric) {
    std::vector<int> sources;
    const auto mask = mesh.boundary_vertex_mask();
    for (std::size_t v = 0; v < mask.size(); ++v)
        if (mask[v]) sources.push_back(static_cast<int>(v));
    if (sources.empty()) throw PreconditionError("mesh has no boundary");
    return mesh_detail::dijkstra(mesh, metric, sources);
}

/// Index of the vertex closest (in the chart) to @p x.
inline int nearest_vertex(const Mesh& mesh, const Vec2& x) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const double d = std::hypot(mesh.vertices[v][0] - x[0], mesh.vertices[v][1] - x[1]);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(v);
        }
    }
    return best;
}

}  // namespace capgraph
