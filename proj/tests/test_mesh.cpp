#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "test_support.hpp"

using namespace capgraph;
using capgraph::testing::area;

TEST(DiskMesh, VerticesStayInside) {
    const Mesh m = generate_disk_mesh(1.0, 0.5);
    for (const auto& v : m.vertices) EXPECT_LE(std::hypot(v[0], v[1]), 1.0 + 1e-9);
    EXPECT_NO_THROW(check_mesh(m));
}

TEST(DiskMesh, AreaConvergesToPi) {
    const double a1 = area(generate_disk_mesh(1.0, 0.1));
    EXPECT_NEAR(a1, std::numbers::pi, 0.02 * std::numbers::pi);
    const double a2 = area(generate_disk_mesh(1.0, 0.05));
    EXPECT_LT(std::fabs(a2 - std::numbers::pi), std::fabs(a1 - std::numbers::pi));
    // second-order area error
    EXPECT_NEAR(std::fabs(a1 - std::numbers::pi) / std::fabs(a2 - std::numbers::pi), 4.0, 0.5);
}

TEST(DiskMesh, RefinementDoublesBoundaryFacets) {
    const auto coarse = generate_disk_mesh(1.0, 0.1).boundary.size();
    const auto fine = generate_disk_mesh(1.0, 0.05).boundary.size();
    EXPECT_GE(fine, 2 * coarse);
}

TEST(DiskMesh, IsDeterministic) {
    const Mesh a = generate_disk_mesh(1.0, 0.1), b = generate_disk_mesh(1.0, 0.1);
    ASSERT_EQ(a.vertices.size(), b.vertices.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i) EXPECT_EQ(a.vertices[i], b.vertices[i]);
    EXPECT_EQ(a.cells, b.cells);
}

TEST(DiskMesh, RejectsBadSizes) {
    EXPECT_THROW(generate_disk_mesh(1.0, 0.0), InvalidInput);
    EXPECT_THROW(generate_disk_mesh(1.0, 2.0), InvalidInput);
    EXPECT_THROW(generate_disk_mesh(-1.0, 0.1), InvalidInput);
    EXPECT_THROW(generate_disk_mesh(1.0, 1e-5), ResourceError);
}

TEST(AnnulusMesh, TwoTaggedBoundaryComponents) {
    const Mesh m = generate_annulus_mesh(0.5, 1.0, 0.1);
    EXPECT_EQ(m.boundary_component_count(), 2u);
    std::set<int> tags;
    for (const auto& f : m.boundary) {
        tags.insert(f.tag);
        const double r = std::hypot(m.vertices[f.v[0]][0], m.vertices[f.v[0]][1]);
        EXPECT_NEAR(r, f.tag == 0 ? 1.0 : 0.5, 1e-12);
    }
    EXPECT_EQ(tags, (std::set<int>{0, 1}));
    EXPECT_NO_THROW(check_mesh(m));
}

TEST(IntervalMesh, UniformVertices) {
    const Mesh m = generate_interval_mesh(0.0, 1.0, 4);
    ASSERT_EQ(m.vertices.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(m.vertices[i][0], 0.25 * i);
    const Mesh w = generate_interval_mesh(-2.0, 3.0, 10);
    for (std::size_t k = 0; k < w.cells.size(); ++k) EXPECT_NEAR(w.chart_measure(k), 0.5, 1e-15);
}

TEST(IntervalMesh, ConormalsPointInward) {
    const Mesh m = generate_interval_mesh(0.0, 1.0, 4);
    ASSERT_EQ(m.boundary.size(), 2u);
    for (const auto& f : m.boundary) {
        const double x = m.vertices[f.v[0]][0];
        EXPECT_EQ(f.normal[0], x == 0.0 ? 1.0 : -1.0);
        EXPECT_EQ(f.tag, x == 0.0 ? 0 : 1);
    }
    EXPECT_THROW(generate_interval_mesh(1.0, 0.0, 4), InvalidInput);
    EXPECT_THROW(generate_interval_mesh(0.0, 1.0, 1), InvalidInput);
}

TEST(Conormal, UnitInSigmaAndInward) {
    const auto metric = MetricField::custom(2, parse_expression("1 + x1^2"), parse_expression("0.2*x1*x2"),
                                            parse_expression("2 + x2^2"), parse_expression("exp(x1)"));
    for (const Mesh& m : {generate_disk_mesh(1.0, 0.2), generate_annulus_mesh(0.4, 1.0, 0.2)}) {
        for (const auto& f : m.boundary) {
            const Vec2& a = m.vertices[f.v[0]];
            const Vec2& b = m.vertices[f.v[1]];
            const Vec2 mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
            const Vec2 nu = inward_conormal(metric, f, mid);
            EXPECT_NEAR(metric.sigma(mid).quad(nu), 1.0, 1e-10);
            // a small step along nu lands in the adjacent cell
            const Vec2 p{mid[0] + 1e-6 * nu[0], mid[1] + 1e-6 * nu[1]};
            const auto& c = m.cells[f.cell];
            auto side = [&](const Vec2& q, const Vec2& r, const Vec2& s) {
                return (r[0] - q[0]) * (s[1] - q[1]) - (r[1] - q[1]) * (s[0] - q[0]);
            };
            for (int i = 0; i < 3; ++i)
                EXPECT_GE(side(m.vertices[c[i]], m.vertices[c[(i + 1) % 3]], p), -1e-14);
        }
    }
}

TEST(Quadrature, RulesIntegrateQuadraticsExactly) {
    const auto& t = quadrature::triangle();
    double s = 0.0, sxx = 0.0;
    for (std::size_t q = 0; q < t.weights.size(); ++q) {
        s += t.weights[q];
        sxx += t.weights[q] * t.bary[q][1] * t.bary[q][1];
    }
    EXPECT_NEAR(s, 1.0, 1e-15);
    EXPECT_NEAR(sxx, 1.0 / 6.0, 1e-15);  // mean of lambda^2 over a triangle
    const auto& g = quadrature::segment();
    double c3 = 0.0;
    for (std::size_t q = 0; q < g.weights.size(); ++q) c3 += g.weights[q] * std::pow(g.bary[q][0], 3);
    EXPECT_NEAR(c3, 0.25, 1e-15);
}

TEST(Distance, RadiusFromCenter) {
    const Mesh m = generate_disk_mesh(1.0, 0.05);
    const auto metric = MetricField::euclidean(2);
    const ScalarField d = geodesic_distance_field(m, metric, nearest_vertex(m, {0, 0}));
    EXPECT_EQ(d[nearest_vertex(m, {0, 0})], 0.0);
    const auto mask = m.boundary_vertex_mask();
    for (std::size_t v = 0; v < mask.size(); ++v)
        if (mask[v]) {
            EXPECT_NEAR(d[v], 1.0, 0.03);
        }
}

TEST(Distance, ConvergesUnderRefinement) {
    double previous = 1.0;
    for (double h : {0.2, 0.1, 0.05, 0.025}) {
        const Mesh m = generate_disk_mesh(1.0, h);
        const ScalarField d = geodesic_distance_field(m, MetricField::euclidean(2), nearest_vertex(m, {0, 0}));
        const auto mask = m.boundary_vertex_mask();
        double worst = 0.0;
        for (std::size_t v = 0; v < mask.size(); ++v)
            if (mask[v]) worst = std::max(worst, std::fabs(d[static_cast<Eigen::Index>(v)] - 1.0));
        EXPECT_LT(worst, previous);
        previous = worst;
    }
    EXPECT_LT(previous, 0.015);
}

TEST(Distance, ScalesWithConformalFactor) {
    const Mesh m = generate_disk_mesh(1.0, 0.1);
    const ScalarField a = geodesic_distance_field(m, MetricField::euclidean(2), 0);
    const ScalarField b = geodesic_distance_field(m, MetricField::radial_warp(2, Expression(3.0), Expression(1.0)), 0);
    EXPECT_LT((b - 3.0 * a).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Distance, IntervalIsExact) {
    const Mesh iv = generate_interval_mesh(0.0, 2.0, 8);
    const ScalarField d = geodesic_distance_field(iv, MetricField::euclidean(1), 2);
    for (int i = 0; i <= 8; ++i) EXPECT_NEAR(d[i], std::fabs(0.25 * i - 0.5), 1e-15);
}

TEST(Distance, TriangleInequalityAndLipschitz) {
    const Mesh m = generate_disk_mesh(1.0, 0.15);
    const auto metric = MetricField::radial_warp(2, parse_expression("1 + 0.5*r^2"), Expression(1.0));
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> V(0, static_cast<int>(m.vertices.size()) - 1);
    for (int k = 0; k < 10; ++k) {
        const int a = V(rng), b = V(rng), c = V(rng);
        const ScalarField da = geodesic_distance_field(m, metric, a);
        const ScalarField db = geodesic_distance_field(m, metric, b);
        EXPECT_LE(da[c], da[b] + db[c] + 1e-12);
        EXPECT_NEAR(da[b], db[a], 0.1);
        const auto nbrs = m.vertex_neighbors();
        for (std::size_t v = 0; v < m.vertices.size(); ++v)
            for (int w : nbrs[v])
                EXPECT_LE(std::fabs(da[v] - da[w]),
                          mesh_detail::sigma_edge_length(metric, m.vertices[v], m.vertices[w]) + 1e-12);
    }
}

TEST(Distance, DisconnectedMeshIsReported) {
    Mesh m;
    m.dim = 2;
    m.vertices = {{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}};
    m.cells = {{0, 1, 2}, {3, 4, 5}};
    build_boundary(m);
    EXPECT_THROW(geodesic_distance_field(m, MetricField::euclidean(2), 0), UnreachableVertex);
}

TEST(BoundaryDistance, ZeroOnBoundaryAndHalfAtMidInterval) {
    const Mesh iv = generate_interval_mesh(0.0, 1.0, 10);
    const ScalarField d = boundary_distance_field(iv, MetricField::euclidean(1));
    EXPECT_NEAR(d[5], 0.5, 1e-15);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[10], 0.0);

    const Mesh disk = generate_disk_mesh(1.0, 0.05);
    const ScalarField dd = boundary_distance_field(disk, MetricField::euclidean(2));
    EXPECT_NEAR(dd.maxCoeff(), 1.0, 0.03);
    const auto mask = disk.boundary_vertex_mask();
    for (std::size_t v = 0; v < mask.size(); ++v)
        if (mask[v]) {
            EXPECT_EQ(dd[v], 0.0);
        }
}

TEST(MeshChecks, RejectsNonConformingAndInvertedCells) {
    Mesh m;
    m.dim = 2;
    m.vertices = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {-1, -1}};
    m.cells = {{0, 1, 2}, {1, 3, 2}, {0, 1, 4}, {0, 1, 3}};
    EXPECT_THROW(build_boundary(m), InvalidInput);
    Mesh inv;
    inv.dim = 2;
    inv.vertices = {{0, 0}, {0, 1}, {1, 0}};
    inv.cells = {{0, 1, 2}};
    build_boundary(inv);
    EXPECT_THROW(check_mesh(inv), InvalidInput);
}

TEST(Distance, ThroughEdgeUpdateFollowsPlaneWaves) {
    const Sym2 I{1.0, 0.0, 1.0};
    // A front parallel to the edge reaches c perpendicularly.
    EXPECT_NEAR(mesh_detail::through_edge(I, {0, 0}, {1, 0}, {0.5, 1.0}, 0.0, 0.0), 1.0, 1e-15);
    // A point source at the origin seen across a cell of size e: never below
    // the true distance, and the excess shrinks like e^2.
    auto excess = [&](double e) {
        const double d = mesh_detail::through_edge(I, {1, 0}, {1, e}, {1 + e, 0.5 * e}, 1.0, std::hypot(1.0, e));
        return d - std::hypot(1.0 + e, 0.5 * e);
    };
    EXPECT_GE(excess(0.1), 0.0);
    EXPECT_NEAR(excess(0.1) / excess(0.05), 4.0, 0.4);
    // A wide gap in arrival times falls back to the edge update.
    EXPECT_NEAR(mesh_detail::through_edge(I, {0, 0}, {1, 0}, {0, 1}, 0.0, 5.0), 1.0, 1e-15);
}
