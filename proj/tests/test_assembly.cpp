#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace capgraph;
using capgraph::testing::area;
using capgraph::testing::smooth_field;

namespace {

struct Fixture {
    Mesh mesh = generate_disk_mesh(1.0, 0.2);
    MetricField metric = MetricField::radial_warp(2, parse_expression("1 + 0.2*r^2"), parse_expression("exp(0.5*x1)"));
    Discretization disc{mesh, metric};
    CapillaryProblem problem = CapillaryProblem::from_strings("0.5 + s + 0.2*s^3 + 0.1*x2", "0.3 - 0.2*tanh(s)");
};

}  // namespace

TEST(Residual, VanishesAtZeroWithoutForcing) {
    Fixture f;
    const ScalarField u = ScalarField::Zero(static_cast<Eigen::Index>(f.mesh.vertices.size()));
    EXPECT_EQ(residual(f.disc, u, 0.0, f.problem).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Residual, ConstantPotentialIntegratesToArea) {
    const Mesh mesh = generate_disk_mesh(1.0, 0.2);
    const auto metric = MetricField::euclidean(2);
    const Discretization disc(mesh, metric);
    const auto p = CapillaryProblem::from_strings("0.7", "0");
    const ScalarField u = ScalarField::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
    EXPECT_NEAR(residual(disc, u, 1.0, p).sum(), 0.7 * area(mesh), 1e-12);
    EXPECT_NEAR(disc.sigma_volume(), area(mesh), 1e-12);
}

TEST(Residual, RejectsBadInputs) {
    Fixture f;
    const ScalarField u = ScalarField::Zero(static_cast<Eigen::Index>(f.mesh.vertices.size()));
    EXPECT_THROW(residual(f.disc, u, 1.5, f.problem), InvalidInput);
    EXPECT_THROW(residual(f.disc, u, -0.1, f.problem), InvalidInput);
    EXPECT_THROW(residual(f.disc, ScalarField::Zero(3), 0.5, f.problem), InvalidInput);
    ScalarField bad = u;
    bad[0] = NAN;
    EXPECT_THROW(residual(f.disc, bad, 0.5, f.problem), InvalidInput);
}

TEST(Residual, ShiftCovariance) {
    const Mesh mesh = generate_disk_mesh(1.0, 0.2);
    const auto metric = MetricField::euclidean(2);
    const Discretization disc(mesh, metric);
    const ScalarField u = smooth_field(mesh, 3);
    const auto a = CapillaryProblem::from_strings("1 + s", "0.3");
    const auto b = CapillaryProblem::from_strings("1.7 + s", "0.3");
    const ScalarField shifted = u.array() + 0.7;
    EXPECT_LT((residual(disc, shifted, 0.6, a) - residual(disc, u, 0.6, b)).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Jacobian, FlatStateIsInverseLeafMetric) {
    // At grad u = 0 and tau = 0 the Jacobian is the stiffness matrix of gamma^{-1} sigma^{-1}.
    const Mesh mesh = generate_disk_mesh(1.0, 0.3);
    const auto metric = MetricField::euclidean(2);
    const Discretization disc(mesh, metric);
    const ScalarField u = ScalarField::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
    const SparseMatrix J = jacobian(disc, u, 0.0, CapillaryProblem::from_strings("s", "0"));
    ScalarField x(u.size());
    for (Eigen::Index v = 0; v < x.size(); ++v) x[v] = mesh.vertices[v][0];
    const Eigen::VectorXd Jx = J * x;
    // sum_a (J x)_a = 0 for every field (constants are in the kernel), and x^T J x = |Omega_h|.
    EXPECT_NEAR(Jx.sum(), 0.0, 1e-12);
    EXPECT_NEAR(x.dot(Jx), area(mesh), 1e-12);
}

TEST(Jacobian, SymmetricAndPositiveDefinite) {
    Fixture f;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ScalarField u = smooth_field(f.mesh, seed);
        const SparseMatrix J = jacobian(f.disc, u, 0.8, f.problem);
        const SparseMatrix Jt = J.transpose();
        EXPECT_LT((J - Jt).norm(), 1e-13 * J.norm());
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(J);
        ASSERT_EQ(ldlt.info(), Eigen::Success);
        EXPECT_GT(ldlt.vectorD().minCoeff(), 0.0);
    }
}

TEST(Jacobian, MatchesFiniteDifferences) {
    Fixture f;
    const ScalarField u = smooth_field(f.mesh, 11);
    const ScalarField v = smooth_field(f.mesh, 12, 1.0);
    const double eps = 1e-6;
    const Eigen::VectorXd fd =
        (residual(f.disc, u + eps * v, 0.7, f.problem) - residual(f.disc, u - eps * v, 0.7, f.problem)) / (2 * eps);
    const Eigen::VectorXd Jv = jacobian(f.disc, u, 0.7, f.problem) * v;
    EXPECT_LT((fd - Jv).norm() / Jv.norm(), 1e-7);
}

TEST(Energy, FlatGraphHasLeafArea) {
    const Mesh mesh = generate_disk_mesh(1.0, 0.2);
    const auto metric = MetricField::euclidean(2);
    const Discretization disc(mesh, metric);
    const ScalarField u = ScalarField::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
    EXPECT_NEAR(energy(disc, u, 1.0, CapillaryProblem::from_strings("1 + s", "0.4")), area(mesh), 1e-12);
}

TEST(Energy, GradientIsTheResidual) {
    Fixture f;
    const ScalarField u = smooth_field(f.mesh, 21);
    const ScalarField v = smooth_field(f.mesh, 22, 1.0);
    const double eps = 1e-5;
    const double fd =
        (energy(f.disc, u + eps * v, 0.9, f.problem) - energy(f.disc, u - eps * v, 0.9, f.problem)) / (2 * eps);
    const double exact = residual(f.disc, u, 0.9, f.problem).dot(v);
    EXPECT_NEAR(fd, exact, 1e-6 * std::max(1.0, std::fabs(exact)));
}

TEST(Assembly, IndependentOfThreadCount) {
    Fixture f;
    const ScalarField u = smooth_field(f.mesh, 31);
    const auto one = assemble(f.disc, u, 0.5, f.problem, {1});
    const auto four = assemble(f.disc, u, 0.5, f.problem, {4});
    EXPECT_EQ(one.residual, four.residual);
    EXPECT_EQ(one.energy, four.energy);
    EXPECT_EQ(Eigen::MatrixXd(one.jacobian), Eigen::MatrixXd(four.jacobian));
}

TEST(Assembly, IntervalMatchesTwoDimensionalScaling) {
    // A 1D leaf: residual of the linear graph u = c x has the flux c / sqrt(1 + c^2) at the ends.
    const Mesh iv = generate_interval_mesh(0.0, 1.0, 8);
    const auto metric = MetricField::euclidean(1);
    const Discretization disc(iv, metric);
    ScalarField u(9);
    for (int i = 0; i < 9; ++i) u[i] = 0.5 * iv.vertices[i][0];
    const Eigen::VectorXd R = residual(disc, u, 0.0, CapillaryProblem::from_strings("s", "0"));
    const double flux = 0.5 / std::sqrt(1.25);
    EXPECT_NEAR(R[0], -flux, 1e-14);
    EXPECT_NEAR(R[8], flux, 1e-14);
    EXPECT_NEAR(R.segment(1, 7).lpNorm<Eigen::Infinity>(), 0.0, 1e-14);
}

TEST(Discretization, RejectsDimensionMismatch) {
    const Mesh mesh = generate_disk_mesh(1.0, 0.3);
    const auto metric = MetricField::euclidean(1);
    EXPECT_THROW(Discretization(mesh, metric), InvalidInput);
}
