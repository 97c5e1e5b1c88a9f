/**
 * @file acceptance.cpp
 * @brief End-to-end acceptance checks. Prints one PASS/FAIL line per check
 * and exits non-zero when any check fails.
 */
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "capgraph.hpp"
#include "capgraph/cli.hpp"

using namespace capgraph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

std::string signed_term(double c, const std::string& factor) {
    std::string s = c < 0 ? " - " : " + ";
    s += fmt("%.6f", std::fabs(c));
    if (!factor.empty()) s += "*" + factor;
    return s;
}

MetricField leaf_1d(const std::string& s11, const std::string& gamma) {
    return MetricField::custom(1, Expression::parse(s11), Expression(0.0), Expression(1.0), Expression::parse(gamma));
}

MetricField warped_disk() {
    return MetricField::radial_warp(2, Expression::parse("1 + 0.1*r^2"), Expression::parse("exp(0.4*x1)"));
}

ScalarField smooth_state(const Mesh& mesh, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> U(-scale, scale);
    const double a = U(rng), b = U(rng), c = U(rng), d = U(rng), e = U(rng);
    ScalarField u(static_cast<Eigen::Index>(mesh.vertices.size()));
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const auto& x = mesh.vertices[v];
        u[static_cast<Eigen::Index>(v)] = a + b * x[0] + c * x[1] + d * std::sin(2.0 * x[0] + x[1]) + e * x[0] * x[0];
    }
    return u;
}

double max_abs(const ScalarField& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

Outcome trivial_state() {
    const Mesh mesh = generate_disk_mesh(1.0, 0.1);
    const MetricField metric = warped_disk();
    const Discretization disc(mesh, metric);
    const auto problem = CapillaryProblem::from_strings("1 + s + 0.3*x2", "0.4 - 0.1*s");
    const ScalarField zero = ScalarField::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
    const double r = residual(disc, zero, 0.0, problem).lpNorm<Eigen::Infinity>();
    const auto [u, rep] = newton_solve(disc, zero, 0.0, problem);
    return {r <= 1e-14 && rep.iterations == 0 && max_abs(u) == 0.0,
            "|R(0, 0)|_inf = " + sci(r) + ", Newton iterations = " + std::to_string(rep.iterations)};
}

Outcome linear_gravity_is_flat() {
    const auto problem = CapillaryProblem::from_strings("s", "0");
    const Mesh disk = generate_disk_mesh(1.0, 0.1);
    const MetricField m2 = warped_disk();
    const double u2 = max_abs(continuation_solve(problem, m2, disk).u);
    const Mesh iv = generate_interval_mesh(0.0, 1.0, 64);
    const MetricField m1 = leaf_1d("1", "exp(2*x1)");
    const double u1 = max_abs(continuation_solve(problem, m1, iv).u);
    return {u2 < 1e-9 && u1 < 1e-9, "max|u| disk = " + sci(u2) + ", interval = " + sci(u1)};
}

Outcome manufactured_cap() {
    const MetricField metric = MetricField::euclidean(2);
    const Expression u_exact = Expression::parse("sqrt(4 - r^2)");
    const auto angle_data = CapillaryProblem::from_strings("s", "-0.5");
    std::vector<TracePoint> err, angle;
    for (double h : {0.2, 0.1, 0.05}) {
        const Mesh mesh = generate_disk_mesh(1.0, h);
        const auto problem = mms_manufacture(metric, mesh, u_exact, 1.0);
        const Discretization disc(mesh, metric);
        const auto st = continuation_solve(disc, problem);
        const double hh = mesh.max_edge_length();
        err.push_back({hh, (st.u - ExactSolution(u_exact, 2).interpolate(mesh)).lpNorm<Eigen::Infinity>()});
        angle.push_back({hh, contact_angle_residual(disc, st.u, 1.0, angle_data).observed});
    }
    const double p = observed_order(err), q = observed_order(angle);
    return {p >= 1.8 && q >= 0.8, "Linf order " + fmt("%.3f", p) + " (errors " + sci(err[0].value) + ", " +
                                      sci(err[1].value) + ", " + sci(err[2].value) + "), contact-angle order " +
                                      fmt("%.3f", q)};
}

Outcome one_dimensional_oracle() {
    struct Case {
        const char* s11;
        const char* gamma;
        const char* psi;
        const char* phi;
    };
    const std::vector<Case> cases{
        {"1", "1", "1 + s", "0.3"},
        {"1", "exp(2*x1)", "1 + s", "0.2"},
        {"1 + x1^2", "1", "x1 + s + s^3", "-0.4"},
        {"1", "1 + x1", "exp(s) - 0.5", "0.3 - 0.1*tanh(s)"},
        {"1.5", "cosh(x1)^2", "2*s - sin(3*x1)", "0.5"},
    };
    const int cells = 64, dense = 4096;
    double worst_ratio = 0.0;
    std::string detail;
    bool ok = true;
    for (const auto& c : cases) {
        const Mesh mesh = generate_interval_mesh(0.0, 1.0, cells);
        const MetricField metric = leaf_1d(c.s11, c.gamma);
        const auto problem = CapillaryProblem::from_strings(c.psi, c.phi);
        const auto st = continuation_solve(problem, metric, mesh);
        const auto ref = oracle_1d_solve(problem, metric, 0.0, 1.0, dense);
        double diff = 0.0;
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
            diff = std::max(diff, std::fabs(st.u[static_cast<Eigen::Index>(v)] - ref(mesh.vertices[v][0])));
        const double h = 1.0 / cells, hd = 1.0 / dense;
        const double bound = 5.0 * (h * h + hd * hd);
        ok = ok && diff <= bound;
        worst_ratio = std::max(worst_ratio, diff / bound);
        if (!detail.empty()) detail += ", ";
        detail += sci(diff);
    }
    return {ok, "differences " + detail + " against " + sci(5.0 * (1.0 / (64.0 * 64.0) + 1.0 / (4096.0 * 4096.0))) +
                    " (worst ratio " + fmt("%.3f", worst_ratio) + ")"};
}

/**
 * Summing the discrete equations gives int gamma^{-1/2} Psi(x, u) = int_Gamma gamma^{-1/2} Phi(x, u).
 * Returns true when no field with |u| <= B can satisfy that balance: the
 * largest interior side is smaller than the smallest boundary side.
 */
bool balance_excludes(const Discretization& disc, const CapillaryProblem& p, double B) {
    const Mesh& mesh = disc.mesh();
    double interior = 0.0;
    for (std::size_t k = 0; k < mesh.cells.size(); ++k)
        for (int q = 0; q < disc.points_per_cell(); ++q) {
            const auto& pt = disc.point(k, q);
            interior += pt.weight * pt.inv_sqrt_gamma * std::max(std::fabs(p.psi(pt.x, -B)), std::fabs(p.psi(pt.x, B)));
        }
    double lo = 0.0, hi = 0.0;
    bool one_sign = true;
    for (std::size_t f = 0; f < mesh.boundary.size(); ++f)
        for (std::size_t i = disc.facet_point_begin(f); i < disc.facet_point_end(f); ++i) {
            const auto& pt = disc.facet_point(i);
            const double a = p.phi(pt.x, B), b = p.phi(pt.x, -B);
            one_sign = one_sign && a * b > 0.0;
            lo += pt.weight * pt.inv_sqrt_gamma * a;
            hi += pt.weight * pt.inv_sqrt_gamma * b;
        }
    return one_sign && lo * hi > 0.0 && std::min(std::fabs(lo), std::fabs(hi)) > interior;
}

Outcome height_bounds() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const Mesh mesh = generate_disk_mesh(1.0, 0.1);
    const double h = mesh.max_edge_length();
    const std::vector<MetricField> metrics{
        MetricField::euclidean(2),
        MetricField::radial_warp(2, Expression(1.0), Expression::parse("1 + 0.5*r^2")),
        MetricField::radial_warp(2, Expression::parse("1 + 0.2*r^2"), Expression::parse("exp(0.5*x1)")),
    };
    int passed = 0, total = 0;
    double worst = -1e300;
    std::string failures;
    for (int k = 0; k < 20; ++k) {
        const MetricField& metric = metrics[static_cast<std::size_t>(k) % metrics.size()];
        const double c0 = 1.5 * U(rng), cx = U(rng) - 0.5, c1 = 0.5 + 1.5 * U(rng), c3 = 0.5 * U(rng);
        const double f0 = U(rng) - 0.5, f1 = 0.3 * U(rng);
        const std::string psi = fmt("%.6f", c0) + signed_term(cx, "x1") + signed_term(c1, "s") + signed_term(c3, "s^3");
        const std::string phi = fmt("%.6f", f0) + signed_term(-f1, "tanh(s)");
        const auto problem = CapillaryProblem::from_strings(psi, phi);
        const auto rep = validate_conditions(problem, mesh, metric, kDefaultSRange);
        ++total;
        if (!rep.all_passed() || rep.mu < 0.0) {
            failures += " [" + psi + "; " + phi + ": invalid data]";
            continue;
        }
        const auto hb = height_bound(rep, metric, mesh);
        const Discretization disc(mesh, metric);
        const double u = max_abs(continuation_solve(disc, problem).u);
        worst = std::max(worst, u - hb.value);
        if (u <= hb.value + 10.0 * h * h)
            ++passed;
        else
            failures += " [" + psi + "; " + phi + ": max|u| " + sci(u) + " > " + sci(hb.value) +
                        (balance_excludes(disc, problem, hb.value) ? "; flux balance rules out |u| <= B" : "") + "]";
    }
    return {passed == total, std::to_string(passed) + "/" + std::to_string(total) +
                                 " within B + 10h^2, worst max|u| - B = " + sci(worst) + failures};
}

struct JacobianCase {
    Mesh mesh;
    MetricField metric;
};

Outcome jacobian_matches_differences() {
    const auto problem = CapillaryProblem::from_strings("0.5 + s + 0.2*s^3 + 0.3*x1", "0.3 - 0.2*tanh(s)");
    std::vector<JacobianCase> cases;
    cases.push_back({generate_interval_mesh(0.0, 1.0, 40), leaf_1d("1 + 0.5*x1", "exp(x1)")});
    cases.push_back({generate_disk_mesh(1.0, 0.15), warped_disk()});
    std::mt19937_64 rng(77);
    double worst = 0.0;
    int checked = 0;
    for (const auto& c : cases) {
        const Discretization disc(c.mesh, c.metric);
        for (int k = 0; k < 10; ++k) {
            const ScalarField u = smooth_state(c.mesh, rng, 0.8);
            const ScalarField v = smooth_state(c.mesh, rng, 1.0);
            const double tau = 0.1 + 0.09 * k;
            const double eps = 1e-6;
            const Eigen::VectorXd fd =
                (residual(disc, u + eps * v, tau, problem) - residual(disc, u - eps * v, tau, problem)) / (2 * eps);
            const Eigen::VectorXd jv = jacobian(disc, u, tau, problem) * v;
            worst = std::max(worst, (fd - jv).norm() / std::max(jv.norm(), 1e-300));
            ++checked;
        }
    }
    return {worst < 1e-5, std::to_string(checked) + " states, worst relative error " + sci(worst)};
}

Outcome energy_gradient_is_residual() {
    const auto problem = CapillaryProblem::from_strings("0.5 + s + 0.2*s^3 + 0.3*x1", "0.3 - 0.2*tanh(s)");
    const Mesh mesh = generate_disk_mesh(1.0, 0.15);
    const MetricField metric = warped_disk();
    const Discretization disc(mesh, metric);
    std::mt19937_64 rng(78);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        const ScalarField u = smooth_state(mesh, rng, 0.8);
        const ScalarField v = smooth_state(mesh, rng, 1.0);
        const double tau = 0.1 + 0.09 * k;
        const double eps = 1e-5;
        const double fd = (energy(disc, u + eps * v, tau, problem) - energy(disc, u - eps * v, tau, problem)) / (2 * eps);
        const double exact = residual(disc, u, tau, problem).dot(v);
        worst = std::max(worst, std::fabs(fd - exact) / std::max(1.0, std::fabs(exact)));
    }
    return {worst < 1e-6, "10 pairs, worst relative error " + sci(worst)};
}

Outcome displacement_identity() {
    const Mesh mesh = generate_disk_mesh(1.0, 0.05);
    const MetricField metric = warped_disk();
    const std::vector<double> taus{1e-2, 5e-3, 2.5e-3};
    const ScalarField zeta = cli_detail::interior_bump(mesh, {0.0, 0.0}, 0.5);
    const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
    ScalarField linear(n);
    for (Eigen::Index v = 0; v < n; ++v) linear[v] = 0.4 * mesh.vertices[v][0] - 0.3 * mesh.vertices[v][1];
    const auto problem = CapillaryProblem::from_strings("1 + s", "0.3");
    const ScalarField solution = continuation_solve(problem, metric, mesh).u;

    bool ok = true;
    std::string detail;
    for (const auto& [name, u] : std::vector<std::pair<std::string, ScalarField>>{
             {"constant", ScalarField::Constant(n, 0.25)}, {"linear", linear}, {"solution", solution}}) {
        const auto d = lemma1i_check(metric, mesh, u, zeta, taus);
        const bool pass = d.exact || (d.order >= 0.8 && d.order <= 1.2);
        ok = ok && pass && d.vertices_checked > 0;
        if (!detail.empty()) detail += ", ";
        detail += name + (d.exact ? " exact" : " order " + fmt("%.3f", d.order));
    }
    return {ok, detail};
}

Outcome uniqueness() {
    const Mesh mesh = generate_disk_mesh(1.0, 0.1);
    const MetricField metric = MetricField::euclidean(2);
    const auto problem = CapillaryProblem::from_strings("1 + s", "0.3");
    const auto rep = validate_conditions(problem, mesh, metric, kDefaultSRange);
    const double amplitude = height_bound(rep, metric, mesh).value;
    const Discretization disc(mesh, metric);
    const ScalarField u = continuation_solve(disc, problem).u;
    const auto r = uniqueness_probe(disc, problem, u, amplitude, 5, 2024);
    return {r.converged == 5 && r.spread < 1e-7, "amplitude " + fmt("%.3f", amplitude) + ", converged " +
                                                     std::to_string(r.converged) + "/5, spread " + sci(r.spread)};
}

Outcome gradient_certificates() {
    const MetricField metric = MetricField::euclidean(2);
    const auto problem = CapillaryProblem::from_strings("1 + s", "0.3");
    std::vector<Certificate> interior, boundary;
    for (double h : {0.2, 0.1, 0.05}) {
        const Mesh mesh = generate_disk_mesh(1.0, h);
        const Discretization disc(mesh, metric);
        const ScalarField u = continuation_solve(disc, problem).u;
        interior.push_back(interior_gradient_certificate(disc, u, nearest_vertex(mesh, {0.0, 0.0}), 0.5));
        boundary.push_back(boundary_gradient_certificate(disc, u));
    }
    const auto a = stability_certificate("interior", interior, 0.25);
    const auto b = stability_certificate("boundary", boundary, 0.25);
    return {a.pass && b.pass && !a.provisional(),
            "interior Q " + fmt("%.4f", interior[0].observed) + "/" + fmt("%.4f", interior[1].observed) + "/" +
                fmt("%.4f", interior[2].observed) + " (variation " + fmt("%.4f", a.observed) + "), sup W " +
                fmt("%.4f", boundary[0].observed) + "/" + fmt("%.4f", boundary[1].observed) + "/" +
                fmt("%.4f", boundary[2].observed) + " (variation " + fmt("%.4f", b.observed) + ")"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome deterministic_runs() {
    const fs::path root = fs::temp_directory_path() / "capgraph_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "run.ini";
    std::ofstream(cfg) << "seed = 11\n[domain]\nshape = disk\nh = 0.1\n[problem]\npsi = 1 + s\nphi = 0.3\n";
    std::ostringstream out, err;
    const int a = run_command({"capgraph", "solve", "--config", cfg.string(), "--output-dir", (root / "a").string()},
                              out, err);
    const int b = run_command({"capgraph", "solve", "--config", cfg.string(), "--output-dir", (root / "b").string()},
                              out, err);
    const std::string csv_a = slurp(root / "a" / "solution.csv"), csv_b = slurp(root / "b" / "solution.csv");
    const std::string rep_a = slurp(root / "a" / "report.jsonl"), rep_b = slurp(root / "b" / "report.jsonl");
    const bool same = !csv_a.empty() && !rep_a.empty() && csv_a == csv_b && rep_a == rep_b;
    fs::remove_all(root);
    return {a == kExitOk && b == kExitOk && same, std::string("exit codes ") + std::to_string(a) + "/" +
                                                      std::to_string(b) + ", outputs " +
                                                      (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"trivial-state", trivial_state},
        {"linear-gravity-flat", linear_gravity_is_flat},
        {"manufactured-cap-orders", manufactured_cap},
        {"one-dimensional-oracle", one_dimensional_oracle},
        {"height-bound", height_bounds},
        {"jacobian-finite-differences", jacobian_matches_differences},
        {"energy-gradient", energy_gradient_is_residual},
        {"normal-displacement", displacement_identity},
        {"uniqueness-restarts", uniqueness},
        {"gradient-certificates", gradient_certificates},
        {"deterministic-output", deterministic_runs},
    };
    int failed = 0;
    for (const auto& [name, check] : checks) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %-28s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu checks passed\n", static_cast<int>(checks.size()) - failed, checks.size());
    return failed == 0 ? 0 : 1;
}
