#pragma once
/**
 * @file cli.hpp
 * @brief Command dispatch for the capgraph tool: solve, verify, mms,
 * convergence, oracle1d and export.
 *
 * Exit codes: 0 success, 1 solver or certificate failure, 2 configuration
 * or input error. Progress records and diagnostics go to the error stream
 * as one JSON object per line; tables and summaries go to the output stream.
 */
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "capgraph/config.hpp"
#include "capgraph/error.hpp"
#include "capgraph/io.hpp"
#include "capgraph/mms.hpp"
#include "capgraph/oracle1d.hpp"
#include "capgraph/solver.hpp"
#include "capgraph/verify.hpp"

namespace capgraph {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSolverFailure = 1;
inline constexpr int kExitConfigError = 2;

/// Environment variable holding the default worker count.
inline constexpr const char* kThreadsEnv = "CAPGRAPH_THREADS";

struct CliOptions {
    std::string command;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> output_dir;
    std::optional<std::string> solution;  // verify, export: stored solution CSV
};

namespace cli_detail {

using json = nlohmann::ordered_json;

inline void diagnostic(std::ostream& err, const std::string& kind, const std::string& message) {
    json j;
    j["event"] = "error";
    j["kind"] = kind;
    j["message"] = message;
    err << j.dump() << std::endl;
}

inline void warning(std::ostream& err, const std::string& message) {
    json j;
    j["event"] = "warning";
    j["message"] = message;
    err << j.dump() << std::endl;
}

inline int resolve_threads(const CliOptions& o) {
    if (o.threads) return std::max(1, *o.threads);
    if (const char* env = std::getenv(kThreadsEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
        throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << std::scientific << v;
    return s.str();
}

/// Everything a command needs, built from the configuration.
struct Context {
    RunConfig cfg;
    int threads = 1;
    std::filesystem::path out_dir;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    std::filesystem::path output(const std::string& name) const { return out_dir / name; }

    Mesh mesh(std::optional<double> h = std::nullopt) const { return build_mesh(cfg.domain, h); }

    MetricField metric(const Mesh& mesh) const {
        MetricField m = build_metric(cfg.metric, mesh.dim);
        for (const auto& v : mesh.vertices) m.check_consistency(v);
        return m;
    }

    ContinuationConfig continuation() const {
        ContinuationConfig c = continuation_config(cfg.solver, threads);
        std::ostream* e = err;
        c.progress = [e](const ProgressRecord& r) {
            json j;
            j["event"] = "step";
            j["tau"] = r.tau;
            j["dtau"] = r.dtau;
            j["iterations"] = r.newton_iterations;
            j["residual"] = r.residual_norm;
            j["accepted"] = r.accepted;
            j["message"] = r.message;
            *e << j.dump() << std::endl;
        };
        return c;
    }

    std::vector<double> levels() const {
        if (!cfg.verify.levels.empty()) return cfg.verify.levels;
        const double h = nominal_h(cfg.domain);
        return {h, h / 2.0, h / 4.0};
    }

    std::pair<double, double> s_range() const { return {cfg.problem.s_min, cfg.problem.s_max}; }
};

/// Validates the problem, warning on violations; throws PreconditionError
/// unless the configuration allows unsafe runs.
inline ValidationReport validate(const Context& ctx, const CapillaryProblem& problem, const Mesh& mesh,
                                 const MetricField& metric) {
    auto rep = validate_conditions(problem, mesh, metric, ctx.s_range());
    for (const auto& c : rep.conditions)
        if (!c.passed) warning(*ctx.err, "condition (" + c.id + ") " + c.name + " violated: " + c.detail);
    if (!rep.all_passed() && !ctx.cfg.problem.unsafe)
        throw PreconditionError("problem violates the structural conditions (set [problem] unsafe = true to run anyway)");
    return rep;
}

inline Certificate interior_certificate(const Context& ctx, const Discretization& disc, const ScalarField& u) {
    const Mesh& mesh = disc.mesh();
    const int center = nearest_vertex(mesh, {ctx.cfg.verify.center_x1, ctx.cfg.verify.center_x2});
    try {
        return interior_gradient_certificate(disc, u, center, ctx.cfg.verify.interior_radius);
    } catch (const PreconditionError& e) {
        Certificate c;
        c.name = "interior-gradient";
        c.applicable = false;
        c.note = e.what();
        c.settle();
        return c;
    }
}

/// Single-resolution certificates for a converged solution.
inline std::vector<Certificate> solution_certificates(const Context& ctx, const Discretization& disc,
                                                      const ScalarField& u, const CapillaryProblem& problem,
                                                      const ValidationReport& rep) {
    std::vector<Certificate> certs;
    try {
        certs.push_back(check_height(u, height_bound(rep, disc.metric(), disc.mesh()), disc.mesh()));
    } catch (const PreconditionError& e) {
        Certificate c;
        c.name = "height";
        c.applicable = false;
        c.note = e.what();
        c.settle();
        certs.push_back(c);
    }
    certs.push_back(interior_certificate(ctx, disc, u));
    certs.push_back(boundary_gradient_certificate(disc, u));
    certs.push_back(contact_angle_residual(disc, u, 1.0, problem));
    if (disc.mesh().dim == 2 || disc.mesh().vertices.size() >= 5)
        certs.push_back(strong_form_residual(disc, u, 1.0, problem));
    return certs;
}

inline Certificate continuation_record(const ContinuationState& st) {
    Certificate c;
    c.name = "continuation";
    c.observed = st.tau;
    c.bound = 1.0;
    c.margin = st.tau - 1.0;
    int newton = 0;
    for (const auto& s : st.history) newton += s.newton_iterations;
    c.extras["steps"] = static_cast<double>(st.history.size());
    c.extras["newton_iterations"] = newton;
    c.extras["final_residual"] = st.history.empty() ? 0.0 : st.history.back().residual_norm;
    c.note = to_string(st.status);
    c.settle();
    return c;
}

inline void write_outputs(const Context& ctx, const Discretization& disc, const ScalarField& u,
                          const std::vector<Certificate>& certs) {
    const auto cols = solution_columns(disc, u);
    save_solution_csv(ctx.output(ctx.cfg.output.solution).string(), disc.mesh(), cols);
    save_report(ctx.output(ctx.cfg.output.report).string(), certs);
    if (!ctx.cfg.output.vtk.empty())
        save_vtk(ctx.output(ctx.cfg.output.vtk).string(), disc.mesh(),
                 {{"u", cols.u}, {"W", cols.W}, {"d_gamma_boundary", cols.d_gamma}});
    if (!ctx.cfg.output.mesh.empty()) save_mesh(ctx.output(ctx.cfg.output.mesh).string(), disc.mesh());
}

inline int summarize(const Context& ctx, const std::string& command, const std::vector<Certificate>& certs) {
    auto& out = *ctx.out;
    bool ok = true;
    for (const auto& c : certs) {
        out << command << ": " << std::left << std::setw(22) << c.name << ' '
            << (!c.applicable ? "n/a " : c.pass ? "pass" : "FAIL") << "  observed " << fmt(c.observed) << "  bound "
            << fmt(c.bound) << (c.provisional() ? "  (provisional)" : "") << "\n";
        ok = ok && c.pass;
    }
    return ok ? kExitOk : kExitSolverFailure;
}

inline int cmd_solve(const Context& ctx) {
    const Mesh mesh = ctx.mesh();
    const MetricField metric = ctx.metric(mesh);
    const CapillaryProblem problem = build_problem(ctx.cfg.problem);
    const auto rep = validate(ctx, problem, mesh, metric);
    const Discretization disc(mesh, metric);
    const auto st = continuation_solve(disc, problem, ctx.continuation());
    auto certs = solution_certificates(ctx, disc, st.u, problem, rep);
    certs.insert(certs.begin(), continuation_record(st));
    write_outputs(ctx, disc, st.u, certs);
    *ctx.out << "solve: converged at tau = 1 on " << mesh.vertices.size() << " vertices, max|u| = "
             << fmt(st.u.cwiseAbs().maxCoeff()) << "\n";
    summarize(ctx, "solve", certs);
    return kExitOk;
}

/// Bump of radius rho around @p center, zero on patches touching Gamma.
inline ScalarField interior_bump(const Mesh& mesh, const Vec2& center, double rho) {
    const PatchRecovery rec(mesh);
    const auto mask = mesh.boundary_vertex_mask();
    ScalarField z = ScalarField::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        bool near = false;
        for (int w : rec.patch(static_cast<int>(v))) near = near || mask[w];
        if (near) continue;
        const double d2 = (std::pow(mesh.vertices[v][0] - center[0], 2) + std::pow(mesh.vertices[v][1] - center[1], 2)) /
                          (rho * rho);
        if (d2 < 1.0) z[static_cast<Eigen::Index>(v)] = std::pow(1.0 - d2, 3);
    }
    return z;
}

inline std::string solution_path(const Context& ctx, const CliOptions& o) {
    return o.solution ? *o.solution : ctx.output(ctx.cfg.output.solution).string();
}

inline int cmd_verify(const Context& ctx, const CliOptions& o) {
    const Mesh mesh = ctx.mesh();
    const MetricField metric = ctx.metric(mesh);
    const CapillaryProblem problem = build_problem(ctx.cfg.problem);
    const auto rep = validate(ctx, problem, mesh, metric);
    const ScalarField u = load_solution_csv(solution_path(ctx, o), mesh);
    const Discretization disc(mesh, metric);

    NewtonOptions nopt = ctx.continuation().newton;
    const auto R = residual(disc, u, 1.0, problem, nopt.assembly);
    Certificate res;
    res.name = "weak-residual";
    res.observed = R.lpNorm<Eigen::Infinity>();
    res.bound = 100.0 * ctx.cfg.solver.tol;
    res.margin = res.bound - res.observed;
    res.settle();

    auto certs = solution_certificates(ctx, disc, u, problem, rep);
    certs.insert(certs.begin(), res);

    const Vec2 center{ctx.cfg.verify.center_x1, ctx.cfg.verify.center_x2};
    try {
        const auto zeta = interior_bump(mesh, center, ctx.cfg.verify.interior_radius);
        certs.push_back(lemma1i_check(metric, mesh, u, zeta, ctx.cfg.verify.lemma_taus).certificate);
    } catch (const PreconditionError& e) {
        Certificate c;
        c.name = "lemma1i";
        c.applicable = false;
        c.note = e.what();
        c.settle();
        certs.push_back(c);
    }

    double amplitude = 0.0;
    try {
        amplitude = height_bound(rep, metric, mesh).value;
    } catch (const PreconditionError&) {
    }
    const auto uq = uniqueness_probe(disc, problem, u, amplitude, ctx.cfg.verify.uniqueness_trials, ctx.cfg.seed, nopt);
    Certificate c;
    c.name = "uniqueness";
    c.observed = uq.spread;
    c.bound = 1e-7;
    c.margin = uq.failed ? -std::numeric_limits<double>::infinity() : c.bound - c.observed;
    c.extras["amplitude"] = amplitude;
    c.extras["converged"] = uq.converged;
    c.extras["failed"] = uq.failed;
    if (!uq.failures.empty()) c.note = uq.failures.front();
    c.settle();
    certs.push_back(c);

    save_report(ctx.output(ctx.cfg.output.report).string(), certs);
    return summarize(ctx, "verify", certs);
}

inline int cmd_mms(const Context& ctx) {
    const Expression u_exact = Expression::parse(ctx.cfg.mms.u_exact);
    std::vector<TracePoint> err_trace, angle_trace;
    auto& out = *ctx.out;
    out << "mms: u_exact = " << u_exact.to_string() << "\n";
    out << std::left << std::setw(14) << "h" << std::setw(10) << "vertices" << std::setw(16) << "Linf_error"
        << "contact_residual\n";
    for (double h : ctx.levels()) {
        const Mesh mesh = ctx.mesh(h);
        const MetricField metric = ctx.metric(mesh);
        const CapillaryProblem problem = mms_manufacture(metric, mesh, u_exact, ctx.cfg.mms.kappa0);
        const Discretization disc(mesh, metric);
        const auto st = continuation_solve(disc, problem, ctx.continuation());
        const ExactSolution exact(u_exact, mesh.dim);
        const double e = (st.u - exact.interpolate(mesh)).lpNorm<Eigen::Infinity>();
        const double a = contact_angle_residual(disc, st.u, 1.0, problem).observed;
        const double hh = mesh.max_edge_length();
        err_trace.push_back({hh, std::max(e, 1e-300)});
        angle_trace.push_back({hh, std::max(a, 1e-300)});
        out << std::setw(14) << fmt(hh) << std::setw(10) << mesh.vertices.size() << std::setw(16) << fmt(e) << fmt(a)
            << "\n";
    }
    std::vector<Certificate> certs{order_certificate("mms-linf-order", err_trace, 1.8),
                                   order_certificate("mms-contact-order", angle_trace, 0.8)};
    out << "mms: observed order Linf " << observed_order(err_trace) << ", contact angle "
        << observed_order(angle_trace) << "\n";
    save_report(ctx.output(ctx.cfg.output.report).string(), certs);
    summarize(ctx, "mms", certs);
    return kExitOk;
}

inline int cmd_convergence(const Context& ctx) {
    const CapillaryProblem problem = build_problem(ctx.cfg.problem);
    std::vector<Certificate> interior, boundary, contact;
    std::vector<double> hs, heights;
    auto& out = *ctx.out;
    out << std::left << std::setw(14) << "h" << std::setw(10) << "vertices" << std::setw(16) << "max|u|"
        << std::setw(16) << "sup_W" << std::setw(16) << "Q_interior" << "contact_residual\n";
    std::vector<Certificate> certs;
    for (double h : ctx.levels()) {
        const Mesh mesh = ctx.mesh(h);
        const MetricField metric = ctx.metric(mesh);
        const auto rep = validate(ctx, problem, mesh, metric);
        const Discretization disc(mesh, metric);
        const auto st = continuation_solve(disc, problem, ctx.continuation());
        interior.push_back(interior_certificate(ctx, disc, st.u));
        boundary.push_back(boundary_gradient_certificate(disc, st.u));
        contact.push_back(contact_angle_residual(disc, st.u, 1.0, problem));
        hs.push_back(mesh.max_edge_length());
        heights.push_back(st.u.cwiseAbs().maxCoeff());
        try {
            certs.push_back(check_height(st.u, height_bound(rep, metric, mesh), mesh));
        } catch (const PreconditionError&) {
        }
        out << std::setw(14) << fmt(hs.back()) << std::setw(10) << mesh.vertices.size() << std::setw(16)
            << fmt(heights.back()) << std::setw(16) << fmt(boundary.back().observed) << std::setw(16)
            << (interior.back().applicable ? fmt(interior.back().observed) : std::string("n/a"))
            << fmt(contact.back().observed) << "\n";
    }
    if (std::all_of(interior.begin(), interior.end(), [](const Certificate& c) { return c.applicable; }))
        certs.push_back(stability_certificate("interior-gradient-stability", interior));
    certs.push_back(stability_certificate("boundary-gradient-stability", boundary));
    std::vector<TracePoint> ct;
    for (const auto& c : contact) ct.push_back({c.trace.front().h, std::max(c.observed, 1e-300)});
    certs.push_back(order_certificate("contact-angle-order", ct, 0.8));
    if (hs.size() >= 3) {
        const std::size_t n = hs.size();
        const double d1 = std::fabs(heights[n - 3] - heights[n - 2]);
        const double d2 = std::fabs(heights[n - 2] - heights[n - 1]);
        if (d1 > 0.0 && d2 > 0.0)
            out << "convergence: observed order of max|u| (successive differences) "
                << std::log(d1 / d2) / std::log(hs[n - 2] / hs[n - 1]) << "\n";
    }
    out << "convergence: observed order of contact residual " << observed_order(ct) << "\n";
    save_report(ctx.output(ctx.cfg.output.report).string(), certs);
    return summarize(ctx, "convergence", certs);
}

inline int cmd_oracle1d(const Context& ctx) {
    if (ctx.cfg.domain.shape != "interval") throw ConfigError("oracle1d requires [domain] shape = interval");
    const Mesh mesh = ctx.mesh();
    const MetricField metric = ctx.metric(mesh);
    const CapillaryProblem problem = build_problem(ctx.cfg.problem);
    validate(ctx, problem, mesh, metric);
    const Discretization disc(mesh, metric);
    const auto st = continuation_solve(disc, problem, ctx.continuation());
    const int m = ctx.cfg.verify.oracle_cells;
    if (m < 10 * ctx.cfg.domain.cells) warning(*ctx.err, "oracle_cells is below ten times the finite-element cells");
    Certificate c;
    c.name = "oracle1d";
    try {
        const auto dense = oracle_1d_solve(problem, metric, ctx.cfg.domain.a, ctx.cfg.domain.b, m);
        double diff = 0.0;
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
            diff = std::max(diff, std::fabs(st.u[static_cast<Eigen::Index>(v)] - dense(mesh.vertices[v][0])));
        const double h = mesh.max_edge_length();
        const double hd = (ctx.cfg.domain.b - ctx.cfg.domain.a) / m;
        c.observed = diff;
        c.bound = 5.0 * (h * h + hd * hd);
        c.margin = c.bound - diff;
        c.extras["oracle_newton_iterations"] = dense.newton_iterations;
    } catch (const OracleFailed& e) {
        c.margin = -std::numeric_limits<double>::infinity();
        c.note = std::string("oracle-failed: ") + e.what();
    }
    c.settle();
    save_report(ctx.output(ctx.cfg.output.report).string(), {c});
    return summarize(ctx, "oracle1d", {c});
}

inline int cmd_export(const Context& ctx, const CliOptions& o) {
    const Mesh mesh = ctx.mesh();
    const MetricField metric = ctx.metric(mesh);
    const ScalarField u = load_solution_csv(solution_path(ctx, o), mesh);
    const Discretization disc(mesh, metric);
    const auto cols = solution_columns(disc, u);
    const std::string vtk = ctx.cfg.output.vtk.empty() ? "solution.vtk" : ctx.cfg.output.vtk;
    const std::string mesh_name = ctx.cfg.output.mesh.empty() ? "mesh.txt" : ctx.cfg.output.mesh;
    save_vtk(ctx.output(vtk).string(), mesh, {{"u", cols.u}, {"W", cols.W}, {"d_gamma_boundary", cols.d_gamma}});
    save_mesh(ctx.output(mesh_name).string(), mesh);
    const auto csv = ctx.output(ctx.cfg.output.solution);
    if (!o.solution || std::filesystem::weakly_canonical(*o.solution) != std::filesystem::weakly_canonical(csv))
        save_solution_csv(csv.string(), mesh, cols);
    *ctx.out << "export: wrote " << ctx.output(vtk).string() << ", " << ctx.output(mesh_name).string() << ", "
             << csv.string() << "\n";
    return kExitOk;
}

}  // namespace cli_detail

/// Runs one parsed command; maps exceptions to exit codes.
inline int run_command(const CliOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli_detail;
    try {
        Context ctx;
        ctx.cfg = load_config(o.config);
        if (o.seed) ctx.cfg.seed = *o.seed;
        ctx.threads = resolve_threads(o);
        ctx.out_dir = o.output_dir ? *o.output_dir : ctx.cfg.output.dir;
        ctx.out = &out;
        ctx.err = &err;
        std::filesystem::create_directories(ctx.out_dir);

        if (o.command == "solve") return cmd_solve(ctx);
        if (o.command == "verify") return cmd_verify(ctx, o);
        if (o.command == "mms") return cmd_mms(ctx);
        if (o.command == "convergence") return cmd_convergence(ctx);
        if (o.command == "oracle1d") return cmd_oracle1d(ctx);
        if (o.command == "export") return cmd_export(ctx, o);
        throw ConfigError("unknown command '" + o.command + "'");
    } catch (const ContinuationStalled& e) {
        diagnostic(err, "stalled", e.what());
        return kExitSolverFailure;
    } catch (const SolverError& e) {
        diagnostic(err, "solver", e.what());
        return kExitSolverFailure;
    } catch (const OracleFailed& e) {
        diagnostic(err, "oracle-failed", e.what());
        return kExitSolverFailure;
    } catch (const ResourceError& e) {
        diagnostic(err, "resource", e.what());
        return kExitConfigError;
    } catch (const Error& e) {
        diagnostic(err, "config", e.what());
        return kExitConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        diagnostic(err, "resource", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        diagnostic(err, "internal", e.what());
        return kExitSolverFailure;
    }
}

/**
 * @brief Parses argv (program name first) and runs the command.
 * Usage: capgraph <command> --config FILE [--seed N] [--threads N]
 * [--output-dir DIR] [--solution FILE].
 */
inline int run_command(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    CLI::App app{"capgraph: capillary graphs in warped products"};
    app.require_subcommand(1);
    CliOptions o;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string output_dir, solution;
    for (const char* name : {"solve", "verify", "mms", "convergence", "oracle1d", "export"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", o.config, "configuration file")->required();
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("--threads", threads, "assembly worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--output-dir", output_dir, "directory for output files");
        if (std::string(name) == "verify" || std::string(name) == "export")
            sub->add_option("--solution", solution, "stored solution CSV");
        sub->callback([&o, sub, name]() { o.command = name; (void)sub; });
    }
    std::vector<const char*> args;
    for (const auto& a : argv) args.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(args.size()), args.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        cli_detail::diagnostic(err, "usage", e.what());
        return kExitConfigError;
    }
    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) o.seed = seed;
        if (sub->count("--threads")) o.threads = threads;
        if (sub->count("--output-dir")) o.output_dir = output_dir;
        if (sub->get_option_no_throw("--solution") && sub->count("--solution")) o.solution = solution;
    }
    return run_command(o, out, err);
}

}  // namespace capgraph
