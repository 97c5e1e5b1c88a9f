#pragma once
/**
 * @file config.hpp
 * @brief Strict run configuration: an INI-style text file.
 *
 * Grammar: each non-blank line is a comment ('#' or ';' first), a section
 * header "[name]", or "key = value". Text after '#' is ignored. Keys before
 * the first header belong to the top level (only `seed`). Unknown sections,
 * unknown keys and repeated keys are errors, as are values outside their
 * documented ranges. See README.md for the list of keys.
 */
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "capgraph/error.hpp"
#include "capgraph/expression.hpp"
#include "capgraph/io.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"
#include "capgraph/problem.hpp"
#include "capgraph/solver.hpp"

namespace capgraph {

struct MetricConfig {
    std::string preset = "euclidean";  // euclidean | product | radial_warp | custom
    std::string s11 = "1", s12 = "0", s22 = "1";
    std::string conformal = "1";
    std::string gamma = "1";
};

struct DomainConfig {
    std::string shape = "disk";  // disk | annulus | interval | mesh_file
    double radius = 1.0;
    double inner_radius = 0.5;
    double a = 0.0, b = 1.0;
    double h = 0.1;
    int cells = 64;
    std::string file;

    int dim() const;
};

struct ProblemConfig {
    std::string psi = "s";
    std::string phi = "0";
    std::optional<std::string> dpsi_ds, dphi_ds;
    DeclaredConstants declared;
    bool unsafe = false;
    double s_min = -10.0, s_max = 10.0;
};

struct SolverConfig {
    double tol = 1e-10;
    int max_newton = 50;
    int max_halvings = 30;
    double dtau = 0.1, dtau_min = 1e-4, dtau_max = 0.25;
};

struct OutputConfig {
    std::string dir = ".";
    std::string solution = "solution.csv";
    std::string report = "report.jsonl";
    std::string vtk;   // empty: no VTK file
    std::string mesh;  // empty: no mesh file
};

struct MmsConfig {
    std::string u_exact = "0";
    double kappa0 = 1.0;
};

struct VerifyConfig {
    std::vector<double> levels;  // mesh sizes for refinement studies; empty: h, h/2, h/4
    double interior_radius = 0.5;
    double center_x1 = 0.0, center_x2 = 0.0;
    int uniqueness_trials = 5;
    std::vector<double> lemma_taus{1e-2, 5e-3, 2.5e-3};
    int oracle_cells = 4096;
};

struct RunConfig {
    std::uint64_t seed = 0;
    MetricConfig metric;
    DomainConfig domain;
    ProblemConfig problem;
    SolverConfig solver;
    OutputConfig output;
    MmsConfig mms;
    VerifyConfig verify;
};

inline int DomainConfig::dim() const {
    if (shape == "interval") return 1;
    if (shape == "mesh_file") return -1;
    return 2;
}

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class Reader {
public:
    Reader(std::string section, std::string key, std::string value, int line)
        : where_("[" + section + "] " + key + " (line " + std::to_string(line) + ")"), value_(std::move(value)) {}

    double number() const {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value_, &used);
        } catch (const std::exception&) {
            fail("expected a number");
        }
        if (used != value_.size() || !std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    int integer() const {
        const double v = number();
        if (v != std::floor(v) || std::fabs(v) > 2e9) fail("expected an integer");
        return static_cast<int>(v);
    }
    bool boolean() const {
        if (value_ == "true") return true;
        if (value_ == "false") return false;
        fail("expected true or false");
    }
    std::string text() const {
        if (value_.empty()) fail("value is empty");
        return value_;
    }
    std::string expression() const {
        try {
            (void)Expression::parse(value_);
        } catch (const ParseError& e) {
            fail(e.what());
        }
        return value_;
    }
    std::string choice(std::initializer_list<const char*> options) const {
        for (const char* o : options)
            if (value_ == o) return value_;
        std::string list;
        for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
        fail("expected one of " + list);
    }
    std::vector<double> numbers() const {
        std::vector<double> out;
        std::stringstream ss(value_);
        for (std::string t; std::getline(ss, t, ',');) {
            Reader r("", "", trim(t), 0);
            try {
                out.push_back(r.number());
            } catch (const ConfigError&) {
                fail("expected a comma-separated list of numbers");
            }
        }
        if (out.empty()) fail("list is empty");
        return out;
    }
    [[noreturn]] void fail(const std::string& why) const { throw ConfigError(where_ + ": " + why); }

private:
    std::string where_;
    std::string value_;
};

}  // namespace config_detail

/**
 * @brief Parses and range-checks a configuration. Throws ConfigError naming
 * the offending key or line.
 */
inline RunConfig parse_config(std::istream& in) {
    using config_detail::Reader;
    RunConfig cfg;
    std::string section;
    std::set<std::string> seen;
    const std::set<std::string> sections{"metric", "domain", "problem", "solver", "output", "mms", "verify"};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string text = config_detail::trim(raw);
        if (text.empty() || text[0] == ';') continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header");
            section = config_detail::trim(text.substr(1, text.size() - 2));
            if (!sections.count(section))
                throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
        const std::string key = config_detail::trim(text.substr(0, eq));
        const std::string value = config_detail::trim(text.substr(eq + 1));
        if (!seen.insert(section + "." + key).second)
            throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' repeated");
        const Reader r(section.empty() ? "top" : section, key, value, line);
        auto unknown = [&]() {
            throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'" +
                              (section.empty() ? "" : " in [" + section + "]"));
        };

        if (section.empty()) {
            if (key != "seed") unknown();
            const double v = r.number();
            if (v < 0 || v != std::floor(v) || v > 9.007199254740992e15) r.fail("expected a non-negative integer");
            cfg.seed = static_cast<std::uint64_t>(v);
        } else if (section == "metric") {
            auto& m = cfg.metric;
            if (key == "preset") m.preset = r.choice({"euclidean", "product", "radial_warp", "custom"});
            else if (key == "s11") m.s11 = r.expression();
            else if (key == "s12") m.s12 = r.expression();
            else if (key == "s22") m.s22 = r.expression();
            else if (key == "conformal") m.conformal = r.expression();
            else if (key == "gamma") m.gamma = r.expression();
            else unknown();
        } else if (section == "domain") {
            auto& d = cfg.domain;
            if (key == "shape") d.shape = r.choice({"disk", "annulus", "interval", "mesh_file"});
            else if (key == "radius") d.radius = r.number();
            else if (key == "inner_radius") d.inner_radius = r.number();
            else if (key == "a") d.a = r.number();
            else if (key == "b") d.b = r.number();
            else if (key == "h") d.h = r.number();
            else if (key == "cells") d.cells = r.integer();
            else if (key == "file") d.file = r.text();
            else unknown();
        } else if (section == "problem") {
            auto& p = cfg.problem;
            if (key == "psi") p.psi = r.expression();
            else if (key == "phi") p.phi = r.expression();
            else if (key == "dpsi_ds") p.dpsi_ds = r.expression();
            else if (key == "dphi_ds") p.dphi_ds = r.expression();
            else if (key == "beta") p.declared.beta = r.number();
            else if (key == "mu") p.declared.mu = r.number();
            else if (key == "beta_prime") p.declared.beta_prime = r.number();
            else if (key == "c_psi") p.declared.c_psi = r.number();
            else if (key == "c_phi") p.declared.c_phi = r.number();
            else if (key == "unsafe") p.unsafe = r.boolean();
            else if (key == "s_min") p.s_min = r.number();
            else if (key == "s_max") p.s_max = r.number();
            else unknown();
        } else if (section == "solver") {
            auto& s = cfg.solver;
            if (key == "tol") s.tol = r.number();
            else if (key == "max_newton") s.max_newton = r.integer();
            else if (key == "max_halvings") s.max_halvings = r.integer();
            else if (key == "dtau") s.dtau = r.number();
            else if (key == "dtau_min") s.dtau_min = r.number();
            else if (key == "dtau_max") s.dtau_max = r.number();
            else unknown();
        } else if (section == "output") {
            auto& o = cfg.output;
            if (key == "dir") o.dir = r.text();
            else if (key == "solution") o.solution = r.text();
            else if (key == "report") o.report = r.text();
            else if (key == "vtk") o.vtk = r.text();
            else if (key == "mesh") o.mesh = r.text();
            else unknown();
        } else if (section == "mms") {
            if (key == "u_exact") cfg.mms.u_exact = r.expression();
            else if (key == "kappa0") cfg.mms.kappa0 = r.number();
            else unknown();
        } else if (section == "verify") {
            auto& v = cfg.verify;
            if (key == "levels") v.levels = r.numbers();
            else if (key == "interior_radius") v.interior_radius = r.number();
            else if (key == "center") {
                const auto c = r.numbers();
                if (c.size() > 2) r.fail("expected one or two coordinates");
                v.center_x1 = c[0];
                v.center_x2 = c.size() > 1 ? c[1] : 0.0;
            } else if (key == "uniqueness_trials") v.uniqueness_trials = r.integer();
            else if (key == "lemma_taus") v.lemma_taus = r.numbers();
            else if (key == "oracle_cells") v.oracle_cells = r.integer();
            else unknown();
        }
    }

    auto range = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    const auto& d = cfg.domain;
    range(d.radius > 0.0, "[domain] radius must be positive");
    range(d.inner_radius > 0.0 && d.inner_radius < d.radius, "[domain] inner_radius must lie in (0, radius)");
    range(d.a < d.b, "[domain] a must be less than b");
    range(d.h > 0.0 && d.h <= d.radius, "[domain] h must lie in (0, radius]");
    range(d.cells >= 2, "[domain] cells must be at least 2");
    range(d.shape != "mesh_file" || !d.file.empty(), "[domain] file is required for shape = mesh_file");
    const auto& s = cfg.solver;
    range(s.tol > 0.0 && s.tol < 1.0, "[solver] tol must lie in (0, 1)");
    range(s.max_newton >= 1, "[solver] max_newton must be at least 1");
    range(s.max_halvings >= 0 && s.max_halvings <= 60, "[solver] max_halvings must lie in [0, 60]");
    range(s.dtau > 0.0 && s.dtau <= 1.0, "[solver] dtau must lie in (0, 1]");
    range(s.dtau_min > 0.0 && s.dtau_min <= s.dtau, "[solver] dtau_min must lie in (0, dtau]");
    range(s.dtau_max >= s.dtau && s.dtau_max <= 1.0, "[solver] dtau_max must lie in [dtau, 1]");
    range(cfg.problem.s_min < cfg.problem.s_max, "[problem] s_min must be less than s_max");
    range(cfg.mms.kappa0 > 0.0, "[mms] kappa0 must be positive");
    const auto& v = cfg.verify;
    for (double h : v.levels) range(h > 0.0, "[verify] levels must be positive");
    range(v.interior_radius > 0.0, "[verify] interior_radius must be positive");
    range(v.uniqueness_trials >= 1 && v.uniqueness_trials <= 100, "[verify] uniqueness_trials must lie in [1, 100]");
    for (double t : v.lemma_taus) range(t > 0.0 && t < 1.0, "[verify] lemma_taus must lie in (0, 1)");
    range(v.oracle_cells >= 2, "[verify] oracle_cells must be at least 2");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

/// Mesh of the configured domain; @p h overrides the configured size.
inline Mesh build_mesh(const DomainConfig& d, std::optional<double> h = std::nullopt) {
    const double size = h.value_or(d.h);
    if (d.shape == "disk") return generate_disk_mesh(d.radius, size);
    if (d.shape == "annulus") return generate_annulus_mesh(d.inner_radius, d.radius, size);
    if (d.shape == "interval") {
        const int cells = h ? std::max(2, static_cast<int>(std::lround((d.b - d.a) / *h))) : d.cells;
        return generate_interval_mesh(d.a, d.b, cells);
    }
    if (h) throw ConfigError("[domain] mesh_file domains cannot be refined");
    return load_mesh(d.file);
}

/// Nominal mesh size of the configured domain.
inline double nominal_h(const DomainConfig& d) { return d.shape == "interval" ? (d.b - d.a) / d.cells : d.h; }

inline MetricField build_metric(const MetricConfig& m, int dim) {
    const auto e = [](const std::string& t) { return Expression::parse(t); };
    if (m.preset == "euclidean") return MetricField::euclidean(dim);
    if (m.preset == "product") return MetricField::product(dim, e(m.s11), e(m.s12), e(m.s22));
    if (m.preset == "radial_warp") return MetricField::radial_warp(dim, e(m.conformal), e(m.gamma));
    return MetricField::custom(dim, e(m.s11), e(m.s12), e(m.s22), e(m.gamma));
}

inline CapillaryProblem build_problem(const ProblemConfig& p) {
    std::optional<Expression> dpsi, dphi;
    if (p.dpsi_ds) dpsi = Expression::parse(*p.dpsi_ds);
    if (p.dphi_ds) dphi = Expression::parse(*p.dphi_ds);
    auto prob = CapillaryProblem::from_expressions(Expression::parse(p.psi), Expression::parse(p.phi), dpsi, dphi);
    prob.declared = p.declared;
    return prob;
}

inline ContinuationConfig continuation_config(const SolverConfig& s, int threads) {
    ContinuationConfig c;
    c.dtau = s.dtau;
    c.dtau_min = s.dtau_min;
    c.dtau_max = s.dtau_max;
    c.newton.tol = s.tol;
    c.newton.max_iter = s.max_newton;
    c.newton.max_halvings = s.max_halvings;
    c.newton.assembly.threads = threads;
    return c;
}

}  // namespace capgraph
