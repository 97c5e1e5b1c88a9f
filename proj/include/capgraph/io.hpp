#pragma once
/**
 * @file io.hpp
 * @brief Plain-text mesh files, solution CSV files, legacy VTK export and
 * the line-oriented certificate report.
 *
 * Mesh file layout (indices 0-based, one record per line, '#' comments):
 * @code
 * DIM 2
 * VERTICES <n>
 * <x1> <x2>
 * CELLS <m>
 * <v0> <v1> <v2>
 * BOUNDARY <b>
 * <v0> <v1> <tag>
 * @endcode
 * In one dimension vertices carry one coordinate, cells two indices and
 * boundary records one index plus a tag.
 */
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "capgraph/error.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/verify.hpp"

namespace capgraph {

namespace io_detail {

/// Shortest decimal text that reads back to the same double.
inline std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw InvalidInput("cannot read " + what + " from '" + text + "'");
    }
    if (used != text.size()) throw InvalidInput("trailing characters in " + what + " '" + text + "'");
    return v;
}

/// Next line that is neither blank nor a comment, split into tokens.
inline bool next_record(std::istream& in, std::vector<std::string>& tokens, int& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        tokens.clear();
        for (std::string t; ss >> t;) tokens.push_back(t);
        if (!tokens.empty()) return true;
    }
    return false;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ResourceError("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ResourceError("cannot open '" + path + "' for reading");
    return in;
}

}  // namespace io_detail

inline void write_mesh(std::ostream& out, const Mesh& mesh) {
    using io_detail::exact;
    out << "DIM " << mesh.dim << "\n";
    out << "VERTICES " << mesh.vertices.size() << "\n";
    for (const auto& v : mesh.vertices) {
        out << exact(v[0]);
        if (mesh.dim == 2) out << ' ' << exact(v[1]);
        out << "\n";
    }
    out << "CELLS " << mesh.cells.size() << "\n";
    for (const auto& c : mesh.cells) {
        for (int i = 0; i < mesh.vertices_per_cell(); ++i) out << (i ? " " : "") << c[i];
        out << "\n";
    }
    out << "BOUNDARY " << mesh.boundary.size() << "\n";
    for (const auto& f : mesh.boundary) {
        for (int i = 0; i < f.vertex_count; ++i) out << f.v[i] << ' ';
        out << f.tag << "\n";
    }
}

/**
 * @brief Reads a mesh file. Boundary facets and their normals are rebuilt
 * from the cells; the BOUNDARY section supplies the tags and must list
 * exactly the boundary facets. Throws InvalidInput on malformed input.
 */
inline Mesh read_mesh(std::istream& in) {
    using io_detail::parse_double;
    std::vector<std::string> tok;
    int line = 0;
    auto expect_header = [&](const std::string& key) -> std::size_t {
        if (!io_detail::next_record(in, tok, line) || tok.size() != 2 || tok[0] != key)
            throw InvalidInput("mesh file line " + std::to_string(line) + ": expected '" + key + " <count>'");
        const double n = parse_double(tok[1], key + " count");
        if (n < 0 || n != static_cast<double>(static_cast<std::size_t>(n)))
            throw InvalidInput("mesh file line " + std::to_string(line) + ": bad count");
        return static_cast<std::size_t>(n);
    };
    auto index = [&](const std::string& t) {
        const double v = parse_double(t, "index");
        if (v < 0 || v != static_cast<double>(static_cast<int>(v)))
            throw InvalidInput("mesh file line " + std::to_string(line) + ": bad index '" + t + "'");
        return static_cast<int>(v);
    };

    Mesh mesh;
    mesh.dim = static_cast<int>(expect_header("DIM"));
    if (mesh.dim != 1 && mesh.dim != 2) throw InvalidInput("mesh dimension must be 1 or 2");
    const std::size_t nv = expect_header("VERTICES");
    if (nv > kMaxVertices) throw ResourceError("mesh file exceeds the vertex budget");
    for (std::size_t i = 0; i < nv; ++i) {
        if (!io_detail::next_record(in, tok, line) || tok.size() != static_cast<std::size_t>(mesh.dim))
            throw InvalidInput("mesh file line " + std::to_string(line) + ": bad vertex record");
        mesh.vertices.push_back({parse_double(tok[0], "x1"), mesh.dim == 2 ? parse_double(tok[1], "x2") : 0.0});
    }
    const std::size_t nc = expect_header("CELLS");
    for (std::size_t i = 0; i < nc; ++i) {
        if (!io_detail::next_record(in, tok, line) || tok.size() != static_cast<std::size_t>(mesh.dim + 1))
            throw InvalidInput("mesh file line " + std::to_string(line) + ": bad cell record");
        std::array<int, 3> c{-1, -1, -1};
        for (int k = 0; k <= mesh.dim; ++k) c[k] = index(tok[k]);
        mesh.cells.push_back(c);
    }
    const std::size_t nb = expect_header("BOUNDARY");
    std::map<std::pair<int, int>, int> tags;
    for (std::size_t i = 0; i < nb; ++i) {
        if (!io_detail::next_record(in, tok, line) || tok.size() != static_cast<std::size_t>(mesh.dim + 1))
            throw InvalidInput("mesh file line " + std::to_string(line) + ": bad boundary record");
        int a = index(tok[0]);
        int b = mesh.dim == 2 ? index(tok[1]) : -1;
        if (b >= 0 && b < a) std::swap(a, b);
        tags[{a, b}] = index(tok[mesh.dim]);
    }
    if (io_detail::next_record(in, tok, line))
        throw InvalidInput("mesh file line " + std::to_string(line) + ": unexpected trailing record");

    for (const auto& c : mesh.cells)
        for (int k = 0; k <= mesh.dim; ++k)
            if (static_cast<std::size_t>(c[k]) >= nv) throw InvalidInput("cell references a missing vertex");
    build_boundary(mesh);
    if (mesh.boundary.size() != tags.size())
        throw InvalidInput("BOUNDARY section does not list exactly the mesh boundary facets");
    for (auto& f : mesh.boundary) {
        int a = f.v[0], b = f.v[1];
        if (b >= 0 && b < a) std::swap(a, b);
        const auto it = tags.find({a, b});
        if (it == tags.end()) throw InvalidInput("BOUNDARY section misses a boundary facet");
        f.tag = it->second;
    }
    check_mesh(mesh);
    return mesh;
}

inline void save_mesh(const std::string& path, const Mesh& mesh) {
    auto out = io_detail::open_out(path);
    write_mesh(out, mesh);
}

inline Mesh load_mesh(const std::string& path) {
    auto in = io_detail::open_in(path);
    return read_mesh(in);
}

/// Per-vertex columns of the solution file besides the coordinates.
struct SolutionColumns {
    ScalarField u;
    ScalarField W;
    ScalarField d_gamma;
};

/// u, vertex slope factors (area-averaged gradients) and boundary distance.
inline SolutionColumns solution_columns(const Discretization& disc, const ScalarField& u) {
    const Mesh& mesh = disc.mesh();
    const MetricField& metric = disc.metric();
    SolutionColumns cols;
    cols.u = u;
    cols.W.resize(u.size());
    const auto grads = vertex_gradients(disc, u);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        cols.W[static_cast<Eigen::Index>(v)] = slope_factor(metric, mesh.vertices[v], grads[v]);
    cols.d_gamma = boundary_distance_field(mesh, metric);
    return cols;
}

/// Solution CSV: header vertex_id,x1[,x2],u,W,d_gamma_boundary.
inline void write_solution_csv(std::ostream& out, const Mesh& mesh, const SolutionColumns& cols) {
    using io_detail::exact;
    out << (mesh.dim == 2 ? "vertex_id,x1,x2,u,W,d_gamma_boundary\n" : "vertex_id,x1,u,W,d_gamma_boundary\n");
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const auto i = static_cast<Eigen::Index>(v);
        out << v << ',' << exact(mesh.vertices[v][0]) << ',';
        if (mesh.dim == 2) out << exact(mesh.vertices[v][1]) << ',';
        out << exact(cols.u[i]) << ',' << exact(cols.W[i]) << ',' << exact(cols.d_gamma[i]) << "\n";
    }
}

/**
 * @brief Reads the u column of a solution CSV written for @p mesh. Vertex
 * ids and coordinates must match the mesh exactly.
 */
inline ScalarField read_solution_csv(std::istream& in, const Mesh& mesh) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("solution file is empty");
    const std::string want =
        mesh.dim == 2 ? "vertex_id,x1,x2,u,W,d_gamma_boundary" : "vertex_id,x1,u,W,d_gamma_boundary";
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != want) throw InvalidInput("solution header must be '" + want + "'");
    const std::size_t fields = mesh.dim == 2 ? 6 : 5;
    ScalarField u(static_cast<Eigen::Index>(mesh.vertices.size()));
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string t; std::getline(ss, t, ',');) f.push_back(t);
        if (f.size() != fields) throw InvalidInput("solution row " + std::to_string(row) + " has the wrong width");
        if (row >= mesh.vertices.size()) throw InvalidInput("solution file has more rows than mesh vertices");
        if (io_detail::parse_double(f[0], "vertex_id") != static_cast<double>(row))
            throw InvalidInput("solution rows must be ordered by vertex_id");
        for (int k = 0; k < mesh.dim; ++k)
            if (io_detail::parse_double(f[1 + k], "coordinate") != mesh.vertices[row][k])
                throw InvalidInput("solution row " + std::to_string(row) + " does not match the mesh vertex");
        u[static_cast<Eigen::Index>(row)] = io_detail::parse_double(f[1 + mesh.dim], "u");
        ++row;
    }
    if (row != mesh.vertices.size()) throw InvalidInput("solution file has fewer rows than mesh vertices");
    return u;
}

inline void save_solution_csv(const std::string& path, const Mesh& mesh, const SolutionColumns& cols) {
    auto out = io_detail::open_out(path);
    write_solution_csv(out, mesh, cols);
}

inline ScalarField load_solution_csv(const std::string& path, const Mesh& mesh) {
    auto in = io_detail::open_in(path);
    return read_solution_csv(in, mesh);
}

/// Legacy VTK ASCII unstructured grid with named point-data fields.
inline void write_vtk(std::ostream& out, const Mesh& mesh, const std::vector<std::pair<std::string, ScalarField>>& fields) {
    using io_detail::exact;
    out << "# vtk DataFile Version 3.0\ncapgraph\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.vertices.size() << " double\n";
    for (const auto& v : mesh.vertices) out << exact(v[0]) << ' ' << exact(v[1]) << " 0\n";
    const int per = mesh.vertices_per_cell();
    out << "CELLS " << mesh.cells.size() << ' ' << mesh.cells.size() * (per + 1) << "\n";
    for (const auto& c : mesh.cells) {
        out << per;
        for (int i = 0; i < per; ++i) out << ' ' << c[i];
        out << "\n";
    }
    out << "CELL_TYPES " << mesh.cells.size() << "\n";
    for (std::size_t k = 0; k < mesh.cells.size(); ++k) out << (mesh.dim == 2 ? 5 : 3) << "\n";
    if (fields.empty()) return;
    out << "POINT_DATA " << mesh.vertices.size() << "\n";
    for (const auto& [name, f] : fields) {
        if (static_cast<std::size_t>(f.size()) != mesh.vertices.size())
            throw InvalidInput("VTK field '" + name + "' has the wrong length");
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (Eigen::Index i = 0; i < f.size(); ++i) out << exact(f[i]) << "\n";
    }
}

inline void save_vtk(const std::string& path, const Mesh& mesh,
                     const std::vector<std::pair<std::string, ScalarField>>& fields) {
    auto out = io_detail::open_out(path);
    write_vtk(out, mesh, fields);
}

/// One JSON object describing a certificate, fields in a fixed order.
inline nlohmann::ordered_json certificate_json(const Certificate& c) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["bound"] = c.bound;
    j["observed"] = c.observed;
    j["margin"] = c.margin;
    j["tolerance"] = c.tolerance;
    j["pass"] = c.pass;
    j["applicable"] = c.applicable;
    j["provisional"] = c.provisional();
    auto trace = nlohmann::ordered_json::array();
    for (const auto& t : c.trace) trace.push_back({t.h, t.value});
    j["trace"] = trace;
    auto extras = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.extras) extras[k] = v;
    j["extras"] = extras;
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

/// Report file: one JSON object per line, one line per certificate.
inline void write_report(std::ostream& out, const std::vector<Certificate>& certs) {
    for (const auto& c : certs) out << certificate_json(c).dump() << "\n";
}

inline void save_report(const std::string& path, const std::vector<Certificate>& certs) {
    auto out = io_detail::open_out(path);
    write_report(out, certs);
}

}  // namespace capgraph
