#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "capgraph/cli.hpp"
#include "test_support.hpp"

using namespace capgraph;
using capgraph::testing::smooth_field;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("capgraph_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_file(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
    return path.string();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    std::vector<std::string> argv{"capgraph"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::ostringstream out, err;
    const int code = run_command(argv, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

const char* kDisk = R"(seed = 3
[domain]
shape = disk
h = 0.2
[problem]
psi = 1 + s
phi = 0.3
[output]
vtk = solution.vtk
[verify]
uniqueness_trials = 2
)";

}  // namespace

TEST(MeshFile, RoundTrip) {
    for (const Mesh& m : {generate_disk_mesh(1.0, 0.3), generate_annulus_mesh(0.4, 1.0, 0.2), generate_interval_mesh(-1, 2, 7)}) {
        std::stringstream s;
        write_mesh(s, m);
        const Mesh r = read_mesh(s);
        ASSERT_EQ(r.vertices.size(), m.vertices.size());
        for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(r.vertices[i], m.vertices[i]);
        EXPECT_EQ(r.cells, m.cells);
        ASSERT_EQ(r.boundary.size(), m.boundary.size());
        for (std::size_t i = 0; i < m.boundary.size(); ++i) EXPECT_EQ(r.boundary[i].tag, m.boundary[i].tag);
    }
}

TEST(MeshFile, MalformedInputIsRejected) {
    std::istringstream bad("DIM 2\nVERTICES 3\n0 0\n1 0\n");
    EXPECT_THROW(read_mesh(bad), InvalidInput);
}

TEST(SolutionFile, RoundTripIsBitExact) {
    const Mesh mesh = generate_disk_mesh(1.0, 0.2);
    const auto metric = MetricField::euclidean(2);
    const Discretization disc(mesh, metric);
    const ScalarField u = smooth_field(mesh, 8) * (1.0 / 3.0);
    std::stringstream s;
    write_solution_csv(s, mesh, solution_columns(disc, u));
    const std::string first = s.str();
    EXPECT_EQ(first.substr(0, first.find('\n')), "vertex_id,x1,x2,u,W,d_gamma_boundary");
    const ScalarField back = read_solution_csv(s, mesh);
    EXPECT_EQ(back, u);
    std::stringstream again;
    write_solution_csv(again, mesh, solution_columns(disc, back));
    EXPECT_EQ(again.str(), first);
}

TEST(SolutionFile, ForeignMeshIsRejected) {
    const Mesh mesh = generate_disk_mesh(1.0, 0.2);
    const auto metric = MetricField::euclidean(2);
    const Discretization disc(mesh, metric);
    std::stringstream s;
    write_solution_csv(s, mesh, solution_columns(disc, smooth_field(mesh, 1)));
    EXPECT_THROW(read_solution_csv(s, generate_disk_mesh(1.0, 0.3)), InvalidInput);
}

TEST(Report, OneJsonObjectPerCertificate) {
    Certificate a;
    a.name = "height";
    a.bound = 1;
    a.observed = 0.5;
    a.margin = 0.5;
    Certificate b = a;
    b.name = "other";
    std::stringstream s;
    write_report(s, {a, b});
    std::string line;
    int lines = 0;
    while (std::getline(s, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("name"));
        EXPECT_TRUE(j.contains("pass"));
        ++lines;
    }
    EXPECT_EQ(lines, 2);
}

TEST(Config, ParsesSectionsAndDefaults) {
    const auto cfg = parse(kDisk);
    EXPECT_EQ(cfg.seed, 3u);
    EXPECT_EQ(cfg.domain.shape, "disk");
    EXPECT_DOUBLE_EQ(cfg.domain.h, 0.2);
    EXPECT_EQ(cfg.problem.psi, "1 + s");
    EXPECT_EQ(cfg.verify.uniqueness_trials, 2);
    EXPECT_DOUBLE_EQ(cfg.solver.dtau, 0.1);
}

TEST(Config, UnknownKeysAreNamed) {
    try {
        parse("[solver]\ndtua = 0.1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("dtua"), std::string::npos);
    }
    EXPECT_THROW(parse("[solvers]\ndtau = 0.1\n"), ConfigError);
    EXPECT_THROW(parse("[solver]\ndtau = 0.1\ndtau = 0.2\n"), ConfigError);
    EXPECT_THROW(parse("[solver]\ndtau = fast\n"), ConfigError);
}

TEST(Config, RangesAreEnforced) {
    EXPECT_THROW(parse("[solver]\ndtau = 2\n"), ConfigError);
    EXPECT_THROW(parse("[domain]\nh = -1\n"), ConfigError);
    EXPECT_THROW(parse("[metric]\npreset = hyperbolic\n"), ConfigError);
}

TEST(Cli, BadStepSizeExitsWithConfigError) {
    const auto dir = scratch("bad_dtau");
    const auto cfg = write_file(dir / "c.ini", "[solver]\ndtau = 2\n");
    std::string err;
    EXPECT_EQ(run({"solve", "--config", cfg, "--output-dir", (dir / "out").string()}, nullptr, &err), kExitConfigError);
    EXPECT_NE(err.find("\"kind\":\"config\""), std::string::npos);
    EXPECT_NE(err.find("dtau"), std::string::npos);
}

TEST(Cli, UsageErrorsExitWithConfigError) {
    EXPECT_EQ(run({"solve"}), kExitConfigError);
    EXPECT_EQ(run({"fly", "--config", "x.ini"}), kExitConfigError);
    EXPECT_EQ(run({"solve", "--config", "/nonexistent/c.ini"}), kExitConfigError);
}

TEST(Cli, SolveWithLinearGravityIsFlat) {
    const auto dir = scratch("forced_zero");
    const auto cfg = write_file(dir / "c.ini", "[domain]\nh = 0.2\n[problem]\npsi = s\nphi = 0\n");
    ASSERT_EQ(run({"solve", "--config", cfg, "--output-dir", dir.string()}), kExitOk);
    const Mesh mesh = generate_disk_mesh(1.0, 0.2);
    const ScalarField u = load_solution_csv((dir / "solution.csv").string(), mesh);
    EXPECT_LT(u.lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Cli, SolveThenVerifyAndExport) {
    const auto dir = scratch("disk");
    const auto cfg = write_file(dir / "c.ini", kDisk);
    std::string out;
    ASSERT_EQ(run({"solve", "--config", cfg, "--output-dir", dir.string()}, &out), kExitOk);
    EXPECT_TRUE(fs::exists(dir / "solution.csv"));
    EXPECT_TRUE(fs::exists(dir / "report.jsonl"));
    EXPECT_TRUE(fs::exists(dir / "solution.vtk"));
    ASSERT_EQ(run({"verify", "--config", cfg, "--output-dir", dir.string()}, &out), kExitOk);
    EXPECT_EQ(out.find("FAIL"), std::string::npos) << out;
    const auto exported = dir / "exported";
    ASSERT_EQ(run({"export", "--config", cfg, "--output-dir", exported.string(), "--solution",
                   (dir / "solution.csv").string()}),
              kExitOk);
    EXPECT_TRUE(fs::exists(exported / "solution.vtk"));
}

TEST(Cli, RunsAreByteIdentical) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto cfg = write_file(a / "c.ini", kDisk);
    ASSERT_EQ(run({"solve", "--config", cfg, "--output-dir", a.string(), "--threads", "1"}), kExitOk);
    ASSERT_EQ(run({"solve", "--config", cfg, "--output-dir", b.string(), "--threads", "3"}), kExitOk);
    EXPECT_EQ(slurp(a / "solution.csv"), slurp(b / "solution.csv"));
    EXPECT_EQ(slurp(a / "report.jsonl"), slurp(b / "report.jsonl"));
}

TEST(Cli, ManufacturedCapConverges) {
    const auto dir = scratch("mms");
    const auto cfg = write_file(dir / "c.ini",
                                "[domain]\nh = 0.2\n[mms]\nu_exact = sqrt(4 - r^2)\n[verify]\nlevels = 0.2, 0.1, 0.05\n");
    std::string out;
    EXPECT_EQ(run({"mms", "--config", cfg, "--output-dir", dir.string()}, &out), kExitOk);
    EXPECT_EQ(out.find("FAIL"), std::string::npos) << out;
}
