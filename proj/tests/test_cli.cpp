#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "fixtures.hpp"
#include "knitply/image.hpp"
#include "knitply/shading.hpp"
#include "oracles.hpp"

using namespace knitply;
using namespace knitply::test;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result knitply_run(std::vector<std::string> args) {
  args.insert(args.begin(), "knitply");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("knitply_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string swatch_config() { return data_path("scenes/swatch.ini").string(); }

// Stages up to and including the mapping grid for the shipped swatch.
void build_swatch(const fs::path& dir) {
  for (const char* stage : {"tile", "plies", "grid"}) {
    const Result r = knitply_run({"-c", swatch_config(), "--out-dir", dir.string(), stage});
    ASSERT_EQ(r.code, 0) << stage << ": " << r.err;
  }
}

std::vector<std::string> small_render(const fs::path& dir) {
  return {"-c", swatch_config(), "--out-dir", dir.string(), "--set", "camera.width=16", "--set", "camera.height=16"};
}

}  // namespace

TEST(Config, ParsesSectionsCommentsAndDefaults) {
  const auto cfg = cli::Config::parse(
      "# comment\n[a]\nx = 1.5\n; another\nv = 1, 2 3\nname = wool\non = yes\n[light.2]\ncorner = 0 0 1\n", "/base");
  EXPECT_EQ(cfg.number("a", "x", 0), 1.5);
  EXPECT_EQ(cfg.number("a", "missing", 7), 7);
  EXPECT_EQ(cfg.vec3("a", "v", {}), (Vec3{1, 2, 3}));
  EXPECT_EQ(cfg.text("a", "name", ""), "wool");
  EXPECT_TRUE(cfg.flag("a", "on", false));
  EXPECT_EQ(cfg.integer("b", "n", 3), 3);
  EXPECT_EQ(cfg.path("a", "name", {}), fs::path("/base/wool"));
  EXPECT_EQ(cfg.vec3("light.2", "corner", {}), (Vec3{0, 0, 1}));
  EXPECT_EQ(cfg.sections(), (std::vector<std::string>{"a", "light.2"}));
  EXPECT_THROW(cfg.number("a", "name", 0), ParseError);
  EXPECT_THROW(cfg.integer("a", "x", 0), ParseError);
  EXPECT_THROW(cfg.flag("a", "name", false), ParseError);
  EXPECT_THROW(cfg.required("a", "nothing"), InvariantError);
  EXPECT_THROW(cli::Config::parse("[a\nx=1\n"), ParseError);
}

TEST(Config, EchoReloadsToTheSameValues) {
  const auto cfg = cli::Config::parse("[render]\nspp = 8\n");
  cfg.integer("render", "spp", 16);
  cfg.integer("render", "max_depth", 64);
  cfg.vec3("camera", "up", {0, 0, 1});
  const auto again = cli::Config::parse(cfg.echo());
  EXPECT_EQ(again.integer("render", "spp", 0), 8);
  EXPECT_EQ(again.integer("render", "max_depth", 0), 64);
  EXPECT_EQ(again.vec3("camera", "up", {}), (Vec3{0, 0, 1}));
}

TEST(Cli, TileStraightCellThreeTimes) {
  const fs::path d = scratch_dir("tile");
  const Result r = knitply_run({"tile", data_path("patterns/straight.kcf").string(), "-n", "3", "-m", "1", "-o",
                                (d / "y.yrn").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto yarns = read_yarns(d / "y.yrn");
  ASSERT_EQ(yarns.size(), 1u);
  EXPECT_EQ(yarns[0].vertices.size(), 4u);
  EXPECT_TRUE(fs::exists(d / "tile.effective.ini"));
}

TEST(Cli, TileStockinetteMatchesUnionFind) {
  const fs::path d = scratch_dir("stockinette");
  const Result r = knitply_run({"tile", data_path("patterns/stockinette.kcf").string(), "-n", "4", "-m", "4", "-o",
                                (d / "y.yrn").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto yarns = read_yarns(d / "y.yrn");

  const auto cell = load_pattern(data_path("patterns/stockinette.kcf"));
  const auto expected = union_find_components(cell, 16 * static_cast<std::uint32_t>(cell.curves.size()),
                                              brute_force_edges(cell, 4, 4, false, false));
  ASSERT_EQ(yarns.size(), expected.size());
  std::multiset<std::pair<std::size_t, bool>> want, got;
  for (const auto& c : expected) want.insert({c.vertex_count, c.cyclic});
  for (const auto& y : yarns) got.insert({y.vertices.size(), y.closed});
  EXPECT_EQ(got, want);
}

TEST(Cli, MissingFileExitsTwoNamingThePath) {
  const Result r = knitply_run({"tile", "/nonexistent/cell.kcf", "-n", "2", "-m", "2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/cell.kcf"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("pattern"), std::string::npos) << r.err;
}

TEST(Cli, CorruptPlyFileReportsBadMagic) {
  const fs::path d = scratch_dir("corrupt");
  build_swatch(d);
  {
    std::ofstream f(d / "plies.plb", std::ios::binary);
    f << "XXXX garbage";
  }
  const Result r = knitply_run({"-c", swatch_config(), "--out-dir", d.string(), "grid"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad magic"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("plies"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(knitply_run({}).code, 1);
  EXPECT_EQ(knitply_run({"frobnicate"}).code, 1);
  EXPECT_EQ(knitply_run({"tile", "--bogus"}).code, 1);
  EXPECT_EQ(knitply_run({"--set", "novalue", "stats"}).code, 1);
  EXPECT_EQ(knitply_run({"--help"}).code, 0);
}

TEST(Cli, InvalidValuesExitTwo) {
  const Result r = knitply_run({"--set", "pattern.n=zero", "tile", data_path("patterns/straight.kcf").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("[pattern] n"), std::string::npos) << r.err;
  const fs::path d = scratch_dir("invalid");
  EXPECT_EQ(knitply_run({"--out-dir", d.string(), "tile", data_path("patterns/straight.kcf").string(), "-n", "0"}).code,
            2);
}

TEST(Cli, RenderIsByteIdenticalAcrossRunsAndThreads) {
  const fs::path d = scratch_dir("determinism");
  build_swatch(d);
  auto args = small_render(d);
  args.insert(args.end(), {"--seed", "5", "--threads", "1", "render", "--spp", "1", "-o", (d / "a.pfm").string()});
  ASSERT_EQ(knitply_run(args).code, 0);
  args[args.size() - 6] = "3";
  args.back() = (d / "b.pfm").string();
  ASSERT_EQ(knitply_run(args).code, 0);
  args.back() = (d / "c.pfm").string();
  ASSERT_EQ(knitply_run(args).code, 0);
  const std::string a = read_bytes(d / "a.pfm");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, read_bytes(d / "b.pfm"));
  EXPECT_EQ(a, read_bytes(d / "c.pfm"));
}

TEST(Cli, EffectiveConfigReproducesTheRun) {
  const fs::path d = scratch_dir("echo");
  build_swatch(d);
  auto args = small_render(d);
  args.insert(args.end(), {"--seed", "9", "render", "--spp", "2"});
  ASSERT_EQ(knitply_run(args).code, 0);
  const std::string first = read_bytes(d / "render.pfm");
  fs::rename(d / "render.effective.ini", d / "echo.ini");
  fs::remove(d / "render.pfm");
  const Result r = knitply_run({"-c", (d / "echo.ini").string(), "render"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_bytes(d / "render.pfm"), first);
}

TEST(Cli, FullPipelineProducesImageAndValidates) {
  const fs::path d = scratch_dir("pipeline");
  build_swatch(d);
  for (const char* stage : {"map", "render", "stats", "validate"}) {
    auto args = small_render(d);
    args.push_back(stage);
    const Result r = knitply_run(args);
    ASSERT_EQ(r.code, 0) << stage << ": " << r.err << r.out;
  }
  EXPECT_EQ(read_plb(d / "mapped.plb").size(), read_plb(d / "plies.plb").size());
  const Image img = read_pfm(d / "render.pfm");
  EXPECT_EQ(img.width, 16);
  EXPECT_GT(std::accumulate(img.data.begin(), img.data.end(), 0.0), 0.0);
  ASSERT_TRUE(fs::exists(d / "render.png"));
  EXPECT_EQ(read_bytes(d / "render.png").substr(1, 3), "PNG");
}

TEST(Cli, FitWritesMaterialAndTrace) {
  const fs::path d = scratch_dir("fit");
  build_swatch(d);
  const std::string front = data_path("scenes/swatch.ini").string(), back = data_path("scenes/swatch_back.ini").string();
  for (const auto& [config, name] : {std::pair{front, "front.pfm"}, std::pair{back, "back.pfm"}}) {
    const Result r = knitply_run({"-c", config, "--out-dir", d.string(), "--set", "render.png=", "--set",
                                  std::string("render.output=") + name, "--seed", "7", "render", "--spp", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::ofstream(d / "fit.ini") << "[fit]\nscenes = " << front << ", " << back
                               << "\nreferences = front.pfm, back.pfm\nfree = albedo_r:0.05:0.99\nspp = 2\nseed = 7\n"
                               << "budget = 8\ninitial = " << data_path("scenes/guess.mat").string() << "\n";
  const Result r = knitply_run({"-c", (d / "fit.ini").string(), "--out-dir", d.string(), "fit"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("albedo_r"), std::string::npos);
  const Material m = load_material(d / "fitted.mat");
  EXPECT_GT(m.bsdf.albedo.x, 0.05);
  EXPECT_LT(m.bsdf.albedo.x, 0.99);
  EXPECT_EQ(m.bsdf.spec_weight, load_material(data_path("scenes/guess.mat")).bsdf.spec_weight);
  std::istringstream trace(read_bytes(d / "trace.csv"));
  std::string line;
  std::getline(trace, line);
  EXPECT_EQ(line, "evaluation,best_loss");
  int rows = 0;
  while (std::getline(trace, line)) ++rows;
  EXPECT_GE(rows, 3);
  EXPECT_LE(rows, 8);
  EXPECT_TRUE(fs::exists(d / "fit.effective.ini"));
}
