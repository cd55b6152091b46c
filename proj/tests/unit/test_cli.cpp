#include "doctest.h"
#include "wgdiff/cli.hpp"
#include "wgdiff/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wgdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "wgdiff_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string write_config(const fs::path& dir, const std::string& json) {
  fs::create_directories(dir);
  const auto path = dir / "config.json";
  std::ofstream(path) << json;
  return path.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

int run(const std::string& sub, const std::string& config, const fs::path& out, std::ostream& err) {
  RunRequest r;
  r.subcommand = sub;
  r.config_path = config;
  r.out = out.string();
  r.quiet = true;
  return run_subcommand(r, err);
}

std::size_t csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

}  // namespace

TEST_CASE("subcommand list") {
  CHECK(subcommand_names().size() == 8);
}

TEST_CASE("missing config exits 4 without outputs") {
  const auto dir = scratch("missing");
  std::ostringstream err;
  CHECK(run("sample", (dir / "nope.json").string(), dir / "out", err) == kExitIo);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(err.str().find("io error") != std::string::npos);
}

TEST_CASE("schema violations exit 2 without outputs") {
  const auto dir = scratch("schema");
  std::ostringstream err;
  const auto unknown = write_config(dir / "a", R"({"n": 10, "colour": "blue"})");
  CHECK(run("sample", unknown, dir / "out_a", err) == kExitConfig);
  CHECK_FALSE(fs::exists(dir / "out_a"));
  CHECK(err.str().find("/colour") != std::string::npos);

  const auto malformed = write_config(dir / "b", R"({"n": 10,)");
  CHECK(run("sample", malformed, dir / "out_b", err) == kExitConfig);
  const auto wrong_type = write_config(dir / "c", R"({"n": "ten"})");
  CHECK(run("sample", wrong_type, dir / "out_c", err) == kExitConfig);
  const auto bad_kind = write_config(dir / "d", R"({"domain": {"kind": "torus"}})");
  CHECK(run("sample", bad_kind, dir / "out_d", err) == kExitConfig);
  CHECK(run("frobnicate", unknown, dir / "out_e", err) == kExitConfig);
  const auto no_kind = write_config(dir / "f", R"({})");
  CHECK(run("rates", no_kind, dir / "out_f", err) == kExitConfig);
}

TEST_CASE("sample writes a manifest with the resolved config and is deterministic") {
  const auto dir = scratch("sample");
  const auto cfg = write_config(dir, R"({"n": 200, "seed": 5, "normalize": true})");
  std::ostringstream err;
  REQUIRE(run("sample", cfg, dir / "out1", err) == kExitOk);
  REQUIRE(run("sample", cfg, dir / "out2", err) == kExitOk);
  for (const char* f : {"points.csv", "points_normalized.csv"}) CHECK(slurp(dir / "out1" / f) == slurp(dir / "out2" / f));
  auto m1 = read_json(dir / "out1" / "manifest.json"), m2 = read_json(dir / "out2" / "manifest.json");
  m1["config"].erase("output_dir");
  m2["config"].erase("output_dir");
  CHECK(m1 == m2);
  CHECK(csv_rows(dir / "out1" / "points.csv") == 200);
  const auto manifest = read_json(dir / "out1" / "manifest.json");
  CHECK(manifest["subcommand"] == "sample");
  CHECK(manifest["version"] == version());
  CHECK(manifest["seeds"] == Json::array({5}));
  CHECK(manifest["config"]["domain"]["kind"] == "box");
  CHECK(manifest["config"]["rho"]["kind"] == "constant");
  CHECK(fs::exists(dir / "out1" / "summary.json"));
  CHECK(fs::exists(dir / "out1" / "log.txt"));

  // The manifest's config reproduces the run.
  const auto again = write_config(dir / "again", manifest["config"].dump());
  REQUIRE(run("sample", again, dir / "out1", err) == kExitOk);
  CHECK(slurp(dir / "out1" / "points.csv") == slurp(dir / "out2" / "points.csv"));
}

TEST_CASE("rates with the shipped one-dimensional config") {
  const auto dir = scratch("rates");
  std::ostringstream err;
  REQUIRE(run("rates", std::string(WGDIFF_SOURCE_DIR) + "/configs/rates_nonlocal_vs_local_1d.json", dir, err) == kExitOk);
  CHECK(csv_rows(dir / "rates.csv") >= 5);
  const auto summary = read_json(dir / "summary.json");
  CHECK(summary["fit"]["slope"].get<double>() >= 0.9);
}

TEST_CASE("graph, energy and straight-line subcommands") {
  const auto dir = scratch("graph");
  std::ostringstream err;
  const auto g = write_config(dir / "g", R"({"n": 300, "eps": 0.1, "u": {"kind": "affine", "coeffs": [1, 0]}})");
  REQUIRE(run("build-graph", g, dir / "g_out", err) == kExitOk);
  CHECK(read_json(dir / "g_out" / "summary.json")["edges"].get<int>() > 0);
  CHECK(slurp(dir / "g_out" / "edges.txt").rfind("# n=300", 0) == 0);

  const auto e = write_config(dir / "e", R"({"n_values": [200], "seeds": 2, "eps": 0.15,
      "nonlocal": {"outer_panels": 16, "angles": 32}})");
  REQUIRE(run("energy-compare", e, dir / "e_out", err) == kExitOk);
  CHECK(csv_rows(dir / "e_out" / "energies.csv") == 2);

  const auto s = write_config(dir / "s", R"({"kind": "straight-line", "h": 0.004, "origins": [[0.5, 0.5]],
      "distances": [0.04, 0.06, 0.1, 0.15, 0.2]})");
  REQUIRE(run("rates", s, dir / "s_out", err) == kExitOk);
  CHECK(read_json(dir / "s_out" / "summary.json")["fit"]["slope"].get<double>() > 1.5);

  const auto w = write_config(dir / "w", R"({"kind": "w11", "eps_values": [0.04, 0.02, 0.01, 0.005]})");
  REQUIRE(run("rates", w, dir / "w_out", err) == kExitOk);
  CHECK(csv_rows(dir / "w_out" / "w11.csv") == 4);
}

TEST_CASE("recover and recover-sweep") {
  const auto dir = scratch("recover");
  std::ostringstream err;
  const auto r = write_config(dir / "r", R"({"n": 80, "test_points": 40, "cv_folds": 2,
      "train": {"max_iterations": 200}})");
  REQUIRE(run("recover", r, dir / "r_out", err) == kExitOk);
  for (const char* f : {"dataset.csv", "model.ckpt", "loss_trace.csv", "test_predictions.csv", "cv.csv"})
    CHECK(fs::exists(dir / "r_out" / f));
  CHECK(csv_rows(dir / "r_out" / "test_predictions.csv") == 40);
  CHECK(csv_rows(dir / "r_out" / "loss_trace.csv") == 200);

  const auto sw = write_config(dir / "sw", R"({"n_values": [50, 80], "seeds": 2, "test_points": 20,
      "train": {"max_iterations": 100}})");
  REQUIRE(run("recover-sweep", sw, dir / "sw_out", err) == kExitOk);
  CHECK(csv_rows(dir / "sw_out" / "runs.csv") == 4);
  CHECK(csv_rows(dir / "sw_out" / "aggregate.csv") == 2);
  CHECK(read_json(dir / "sw_out" / "manifest.json")["seeds"].size() == 2);
}

TEST_CASE("pde-run and boundary-gap") {
  const auto dir = scratch("pde");
  std::ostringstream err;
  const auto p = write_config(dir / "p", R"({"domain": {"kind": "ellipsoid-mask", "shape": [10, 10, 10],
      "spacing": [0.22, 0.22, 0.22]}, "dt": 0.01, "horizon": 0.1, "snapshot_times": [0.05]})");
  REQUIRE(run("pde-run", p, dir / "p_out", err) == kExitOk);
  CHECK(csv_rows(dir / "p_out" / "trace.csv") == 11);
  CHECK(fs::exists(dir / "p_out" / "snapshot_0.bin"));
  CHECK(fs::exists(dir / "p_out" / "final.bin"));
  CHECK(read_json(dir / "p_out" / "summary.json")["max_relative_mass_drift"].get<double>() < 1e-8);

  const auto b = write_config(dir / "b", R"({"domain": {"kind": "ellipsoid-mask", "shape": [10, 10, 10],
      "spacing": [0.22, 0.22, 0.22]}, "dt": 0.02, "horizon": 2.0})");
  REQUIRE(run("boundary-gap", b, dir / "b_out", err) == kExitOk);
  CHECK(csv_rows(dir / "b_out" / "gap.csv") == 101);

  // A solver that cannot converge is a numerical failure.
  const auto bad = write_config(dir / "bad", R"({"domain": {"kind": "ellipsoid-mask", "shape": [10, 10, 10],
      "spacing": [0.22, 0.22, 0.22]}, "dt": 0.5, "horizon": 1.0, "cg": {"max_iterations": 1, "rel_tol": 1e-14}})");
  CHECK(run("pde-run", bad, dir / "bad_out", err) == kExitNumerical);
  CHECK(slurp(dir / "bad_out" / "log.txt").find("numerical error") != std::string::npos);
}

TEST_CASE("command-line front end") {
  const auto dir = scratch("binary");
  const auto cfg = write_config(dir, R"({"n": 50})");
  const std::string exe = WGDIFF_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status(exe + " sample --config " + cfg + " --out " + (dir / "o").string() + " --seed 9 --quiet") == 0);
  CHECK(read_json(dir / "o" / "manifest.json")["seeds"] == Json::array({9}));
  CHECK(status(exe + " sample --config " + cfg + " --bogus") == kExitConfig);
  CHECK(status(exe + " sample") == kExitConfig);
  CHECK(status(exe + " sample --config " + (dir / "missing.json").string()) == kExitIo);
  CHECK(status(exe + " sample --config " + cfg + " --threads 0") == kExitConfig);
}
