#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ips/runner.hpp"
#include "ips/lattice.hpp"
#include "json.hpp"

using namespace ips;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kBaseConfig = R"(
[experiment]
preset = "nearest-neighbor"
analysis = "simulate"
seed = 7
replicas = 20
[graph]
dimension = 1
truncation = 4
[sim]
dt = 1e-3
horizon = 0.2   # short run
record_dt = 0.1
)";

}  // namespace

TEST_CASE("toml parsing") {
  const ConfigTree tree = parse_toml(
      "# comment\n[experiment]\npreset = \"cbi\"\nseed = 12\nflag = true\n"
      "[analysis]\nctrw_times = [0.5, 1.0]\n");
  CHECK(tree.at("experiment").at("preset").text == "cbi");
  CHECK(tree.at("experiment").at("seed").number == 12);
  CHECK(tree.at("experiment").at("flag").boolean);
  CHECK(tree.at("analysis").at("ctrw_times").array == std::vector<double>{0.5, 1.0});

  CHECK_THROWS_AS(parse_toml("[experiment\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[a]\nkey value\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[a]\nk = 1\nk = 2\n"), ConfigError);
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string path = write_temp("bad_key.toml",
                                      "[experiment]\npreset = \"cbi\"\n\nwhoops = 3\n");
  try {
    ExperimentConfig::from_file(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    CHECK(std::string(e.what()).find("whoops") != std::string::npos);
  }
}

TEST_CASE("config validation errors") {
  CHECK_THROWS_AS(ExperimentConfig::from_tree(parse_toml("[experiment]\npreset = \"nope\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_tree(parse_toml("[experiment]\nanalysis = \"dance\"\n")),
      ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_tree(parse_toml("[sim]\ndt = 1e-3\nhorizon = 0.0005\n")),
      ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_tree(parse_toml("[unknown_section]\nx = 1\n")),
                  ConfigError);
}

TEST_CASE("json config alternative") {
  const std::string path = write_temp("cfg.json", R"({
    "experiment": {"preset": "cbi", "analysis": "admit", "seed": 3},
    "graph": {"dimension": 1, "truncation": 2}
  })");
  const ExperimentConfig cfg = ExperimentConfig::from_file(path);
  CHECK(cfg.preset == "cbi");
  CHECK(cfg.analysis == "admit");
  CHECK(cfg.seed == 3);
}

TEST_CASE("admit pipeline writes the six constants") {
  ExperimentConfig cfg = ExperimentConfig::from_tree(parse_toml(kBaseConfig));
  cfg.analysis = "admit";
  cfg.out_dir = (fs::temp_directory_path() / "ipsim_admit").string();
  std::ostringstream log;
  CHECK(run_experiment(cfg, log) == kExitOk);
  const auto rep = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "report.json"));
  for (const char* key : {"c1", "c2_sup", "c3_sup", "c4", "c5", "c6"}) CHECK(rep.contains(key));
  CHECK(rep["all_pass"].get<bool>());
  const auto manifest = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "manifest.json"));
  CHECK(manifest["seed"] == 7);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("contract on a supercritical preset is refused with exit 4") {
  ExperimentConfig cfg = ExperimentConfig::from_tree(parse_toml(kBaseConfig));
  cfg.analysis = "contract";
  cfg.out_dir = (fs::temp_directory_path() / "ipsim_refuse").string();
  std::ostringstream log;
  CHECK(run_experiment(cfg, log) == kExitRefused);
  CHECK(log.str().find("not subcritical") != std::string::npos);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("identical seeds give byte-identical artifacts") {
  ExperimentConfig cfg = ExperimentConfig::from_tree(parse_toml(kBaseConfig));
  std::ostringstream log;
  cfg.out_dir = (fs::temp_directory_path() / "ipsim_det_a").string();
  REQUIRE(run_experiment(cfg, log) == kExitOk);
  ExperimentConfig cfg2 = cfg;
  cfg2.out_dir = (fs::temp_directory_path() / "ipsim_det_b").string();
  REQUIRE(run_experiment(cfg2, log) == kExitOk);
  for (const char* name : {"series.csv", "trajectory.csv", "report.json"})
    CHECK(slurp(fs::path(cfg.out_dir) / name) == slurp(fs::path(cfg2.out_dir) / name));
  // a different seed changes the data artifacts
  ExperimentConfig cfg3 = cfg;
  cfg3.seed = 8;
  cfg3.out_dir = (fs::temp_directory_path() / "ipsim_det_c").string();
  REQUIRE(run_experiment(cfg3, log) == kExitOk);
  CHECK(slurp(fs::path(cfg.out_dir) / "trajectory.csv") !=
        slurp(fs::path(cfg3.out_dir) / "trajectory.csv"));
  for (const auto& d : {cfg.out_dir, cfg2.out_dir, cfg3.out_dir}) fs::remove_all(d);
}

TEST_CASE("event dump is written when asked") {
  ExperimentConfig cfg = ExperimentConfig::from_tree(parse_toml(kBaseConfig));
  cfg.preset = "cbi";  // steady immigration guarantees events
  cfg.sim.horizon = 1.0;
  cfg.sim.record_dt = 0.5;
  cfg.dump_events = true;
  cfg.sim.replicas = 2;
  cfg.out_dir = (fs::temp_directory_path() / "ipsim_events").string();
  std::ostringstream log;
  REQUIRE(run_experiment(cfg, log) == kExitOk);
  const std::string events = slurp(fs::path(cfg.out_dir) / "events.jsonl");
  CHECK(!events.empty());
  const auto first = nlohmann::json::parse(events.substr(0, events.find('\n')));
  for (const char* key : {"step", "site", "kind", "u", "size", "target"}) CHECK(first.contains(key));
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("the binary runs end to end") {
#ifdef IPSIM_BINARY
  const std::string path = write_temp("cli_smoke.toml", kBaseConfig);
  const std::string out = (fs::temp_directory_path() / "ipsim_cli_smoke").string();
  const std::string cmd = std::string(IPSIM_BINARY) + " presets > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  const std::string run = std::string(IPSIM_BINARY) + " admit --config " + path + " --out " + out +
                          " > /dev/null";
  CHECK(std::system(run.c_str()) == 0);
  const std::string bad = std::string(IPSIM_BINARY) + " run --config /nonexistent.toml 2> /dev/null";
  CHECK(WEXITSTATUS(std::system(bad.c_str())) == kExitConfig);
  fs::remove_all(out);
#endif
}

TEST_CASE("inadmissible model exits with code 3") {
  ExperimentConfig cfg = ExperimentConfig::from_tree(parse_toml(kBaseConfig));
  cfg.params["a1"] = -1.0;  // negative off-diagonal interaction
  cfg.analysis = "admit";
  cfg.out_dir = (fs::temp_directory_path() / "ipsim_bad_admit").string();
  std::ostringstream log;
  CHECK(run_experiment(cfg, log) == kExitAdmissibility);
  CHECK(log.str().find("(A1)") != std::string::npos);
  // other pipelines refuse up front as well
  cfg.analysis = "simulate";
  CHECK(run_experiment(cfg, log) == kExitAdmissibility);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("weight section overrides the preset family") {
  const std::string text = std::string(kBaseConfig) + "[weight]\nfamily = \"polynomial\"\ndelta = 3.0\n";
  const ExperimentConfig cfg = ExperimentConfig::from_tree(parse_toml(text));
  CHECK(cfg.weight_overridden);
  CHECK(cfg.weight_spec.family == WeightSpec::Family::Polynomial);
  CHECK(cfg.weight_spec.delta == 3.0);
}
