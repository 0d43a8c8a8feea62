// config.hpp: experiment configuration: a small TOML subset (sections,
// scalar and array values, comments) with a JSON alternative. Unknown keys
// are rejected with the line they appear on.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ips/simulator.hpp"

namespace ips {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigValue {
  enum class Kind { Number, String, Boolean, Array };
  Kind kind = Kind::Number;
  double number = 0.0;
  std::string text;   // raw token for strings and exact integers
  bool boolean = false;
  std::vector<double> array;
  int line = 0;
};

// section -> key -> value
using ConfigTree = std::map<std::string, std::map<std::string, ConfigValue>>;

ConfigTree parse_toml(const std::string& text);
ConfigTree parse_config_file(const std::string& path);  // .toml or .json

struct ExperimentConfig {
  std::string preset = "nearest-neighbor";
  std::string analysis = "simulate";
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = "out";

  std::string graph_kind = "zd";  // zd | file
  int dimension = 1;
  int truncation = 10;
  std::string edge_file;

  bool weight_overridden = false;
  WeightSpec weight_spec;

  std::map<std::string, double> params;

  SimParams sim;

  std::string init_kind = "point";  // point | empty
  int init_site = -1;               // -1 = origin
  double init_mass = 1.0;

  double epsilon = 0.01;
  double burn_in = 0.0;        // 0 = horizon/2
  double upper_mass = 0.0;     // invariant probe upper start; 0 = 5x stationary max
  double couple_factor = 0.5;
  double fit_lo = 0.0, fit_hi = 0.0;  // 0 = analysis-specific default
  double ctrw_rate = 1.0;
  int ctrw_walkers = 100000;
  int aux_range = 1;
  double rate_floor = 0.0;     // 0 = ctrw_rate * min degree of the fattened graph
  std::vector<double> ctrw_times{0.5, 1.0, 2.0};

  bool dump_events = false;

  static ExperimentConfig from_tree(const ConfigTree& tree);
  static ExperimentConfig from_file(const std::string& path);
  void validate() const;
};

}  // namespace ips
