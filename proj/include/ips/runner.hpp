// runner.hpp: binds graph, model, simulator, and analyses into the
// experiment pipelines behind the command line.
#pragma once

#include <iosfwd>
#include <string>

#include "ips/config.hpp"
#include "ips/model.hpp"

namespace ips {

inline constexpr const char* kVersion = "ipsim 1.0.0";

// exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAdmissibility = 3;
inline constexpr int kExitRefused = 4;

struct ExperimentSetup {
  Graph graph;
  WeightSpec weight;
  ModelSpec model;
  Configuration init;
};

ExperimentSetup build_setup(const ExperimentConfig& cfg);

// Executes the configured pipeline and writes its artifacts under
// cfg.out_dir. Diagnostics go to `log`.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace ips
