#pragma once
// Flat key=value experiment configuration. Every exponent of a run is a
// first-class named field; validation collects all violations at once and
// rejects unknown keys so typos cannot silently fall back to defaults.
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rpflow/density.hpp"
#include "rpflow/flow.hpp"
#include "rpflow/params.hpp"

namespace rpflow {

enum class ExperimentKind {
  localization,
  flow_events,
  subordination,
  concentration,
  regularity,
  scaling_sweep,
};

std::string to_string(ExperimentKind k);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::localization;
  ModelParams model;
  Exponents exponents;          // resolved against delta at parse time
  Interval window{-0.25, 0.25};
  DensitySpec density;
  int ensemble = 1;
  std::uint64_t master_seed = 1;
  double grid_budget = 1e5;
  std::string output_dir = "out";

  // flow controls
  int grid_size = 64;           // Dyson path intervals M
  FlowOptions flow;
  int subsample_size = 512;
  GridOptions::Policy subsample_policy = GridOptions::Policy::uniform;
  std::vector<int> sites;       // empty = all sites where applicable
  bool track_g = true;          // false: skip local-resolvent ratio tracking
  int dump_trajectories = 0;    // trajectories CSV for the first run

  // sweep / concentration / regularity controls
  std::vector<int> sweep_N;
  double zeta = 0.0;            // 0 = N^(-1/2)
  std::vector<double> mu_grid{0.2, 0.3, 0.4, 0.5, 0.6};
  Interval J{-0.25, 0.25};
  double epsilon = 0.25;
  double bulk_fraction = 0.8;

  std::map<std::string, std::string> raw;  // canonical parsed key=value view

  std::string hash() const;  // stable hash of the canonical view + version
};

// Parse a config file; throws ConfigError listing every problem (unknown
// keys, type errors). validate() additionally checks cross-field rules
// (exponent ordering kappa > delta > theta, ranges, ensemble >= 1).
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::vector<std::string> validate(const ExperimentConfig& c);

// Derived per-realization seed (documented scheme: master -> purpose tag ->
// realization index).
std::uint64_t realization_seed(std::uint64_t master, std::string_view purpose, int index);

}  // namespace rpflow
