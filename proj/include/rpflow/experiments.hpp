#pragma once
// Experiment drivers: turn a validated config into CSV tables, a manifest
// and (at report time) SVG figures. Realizations run in an index-ordered
// pool; per-realization numerical failures are logged and skipped, and
// aggregation is a deterministic reduction in realization order.
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rpflow/config.hpp"

namespace rpflow {

extern const char* kVersion;

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::vector<std::uint64_t> realization_seeds;
  std::vector<std::pair<std::string, double>> phase_seconds;
  std::vector<std::string> outputs;
  std::vector<std::string> failures;  // "realization 7: <what>"
};

struct RunOutcome {
  RunManifest manifest;
  int completed = 0, failed = 0;
};

// Dispatch on config.experiment; writes outputs under out_dir and the
// manifest last. `threads` sizes the realization pool.
RunOutcome run(const ExperimentConfig& config, const std::string& out_dir, int threads,
               std::ostream& log);

// Aggregate one or more finished run directories: summary tables + SVG
// figures under report_dir. Incompatible runs are refused with a field diff.
void report(const std::vector<std::string>& run_dirs, const std::string& report_dir,
            std::ostream& log);

// One realization smoke sample: potential + terminal spectrum CSVs.
RunOutcome sample(const ExperimentConfig& config, const std::string& out_dir,
                  std::ostream& log);

void write_manifest(const RunManifest& m, const ExperimentConfig& c,
                    const std::string& path);

}  // namespace rpflow
