// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Artifact trees for single runs and sweeps.
//
// A run directory holds:
//   resolved-config.json
//   rounds/round-NNNN/{uploads,targets,reports}.jsonl and server.json
//   metrics.csv, summary.json
// A sweep directory holds one run directory per grid point under points/,
// plus comparison.csv (one row per point and round) and final.csv.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pfpl/config.hpp"
#include "pfpl/experiment.hpp"

namespace pfpl {

/// Runs `config` into config.output_dir. A non-empty directory is refused
/// with ConfigError unless `force`, in which case earlier artifacts are removed.
ExperimentResult run_to_directory(const ExperimentConfig& config, bool force);

/// Reads rounds/*/reports.jsonl back into round reports.
std::vector<RoundReport> load_round_reports(const std::filesystem::path& run_dir);

/// Regenerates metrics.csv and summary.json from the round artifacts.
ExperimentResult report_directory(const std::filesystem::path& run_dir);

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Parses "key=v1,v2,..." specs. Only alpha, lambda, strategy, n, k,
/// weight_mode and seed (or their dotted forms) may be swept.
std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs);

struct SweepPoint {
  std::string name;
  std::vector<std::pair<std::string, std::string>> assignment;
  ExperimentConfig config;
};

/// Cartesian product of the axes applied to `base`. Every point is validated.
std::vector<SweepPoint> expand_grid(const ExperimentConfig& base, const std::vector<GridAxis>& axes,
                                    const std::filesystem::path& root);

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<ExperimentResult> results;
};

SweepResult run_sweep(const ExperimentConfig& base, const std::vector<GridAxis>& axes,
                      const std::filesystem::path& root, bool force, std::size_t jobs = 1);

}  // namespace pfpl
