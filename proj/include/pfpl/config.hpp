// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration: flat dotted keys, defaults < file < flags.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pfpl/data.hpp"
#include "pfpl/federation.hpp"

namespace pfpl {

enum class DataSource { synthetic, idx, csv };

/// Defaults follow the desk-scale benchmark: 8 clients over 2 synthetic
/// domains, 6 classes, n = 3, k = 50, 30 rounds of 1 local epoch, with the
/// optimizer settings lr 0.01, momentum 0.9, weight decay 1e-5, batch 4.
struct ExperimentConfig {
  Strategy strategy;

  std::vector<std::size_t> hidden{64};
  std::size_t embedding_dim = 32;

  DataSource source = DataSource::synthetic;
  std::size_t input_dim = 16;
  std::size_t num_classes = 6;
  std::size_t num_domains = 2;
  std::size_t samples_per_class = 250;
  double class_spread = 0.3;
  DomainShift shift;
  std::vector<std::string> idx_images;
  std::vector<std::string> idx_labels;
  std::vector<std::string> csv_paths;

  std::size_t clients = 8;
  std::vector<std::size_t> n_choices{3};
  std::size_t k_min = 50;
  std::size_t k_max = 50;
  std::size_t domains_per_client = 1;
  DomainAssignment domain_assignment = DomainAssignment::round_robin;
  double test_fraction = 0.2;

  double eta = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t batch_size = 4;

  std::size_t rounds = 30;
  std::size_t local_epochs = 1;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";

  /// Throws ConfigError naming the offending key.
  void validate() const;
  TrainingOptions training() const { return {local_epochs, batch_size}; }
  PlanSpec plan_spec() const;
};

/// Every recognized key, in echo order.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws ConfigError naming the key.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Textual value of a key, in a form set_config_value accepts.
std::string get_config_value(const ExperimentConfig& config, const std::string& key);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines (# comments) or a flat JSON object.
KeyValues parse_config_text(const std::string& text, const std::string& origin);

/// Defaults, then the file (if any), then the overrides; validated.
ExperimentConfig resolve_config(const std::filesystem::path* file, const KeyValues& overrides);

/// Flat JSON object holding every key; accepted back by resolve_config.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace pfpl
