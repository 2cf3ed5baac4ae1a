// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <vector>

#include "pfpl/analysis.hpp"
#include "pfpl/config.hpp"
#include "pfpl/federation.hpp"

namespace pfpl {

/// Data pool, partition and initial federation state for a config.
struct PreparedExperiment {
  ExperimentConfig config;
  FederationState state;
};

/// Loads or generates the data pool, partitions it and initializes every
/// client with the same model. Performs all validation that needs the data.
PreparedExperiment prepare_experiment(const ExperimentConfig& config);

std::map<DomainId, LabeledData> build_pool(const ExperimentConfig& config);

struct PayloadTotals {
  std::size_t upload_scalars = 0;
  std::size_t download_scalars = 0;
};

struct ExperimentResult {
  std::vector<RoundReport> rounds;  // rounds[0] is the initial evaluation
  std::map<ClientId, double> final_accuracy;
  PayloadTotals payload;
  ConvergenceDiag diagnostics;
};

/// Called after each round (including round 0) with the round's report and
/// the state after aggregation and distribution.
using RoundObserver = std::function<void(const RoundReport&, const FederationState&)>;

/// Evaluates every client on its test split; update stats are left empty.
RoundReport evaluate_round(const FederationState& state, std::size_t round);

ExperimentResult run_experiment(PreparedExperiment prepared, const RoundObserver& observer = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const RoundObserver& observer = {});

/// Rebuilds totals and diagnostics from a round history.
ExperimentResult summarize(std::vector<RoundReport> rounds, const ExperimentConfig& config);

}  // namespace pfpl
