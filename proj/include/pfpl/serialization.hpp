// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// JSON round artifacts, metrics CSV and run summaries.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pfpl/analysis.hpp"
#include "pfpl/config.hpp"
#include "pfpl/experiment.hpp"
#include "pfpl/federation.hpp"
#include "pfpl/prototypes.hpp"

namespace pfpl {

using Json = nlohmann::ordered_json;

/// {client, round, entries: {class: {centroid: [...], count}}}
Json to_json(const PrototypeSet& set, std::size_t round);
PrototypeSet prototype_set_from_json(const Json& j);

/// {client, round, entries: {class: [...]}}
Json to_json(const PersonalizedTargets& targets, std::size_t round);
PersonalizedTargets targets_from_json(const Json& j);

/// Server snapshot. Prototype strategies carry uploads and targets only;
/// FedAvg carries the aggregated parameter vector.
Json to_json(const ServerState& server);

/// One line of reports.jsonl.
Json to_json(const ClientRoundMetrics& metrics, std::size_t round);
ClientRoundMetrics client_metrics_from_json(const Json& j);

/// round,client_id,acc,loss_s,loss_r,loss_total,upload_params,download_params
std::string metrics_csv(const std::vector<RoundReport>& rounds);

Json summary_json(const ExperimentResult& result, const ExperimentConfig& config);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace pfpl
