// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Round orchestration: prototype-regularized local updates, uploads, and
// server-side aggregation for PFPL and the baseline strategies.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "pfpl/data.hpp"
#include "pfpl/numeric.hpp"
#include "pfpl/prototypes.hpp"
#include "pfpl/rng.hpp"

namespace pfpl {

enum class StrategyKind { pfpl, global_proto, unbiased_proto, fedavg, local_only };

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view text);

struct Strategy {
  StrategyKind kind = StrategyKind::pfpl;
  double alpha = 0.5;   // PFPL only
  double lambda = 1.0;  // prototype strategies only
  WeightMode weight_mode = WeightMode::similarity;

  bool exchanges_prototypes() const;
  /// Lambda actually applied to the regularizer (0 for FedAvg / LocalOnly).
  double effective_lambda() const;
  void validate() const;
};

struct TrainingOptions {
  std::size_t local_epochs = 1;
  std::size_t batch_size = 4;
};

struct ClientState {
  ClientId id = 0;
  Model model;
  OptimizerState optimizer;
  ClientDataset data;
  PrototypeSet prototypes;
  Rng shuffle_rng;
};

/// What the server holds between rounds. Under prototype strategies only
/// uploaded prototype sets and the derived targets live here.
struct ServerState {
  std::size_t round = 0;
  StrategyKind strategy = StrategyKind::pfpl;
  std::vector<PrototypeSet> uploads;
  std::map<ClientId, PersonalizedTargets> targets;
  std::optional<std::vector<double>> global_parameters;  // FedAvg only
};

struct FederationState {
  std::size_t round = 0;
  std::vector<ClientState> clients;
  ServerState server;
  std::uint64_t seed = 0;
};

struct LocalUpdateReport {
  ClientId client = 0;
  // Sample-weighted means over every batch of the update.
  double loss_s = 0.0;
  double loss_r = 0.0;
  double loss_total = 0.0;
  std::size_t samples_seen = 0;
  std::size_t steps = 0;
  bool had_targets = false;
  PrototypeSet prototypes;

  // Full-training-set objective (same targets) before and after the update.
  double start_loss = 0.0;
  double end_loss = 0.0;
  double start_grad_norm = 0.0;
  double end_grad_norm = 0.0;
  double param_step_norm = 0.0;   // ||w_end - w_start||
  double grad_change_norm = 0.0;  // ||grad_end - grad_start||
  double embedding_lipschitz = 0.0;
  std::vector<double> batch_grad_norms;
};

struct CompositeLoss {
  double loss_s = 0.0;
  double loss_r = 0.0;
  double total = 0.0;
  Gradients grads;
};

/// Cross-entropy plus lambda times the mean over the batch of ||h - target[y]||^2.
/// Samples whose label has no target contribute to the cross-entropy only.
/// With lambda == 0 the regularizer is measured but never backpropagated.
CompositeLoss composite_loss(const Model& model, const Batch& batch,
                             const PersonalizedTargets& targets, double lambda);

/// Trains one client for `options.local_epochs` epochs against `targets`, then
/// recomputes its prototypes with the updated model.
LocalUpdateReport local_update(ClientState& client, const PersonalizedTargets& targets,
                               const Strategy& strategy, const TrainingOptions& options);

/// Builds client states sharing one initial model.
FederationState init_federation(std::vector<ClientDataset> datasets, const Model& initial,
                                double eta, double momentum, double weight_decay,
                                std::uint64_t seed);

struct Payload {
  std::size_t upload_scalars = 0;
  std::size_t download_scalars = 0;
};

struct RoundOutcome {
  std::size_t round = 0;
  std::vector<LocalUpdateReport> reports;  // in client order
  std::map<ClientId, Payload> payloads;
};

/// Aggregates uploaded prototype sets into per-client targets for `strategy`.
std::map<ClientId, PersonalizedTargets> aggregate_targets(const std::vector<PrototypeSet>& uploads,
                                                          const Strategy& strategy);

/// Weighted mean of parameter vectors; weights need not be normalized.
std::vector<double> average_parameters(const std::map<ClientId, std::vector<double>>& params,
                                       const std::map<ClientId, double>& weights);

/// One communication round: local updates against the previous targets,
/// upload, aggregation and distribution.
RoundOutcome run_round(FederationState& state, const Strategy& strategy,
                       const TrainingOptions& options);

}  // namespace pfpl
