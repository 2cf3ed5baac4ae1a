// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pfpl/analysis.hpp"
#include "pfpl/errors.hpp"

namespace pfpl {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::pfpl:
      return "pfpl";
    case StrategyKind::global_proto:
      return "global_proto";
    case StrategyKind::unbiased_proto:
      return "unbiased_proto";
    case StrategyKind::fedavg:
      return "fedavg";
    case StrategyKind::local_only:
      return "local_only";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view text) {
  for (auto k : {StrategyKind::pfpl, StrategyKind::global_proto, StrategyKind::unbiased_proto,
                 StrategyKind::fedavg, StrategyKind::local_only})
    if (text == to_string(k)) return k;
  throw ConfigError(fmt::format(
      "unknown strategy '{}' (pfpl | global_proto | unbiased_proto | fedavg | local_only)", text));
}

bool Strategy::exchanges_prototypes() const {
  return kind == StrategyKind::pfpl || kind == StrategyKind::global_proto ||
         kind == StrategyKind::unbiased_proto;
}

double Strategy::effective_lambda() const { return exchanges_prototypes() ? lambda : 0.0; }

void Strategy::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError(fmt::format("alpha = {} outside [0,1]", alpha));
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError(fmt::format("lambda = {} must be finite and >= 0", lambda));
}

CompositeLoss composite_loss(const Model& model, const Batch& batch,
                             const PersonalizedTargets& targets, double lambda) {
  const ForwardTrace trace = trace_forward(model, batch.inputs);
  CrossEntropy ce = cross_entropy(trace.logits(), batch.labels);
  const Matrix& h = trace.embeddings();
  const auto rows = h.rows();

  CompositeLoss out;
  out.loss_s = ce.loss;
  std::optional<Matrix> extra;
  if (rows > 0 && !targets.entries.empty()) {
    Matrix diff = Matrix::Zero(rows, h.cols());
    bool any = false;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto it = targets.entries.find(batch.labels[static_cast<std::size_t>(r)]);
      if (it == targets.entries.end()) continue;
      if (it->second.size() != h.cols())
        throw DimensionError(fmt::format("target for class {} has dimension {}, embeddings {}",
                                         it->first, it->second.size(), h.cols()));
      diff.row(r) = h.row(r) - it->second.transpose();
      any = true;
    }
    const double inv = 1.0 / static_cast<double>(rows);
    out.loss_r = diff.squaredNorm() * inv;
    if (any && lambda != 0.0) extra = (2.0 * lambda * inv) * diff;
  }
  out.total = out.loss_s + lambda * out.loss_r;
  out.grads = backward(model, trace, ce.grad_logits, extra);
  return out;
}

FederationState init_federation(std::vector<ClientDataset> datasets, const Model& initial,
                                double eta, double momentum, double weight_decay,
                                std::uint64_t seed) {
  initial.validate();
  FederationState state;
  state.seed = seed;
  std::sort(datasets.begin(), datasets.end(),
            [](const ClientDataset& a, const ClientDataset& b) { return a.id < b.id; });
  for (auto& data : datasets) {
    if (data.train.feature_dim() != initial.input_dim())
      throw DimensionError(fmt::format("client {}: data has {} features, model expects {}",
                                       data.id, data.train.feature_dim(), initial.input_dim()));
    ClientState c;
    c.id = data.id;
    c.model = initial;
    c.optimizer = OptimizerState::for_model(initial, eta, momentum, weight_decay);
    c.shuffle_rng = make_stream(seed, fmt::format("shuffle/{}", data.id));
    c.data = std::move(data);
    c.prototypes = compute_local_prototypes(c.model, c.data);
    state.clients.push_back(std::move(c));
  }
  return state;
}

LocalUpdateReport local_update(ClientState& client, const PersonalizedTargets& targets,
                               const Strategy& strategy, const TrainingOptions& options) {
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const double lambda = strategy.effective_lambda();
  const Batch full = client.data.train.all();
  const Model before = client.model;

  LocalUpdateReport report;
  report.client = client.id;
  report.had_targets = !targets.entries.empty();

  auto check_finite = [&](const CompositeLoss& l, std::int64_t batch) {
    if (!std::isfinite(l.loss_s) || !std::isfinite(l.loss_r) || !std::isfinite(l.total))
      throw NumericError(client.id, batch, "non-finite loss");
  };

  Gradients start_grads;
  if (!full.labels.empty()) {
    CompositeLoss start = composite_loss(client.model, full, targets, lambda);
    check_finite(start, NumericError::kNoBatch);
    report.start_loss = start.total;
    report.start_grad_norm = start.grads.norm();
    start_grads = std::move(start.grads);
  }

  const std::size_t n = client.data.train.size();
  std::vector<std::size_t> order(n);
  double sum_s = 0.0, sum_r = 0.0, sum_total = 0.0;
  std::int64_t batch_index = 0;
  for (std::size_t epoch = 0; epoch < options.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), client.shuffle_rng);
    for (std::size_t pos = 0; pos < n; pos += options.batch_size, ++batch_index) {
      const std::size_t len = std::min(options.batch_size, n - pos);
      const Batch batch =
          client.data.train.batch(std::span<const std::size_t>(order.data() + pos, len));
      CompositeLoss loss = composite_loss(client.model, batch, targets, lambda);
      check_finite(loss, batch_index);
      if (!loss.grads.all_finite()) throw NumericError(client.id, batch_index, "non-finite gradient");
      report.batch_grad_norms.push_back(loss.grads.norm());
      sgd_step(client.model, loss.grads, client.optimizer, client.id);

      const auto w = static_cast<double>(len);
      sum_s += w * loss.loss_s;
      sum_r += w * loss.loss_r;
      sum_total += w * loss.total;
      report.samples_seen += len;
      ++report.steps;
    }
  }
  if (!all_finite(client.model))
    throw NumericError(client.id, NumericError::kNoBatch, "non-finite parameters");

  if (report.samples_seen > 0) {
    const double inv = 1.0 / static_cast<double>(report.samples_seen);
    report.loss_s = sum_s * inv;
    report.loss_r = sum_r * inv;
    report.loss_total = sum_total * inv;
  }

  if (!full.labels.empty()) {
    CompositeLoss end = composite_loss(client.model, full, targets, lambda);
    check_finite(end, NumericError::kNoBatch);
    report.end_loss = end.total;
    report.end_grad_norm = end.grads.norm();
    const auto g0 = flatten(start_grads);
    const auto g1 = flatten(end.grads);
    const auto w0 = flatten(before);
    const auto w1 = flatten(client.model);
    double dg = 0.0, dw = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) dg += (g1[i] - g0[i]) * (g1[i] - g0[i]);
    for (std::size_t i = 0; i < w0.size(); ++i) dw += (w1[i] - w0[i]) * (w1[i] - w0[i]);
    report.grad_change_norm = std::sqrt(dg);
    report.param_step_norm = std::sqrt(dw);
    report.embedding_lipschitz =
        estimate_embedding_lipschitz(before, client.model, client.data.train.inputs);
  }

  client.prototypes = compute_local_prototypes(client.model, client.data);
  report.prototypes = client.prototypes;
  return report;
}

std::map<ClientId, PersonalizedTargets> aggregate_targets(const std::vector<PrototypeSet>& uploads,
                                                          const Strategy& strategy) {
  std::map<ClientId, PersonalizedTargets> out;
  if (!strategy.exchanges_prototypes()) return out;
  const auto clusters = cluster_by_class(uploads);

  std::map<Label, Vector> shared;
  if (strategy.kind != StrategyKind::pfpl)
    for (const auto& [label, cluster] : clusters)
      shared[label] = strategy.kind == StrategyKind::global_proto ? global_prototype(cluster)
                                                                  : unbiased_prototype(cluster);

  for (const auto& set : uploads) {
    PersonalizedTargets& t = out[set.owner];
    t.owner = set.owner;
    for (const auto& [label, entry] : set.entries) {
      const ClassCluster& cluster = clusters.at(label);
      if (strategy.kind == StrategyKind::pfpl)
        t.entries[label] =
            personalized_prototype(set.owner, cluster, strategy.alpha, strategy.weight_mode);
      else if (cluster.members.size() == 1)
        t.entries[label] = entry.centroid;
      else
        t.entries[label] = shared.at(label);
    }
  }
  return out;
}

std::vector<double> average_parameters(const std::map<ClientId, std::vector<double>>& params,
                                       const std::map<ClientId, double>& weights) {
  if (params.empty()) throw ProtocolError("no parameters to average");
  double total = 0.0;
  for (const auto& [id, p] : params) {
    const auto it = weights.find(id);
    if (it == weights.end() || !(it->second >= 0.0))
      throw ProtocolError(fmt::format("client {} has no valid aggregation weight", id));
    total += it->second;
  }
  if (!(total > 0.0)) throw ProtocolError("aggregation weights sum to zero");
  const std::size_t size = params.begin()->second.size();
  std::vector<double> mean(size, 0.0);
  for (const auto& [id, p] : params) {
    if (p.size() != size) throw DimensionError("clients disagree on parameter count");
    const double w = weights.at(id) / total;
    for (std::size_t i = 0; i < size; ++i) mean[i] += w * p[i];
  }
  return mean;
}

RoundOutcome run_round(FederationState& state, const Strategy& strategy,
                       const TrainingOptions& options) {
  strategy.validate();
  if (state.round > 0 && state.server.strategy != strategy.kind)
    throw ProtocolError(fmt::format("server state was built for {}, round requested {}",
                                    to_string(state.server.strategy), to_string(strategy.kind)));
  RoundOutcome outcome;
  outcome.round = ++state.round;

  static const PersonalizedTargets kNoTargets{};
  for (auto& client : state.clients) {
    const auto it = state.server.targets.find(client.id);
    const PersonalizedTargets& targets = it == state.server.targets.end() ? kNoTargets : it->second;
    if (!targets.entries.empty() && !strategy.exchanges_prototypes())
      throw ProtocolError(fmt::format("{} does not use prototype targets",
                                      to_string(strategy.kind)));
    outcome.reports.push_back(local_update(client, targets, strategy, options));
  }

  ServerState next;
  next.round = state.round;
  next.strategy = strategy.kind;
  if (strategy.exchanges_prototypes()) {
    for (const auto& r : outcome.reports) next.uploads.push_back(r.prototypes);
    next.targets = aggregate_targets(next.uploads, strategy);
  } else if (strategy.kind == StrategyKind::fedavg) {
    std::map<ClientId, std::vector<double>> params;
    std::map<ClientId, double> weights;
    for (const auto& c : state.clients) {
      params[c.id] = flatten(c.model);
      weights[c.id] = static_cast<double>(c.data.train.size());
    }
    next.global_parameters = average_parameters(params, weights);
    for (auto& c : state.clients) unflatten(*next.global_parameters, c.model);
  }

  for (std::size_t i = 0; i < state.clients.size(); ++i) {
    const auto& c = state.clients[i];
    const auto it = next.targets.find(c.id);
    const CommCost cost = comm_cost(strategy.kind, c.model, outcome.reports[i].prototypes,
                                    it == next.targets.end() ? nullptr : &it->second);
    outcome.payloads[c.id] = {cost.upload_scalars, cost.download_scalars};
  }
  state.server = std::move(next);
  return outcome;
}

}  // namespace pfpl
