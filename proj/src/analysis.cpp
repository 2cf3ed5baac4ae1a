// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pfpl/errors.hpp"

namespace pfpl {

double evaluate(const Model& model, const LabeledData& test) {
  if (test.empty()) throw EvaluationError("empty test set");
  const Matrix logits = forward_logits(model, forward_features(model, test.inputs));
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    if (best == test.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

CommCost comm_cost(StrategyKind strategy, const Model& model, const PrototypeSet& upload,
                   const PersonalizedTargets* download) {
  switch (strategy) {
    case StrategyKind::pfpl:
    case StrategyKind::global_proto:
    case StrategyKind::unbiased_proto:
      return {upload.scalar_count(), download ? download->scalar_count() : 0};
    case StrategyKind::fedavg:
      return {model.param_count(), model.param_count()};
    case StrategyKind::local_only:
      break;
  }
  return {};
}

double macro_average(std::span<const ClientRoundMetrics> clients) {
  if (clients.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : clients) sum += c.accuracy;
  return sum / static_cast<double>(clients.size());
}

double federated_objective(std::span<const ClientRoundMetrics> clients, double lambda) {
  double total_size = 0.0;
  for (const auto& c : clients) total_size += static_cast<double>(c.train_size);
  if (!(total_size > 0.0)) return 0.0;
  double supervised = 0.0, regularizer = 0.0;
  for (const auto& c : clients) {
    supervised += static_cast<double>(c.train_size) / total_size * c.update.loss_s;
    regularizer += c.update.loss_r;
  }
  return supervised + lambda * regularizer;
}

double estimate_embedding_lipschitz(const Model& before, const Model& after, const Matrix& probe) {
  if (before.phi.size() != after.phi.size())
    throw DimensionError("lipschitz estimate: feature extractors differ in depth");
  double step = 0.0;
  for (std::size_t i = 0; i < before.phi.size(); ++i) {
    step += (after.phi[i].weights - before.phi[i].weights).squaredNorm();
    step += (after.phi[i].bias - before.phi[i].bias).squaredNorm();
  }
  step = std::sqrt(step);
  if (step == 0.0 || probe.rows() == 0) return 0.0;
  const Matrix delta = forward_features(after, probe) - forward_features(before, probe);
  return delta.rowwise().norm().maxCoeff() / step;
}

GradientStats gradient_stats(std::span<const double> norms) {
  GradientStats s;
  if (norms.empty()) return s;
  s.g_hat = *std::max_element(norms.begin(), norms.end());
  if (norms.size() > 1) {
    double mean = 0.0;
    for (double x : norms) mean += x;
    mean /= static_cast<double>(norms.size());
    double ss = 0.0;
    for (double x : norms) ss += (x - mean) * (x - mean);
    s.sigma_hat = std::sqrt(ss / static_cast<double>(norms.size() - 1));
  }
  return s;
}

std::optional<double> monotone_fraction(const std::vector<std::vector<double>>& sequences) {
  std::size_t pairs = 0, decreases = 0;
  for (const auto& seq : sequences)
    for (std::size_t i = 1; i < seq.size(); ++i) {
      ++pairs;
      if (seq[i] < seq[i - 1]) ++decreases;
    }
  if (pairs == 0) return std::nullopt;
  return static_cast<double>(decreases) / static_cast<double>(pairs);
}

ConvergenceDiag convergence_diag(const std::vector<RoundReport>& history, const DiagParams& params) {
  ConvergenceDiag diag;
  std::vector<const RoundReport*> training;
  for (const auto& r : history)
    if (r.round > 0) training.push_back(&r);
  if (training.size() < 2) return diag;

  std::vector<double> norms;
  for (const auto* r : training)
    for (const auto& c : r->clients) {
      norms.insert(norms.end(), c.update.batch_grad_norms.begin(), c.update.batch_grad_norms.end());
      if (c.update.param_step_norm > 0.0)
        diag.l1_hat = std::max(diag.l1_hat, c.update.grad_change_norm / c.update.param_step_norm);
      diag.l2_hat = std::max(diag.l2_hat, c.update.embedding_lipschitz);
    }
  const GradientStats stats = gradient_stats(norms);
  diag.g_hat = stats.g_hat;
  diag.sigma_hat = stats.sigma_hat;

  // Objective at the start of each round, per client. When some rounds train
  // against targets, only those rounds share a comparable objective.
  bool any_targets = false;
  for (const auto* r : training)
    for (const auto& c : r->clients) any_targets = any_targets || c.update.had_targets;
  std::map<ClientId, std::vector<double>> sequences;
  for (const auto* r : training)
    for (const auto& c : r->clients)
      if (!any_targets || c.update.had_targets) sequences[c.client].push_back(c.update.start_loss);
  std::vector<std::vector<double>> seqs;
  for (auto& [id, s] : sequences) seqs.push_back(std::move(s));
  diag.monotone_fraction = monotone_fraction(seqs).value_or(0.0);

  const double eta = params.eta;
  for (const auto* r : training) {
    RoundDiag rd;
    rd.round = r->round;
    rd.lambda_bound = std::numeric_limits<double>::infinity();
    double gap_sum = 0.0;
    for (const auto& c : r->clients) {
      const auto steps = static_cast<double>(c.update.steps);
      const double denom = diag.l2_hat * steps * diag.g_hat;
      if (denom > 0.0)
        rd.lambda_bound =
            std::min(rd.lambda_bound, c.update.start_grad_norm * c.update.start_grad_norm / denom);
      double sq = 0.0;
      for (double g : c.update.batch_grad_norms) sq += g * g;
      gap_sum += -(eta - diag.l1_hat * eta * eta / 2.0) * sq +
                 diag.l1_hat * steps * eta * eta * diag.sigma_hat * diag.sigma_hat / 2.0 +
                 params.lambda * diag.l2_hat * eta * steps * diag.g_hat;
    }
    rd.lambda_exceeds_bound = params.lambda > rd.lambda_bound;
    if (!r->clients.empty()) rd.theorem_bound_gap = gap_sum / static_cast<double>(r->clients.size());
    diag.rounds.push_back(rd);
  }
  diag.available = true;
  return diag;
}

}  // namespace pfpl
