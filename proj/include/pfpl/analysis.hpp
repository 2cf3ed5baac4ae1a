// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Accuracy, communication accounting and convergence diagnostics.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pfpl/data.hpp"
#include "pfpl/federation.hpp"
#include "pfpl/numeric.hpp"
#include "pfpl/prototypes.hpp"

namespace pfpl {

/// Fraction of argmax-logit predictions equal to the label; ties go to the
/// lowest class index. Throws EvaluationError on an empty test set.
double evaluate(const Model& model, const LabeledData& test);

inline constexpr std::size_t kBytesPerScalar = 8;

struct CommCost {
  std::size_t upload_scalars = 0;
  std::size_t download_scalars = 0;
  std::size_t upload_bytes() const { return upload_scalars * kBytesPerScalar; }
  std::size_t download_bytes() const { return download_scalars * kBytesPerScalar; }
};

/// Per-client, per-round payload. Prototype strategies move one d-vector per
/// class in each direction, FedAvg moves the full model, LocalOnly nothing.
CommCost comm_cost(StrategyKind strategy, const Model& model, const PrototypeSet& upload,
                   const PersonalizedTargets* download);

struct ClientRoundMetrics {
  ClientId client = 0;
  double accuracy = 0.0;
  std::size_t upload_params = 0;
  std::size_t download_params = 0;
  std::size_t train_size = 0;
  LocalUpdateReport update;  // prototypes are not retained
};

struct RoundReport {
  std::size_t round = 0;
  std::vector<ClientRoundMetrics> clients;
  double macro_accuracy = 0.0;
  double objective = 0.0;
};

double macro_average(std::span<const ClientRoundMetrics> clients);

/// Federated objective: sum_i (D_i / N) * loss_s_i + lambda * sum_i loss_r_i.
double federated_objective(std::span<const ClientRoundMetrics> clients, double lambda);

/// max over probe rows of ||f(phi_after, x) - f(phi_before, x)|| / ||phi_after - phi_before||.
/// Zero when phi did not move.
double estimate_embedding_lipschitz(const Model& before, const Model& after, const Matrix& probe);

struct GradientStats {
  double g_hat = 0.0;      // max norm
  double sigma_hat = 0.0;  // sample standard deviation of the norms
};

GradientStats gradient_stats(std::span<const double> norms);

/// Fraction of consecutive pairs (a, b) with b < a, pooled over sequences.
/// nullopt when no sequence has two entries.
std::optional<double> monotone_fraction(const std::vector<std::vector<double>>& sequences);

struct RoundDiag {
  std::size_t round = 0;
  double lambda_bound = 0.0;  // ||grad||^2 / (L2 * E * G), min over clients
  bool lambda_exceeds_bound = false;
  double theorem_bound_gap = 0.0;  // informational one-round change bound, mean over clients
};

struct ConvergenceDiag {
  bool available = false;
  double g_hat = 0.0;
  double sigma_hat = 0.0;
  double l1_hat = 0.0;
  double l2_hat = 0.0;
  double monotone_fraction = 0.0;
  std::vector<RoundDiag> rounds;
};

struct DiagParams {
  double lambda = 1.0;
  double eta = 0.01;
};

/// Diagnostics over training rounds (round 0, the initial evaluation, is
/// skipped). Monotonicity compares each client's start-of-round objective
/// across consecutive rounds that both train against prototype targets (or,
/// for strategies without targets, across all training rounds).
ConvergenceDiag convergence_diag(const std::vector<RoundReport>& history, const DiagParams& params);

}  // namespace pfpl
