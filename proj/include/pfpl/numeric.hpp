// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Dense numeric layer: an MLP split into a feature extractor (phi) and a
// classifier head, cross-entropy, backpropagation and momentum SGD.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pfpl {

/// Rows are samples.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using ClientId = std::uint32_t;
using Label = std::int32_t;

enum class Activation { identity, relu };

/// y = act(x W + b), with W stored as (in x out).
struct DenseLayer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t param_count() const {
    return static_cast<std::size_t>(weights.size() + bias.size());
  }
};

struct Model {
  std::vector<DenseLayer> phi;   // raw input -> embedding
  std::vector<DenseLayer> head;  // embedding -> logits

  std::size_t input_dim() const;
  std::size_t embedding_dim() const;
  std::size_t num_classes() const;
  std::size_t param_count() const;

  /// Throws DimensionError when the layer chain does not compose.
  void validate() const;
};

/// Per-parameter gradients (or any other parameter-shaped quantity).
struct LayerGrad {
  Matrix weights;
  Vector bias;
};

struct Gradients {
  std::vector<LayerGrad> phi;
  std::vector<LayerGrad> head;

  static Gradients zeros_like(const Model& model);
  double squared_norm() const;
  double norm() const;
  bool all_finite() const;
  Gradients& operator+=(const Gradients& other);
};

struct OptimizerState {
  double eta = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  Gradients velocity;

  static OptimizerState for_model(const Model& model, double eta, double momentum,
                                  double weight_decay);
};

struct Batch {
  Matrix inputs;
  std::vector<Label> labels;
};

/// `layer_dims` is the feature-extractor chain [p, hidden..., d]; its last entry
/// must equal `embedding_dim`. Hidden layers use ReLU; the embedding layer and
/// the head are linear. Weights and biases are U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Model init_model(std::span<const std::size_t> layer_dims, std::size_t embedding_dim,
                 std::size_t num_classes, std::uint64_t seed);

Matrix forward_features(const Model& model, const Matrix& inputs);
Matrix forward_logits(const Model& model, const Matrix& embeddings);

/// Activations retained for backpropagation.
struct ForwardTrace {
  std::vector<Matrix> phi_inputs;   // input of each phi layer
  std::vector<Matrix> phi_outputs;  // post-activation output of each phi layer
  std::vector<Matrix> head_inputs;
  std::vector<Matrix> head_outputs;

  const Matrix& embeddings() const { return phi_outputs.back(); }
  const Matrix& logits() const { return head_outputs.back(); }
};

ForwardTrace trace_forward(const Model& model, const Matrix& inputs);

struct CrossEntropy {
  double loss = 0.0;
  Matrix grad_logits;  // d(mean loss)/d(logits)
};

/// Mean softmax cross-entropy over the batch. Throws DataError on bad labels.
CrossEntropy cross_entropy(const Matrix& logits, std::span<const Label> labels);

/// Backpropagates `grad_logits` through the head and, together with
/// `extra_grad_on_embedding` when given, through phi.
Gradients backward(const Model& model, const ForwardTrace& trace, const Matrix& grad_logits,
                   const std::optional<Matrix>& extra_grad_on_embedding = std::nullopt);

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

/// Cross-entropy loss and its gradient for one batch, plus the chain-rule
/// contribution of an embedding-level term when `extra_grad_on_embedding` is set.
BackwardResult backward(const Model& model, const Batch& batch,
                        const std::optional<Matrix>& extra_grad_on_embedding = std::nullopt);

/// v <- momentum * v + grad + weight_decay * param;  param <- param - eta * v.
/// Throws NumericError tagged with `client` if any gradient entry is non-finite.
void sgd_step(Model& model, const Gradients& grads, OptimizerState& opt, ClientId client = 0);

/// Flat parameter view in a fixed order (phi layers then head; W then b).
std::vector<double> flatten(const Model& model);
void unflatten(std::span<const double> params, Model& model);
std::vector<double> flatten(const Gradients& grads);

bool all_finite(const Model& model);

}  // namespace pfpl
