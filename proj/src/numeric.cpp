// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/numeric.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pfpl/errors.hpp"
#include "pfpl/rng.hpp"

namespace pfpl {

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-scale, scale);
  DenseLayer layer;
  layer.weights.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  layer.bias.resize(static_cast<Eigen::Index>(out));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
  for (Eigen::Index c = 0; c < layer.bias.size(); ++c) layer.bias(c) = dist(rng);
  layer.activation = act;
  return layer;
}

Matrix apply(const DenseLayer& layer, const Matrix& x) {
  Matrix y = x * layer.weights;
  y.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::relu) y = y.cwiseMax(0.0);
  return y;
}

void check_input(const Matrix& x, std::size_t expected, const char* what) {
  if (static_cast<std::size_t>(x.cols()) != expected) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) +
                         " columns, got " + std::to_string(x.cols()));
  }
}

LayerGrad zero_grad(const DenseLayer& layer) {
  return {Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
          Vector::Zero(layer.bias.size())};
}

// Backpropagates `delta` (gradient w.r.t. the post-activation outputs) through
// `layers`, writing parameter gradients and returning the gradient w.r.t. the
// stack input.
Matrix backprop_stack(const std::vector<DenseLayer>& layers, const std::vector<Matrix>& inputs,
                      const std::vector<Matrix>& outputs, Matrix delta,
                      std::vector<LayerGrad>& grads) {
  for (std::size_t i = layers.size(); i-- > 0;) {
    const DenseLayer& layer = layers[i];
    if (layer.activation == Activation::relu) {
      delta = delta.cwiseProduct((outputs[i].array() > 0.0).cast<double>().matrix());
    }
    grads[i].weights = inputs[i].transpose() * delta;
    grads[i].bias = delta.colwise().sum().transpose();
    delta = delta * layer.weights.transpose();
  }
  return delta;
}

}  // namespace

std::size_t Model::input_dim() const { return phi.empty() ? 0 : phi.front().in_dim(); }
std::size_t Model::embedding_dim() const { return phi.empty() ? 0 : phi.back().out_dim(); }
std::size_t Model::num_classes() const { return head.empty() ? 0 : head.back().out_dim(); }

std::size_t Model::param_count() const {
  std::size_t total = 0;
  for (const auto& l : phi) total += l.param_count();
  for (const auto& l : head) total += l.param_count();
  return total;
}

void Model::validate() const {
  if (phi.empty() || head.empty()) throw DimensionError("model needs phi and head layers");
  std::size_t width = phi.front().in_dim();
  auto check = [&](const std::vector<DenseLayer>& layers, const char* part) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.in_dim() != width || static_cast<std::size_t>(l.bias.size()) != l.out_dim()) {
        throw DimensionError(std::string(part) + " layer " + std::to_string(i) +
                             " does not compose with its predecessor");
      }
      width = l.out_dim();
    }
  };
  check(phi, "phi");
  check(head, "head");
}

Gradients Gradients::zeros_like(const Model& model) {
  Gradients g;
  for (const auto& l : model.phi) g.phi.push_back(zero_grad(l));
  for (const auto& l : model.head) g.head.push_back(zero_grad(l));
  return g;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto* part : {&phi, &head})
    for (const auto& g : *part) s += g.weights.squaredNorm() + g.bias.squaredNorm();
  return s;
}

double Gradients::norm() const { return std::sqrt(squared_norm()); }

bool Gradients::all_finite() const {
  for (const auto* part : {&phi, &head})
    for (const auto& g : *part)
      if (!g.weights.allFinite() || !g.bias.allFinite()) return false;
  return true;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (phi.size() != other.phi.size() || head.size() != other.head.size())
    throw DimensionError("gradient layer count mismatch");
  auto add = [](std::vector<LayerGrad>& a, const std::vector<LayerGrad>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i].weights += b[i].weights;
      a[i].bias += b[i].bias;
    }
  };
  add(phi, other.phi);
  add(head, other.head);
  return *this;
}

OptimizerState OptimizerState::for_model(const Model& model, double eta, double momentum,
                                         double weight_decay) {
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  return {eta, momentum, weight_decay, Gradients::zeros_like(model)};
}

Model init_model(std::span<const std::size_t> layer_dims, std::size_t embedding_dim,
                 std::size_t num_classes, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least [input, embedding]");
  for (std::size_t d : layer_dims)
    if (d == 0) throw ConfigError("layer dimensions must be positive");
  if (embedding_dim == 0 || num_classes == 0)
    throw ConfigError("embedding_dim and num_classes must be positive");
  if (layer_dims.back() != embedding_dim)
    throw ConfigError("last layer dimension " + std::to_string(layer_dims.back()) +
                      " differs from embedding_dim " + std::to_string(embedding_dim));

  Rng rng(seed);
  Model model;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const bool last = i + 2 == layer_dims.size();
    model.phi.push_back(make_layer(layer_dims[i], layer_dims[i + 1],
                                   last ? Activation::identity : Activation::relu, rng));
  }
  model.head.push_back(make_layer(embedding_dim, num_classes, Activation::identity, rng));
  return model;
}

Matrix forward_features(const Model& model, const Matrix& inputs) {
  check_input(inputs, model.input_dim(), "forward_features");
  Matrix x = inputs;
  for (const auto& layer : model.phi) x = apply(layer, x);
  return x;
}

Matrix forward_logits(const Model& model, const Matrix& embeddings) {
  check_input(embeddings, model.embedding_dim(), "forward_logits");
  Matrix x = embeddings;
  for (const auto& layer : model.head) x = apply(layer, x);
  return x;
}

ForwardTrace trace_forward(const Model& model, const Matrix& inputs) {
  check_input(inputs, model.input_dim(), "trace_forward");
  ForwardTrace t;
  Matrix x = inputs;
  for (const auto& layer : model.phi) {
    t.phi_inputs.push_back(x);
    x = apply(layer, x);
    t.phi_outputs.push_back(x);
  }
  for (const auto& layer : model.head) {
    t.head_inputs.push_back(x);
    x = apply(layer, x);
    t.head_outputs.push_back(x);
  }
  return t;
}

CrossEntropy cross_entropy(const Matrix& logits, std::span<const Label> labels) {
  const auto rows = logits.rows();
  if (static_cast<std::size_t>(rows) != labels.size())
    throw DimensionError("cross_entropy: " + std::to_string(rows) + " logit rows vs " +
                         std::to_string(labels.size()) + " labels");
  CrossEntropy out;
  out.grad_logits = Matrix::Zero(rows, logits.cols());
  if (rows == 0) return out;

  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Label y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols())
      throw DataError("label " + std::to_string(y) + " outside [0, " +
                      std::to_string(logits.cols()) + ")");
    const double peak = logits.row(r).maxCoeff();
    auto shifted = (logits.row(r).array() - peak).exp();
    const double z = shifted.sum();
    total += std::log(z) - (logits(r, y) - peak);
    out.grad_logits.row(r) = shifted / z;
    out.grad_logits(r, y) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(rows);
  out.loss = total * inv;
  out.grad_logits *= inv;
  return out;
}

Gradients backward(const Model& model, const ForwardTrace& trace, const Matrix& grad_logits,
                   const std::optional<Matrix>& extra_grad_on_embedding) {
  const Matrix& h = trace.embeddings();
  if (grad_logits.rows() != trace.logits().rows() || grad_logits.cols() != trace.logits().cols())
    throw DimensionError("backward: logit gradient shape mismatch");
  if (extra_grad_on_embedding &&
      (extra_grad_on_embedding->rows() != h.rows() || extra_grad_on_embedding->cols() != h.cols()))
    throw DimensionError("backward: embedding gradient must be " + std::to_string(h.rows()) +
                         "x" + std::to_string(h.cols()));

  Gradients g = Gradients::zeros_like(model);
  Matrix delta = backprop_stack(model.head, trace.head_inputs, trace.head_outputs, grad_logits,
                                g.head);
  if (extra_grad_on_embedding) delta += *extra_grad_on_embedding;
  backprop_stack(model.phi, trace.phi_inputs, trace.phi_outputs, std::move(delta), g.phi);
  return g;
}

BackwardResult backward(const Model& model, const Batch& batch,
                        const std::optional<Matrix>& extra_grad_on_embedding) {
  const ForwardTrace trace = trace_forward(model, batch.inputs);
  CrossEntropy ce = cross_entropy(trace.logits(), batch.labels);
  return {ce.loss, backward(model, trace, ce.grad_logits, extra_grad_on_embedding)};
}

void sgd_step(Model& model, const Gradients& grads, OptimizerState& opt, ClientId client) {
  if (grads.phi.size() != model.phi.size() || grads.head.size() != model.head.size() ||
      opt.velocity.phi.size() != model.phi.size() || opt.velocity.head.size() != model.head.size())
    throw DimensionError("sgd_step: parameter/gradient layer count mismatch");
  if (!grads.all_finite()) throw NumericError(client, NumericError::kNoBatch, "non-finite gradient");

  auto step = [&](auto& param, const auto& grad, auto& vel) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols() || param.rows() != vel.rows() ||
        param.cols() != vel.cols())
      throw DimensionError("sgd_step: shape mismatch");
    vel = opt.momentum * vel + grad + opt.weight_decay * param;
    param -= opt.eta * vel;
  };
  auto update = [&](std::vector<DenseLayer>& layers, const std::vector<LayerGrad>& g,
                    std::vector<LayerGrad>& v) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      step(layers[i].weights, g[i].weights, v[i].weights);
      step(layers[i].bias, g[i].bias, v[i].bias);
    }
  };
  update(model.phi, grads.phi, opt.velocity.phi);
  update(model.head, grads.head, opt.velocity.head);
}

std::vector<double> flatten(const Model& model) {
  std::vector<double> out;
  out.reserve(model.param_count());
  for (const auto* part : {&model.phi, &model.head})
    for (const auto& l : *part) {
      out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
  return out;
}

void unflatten(std::span<const double> params, Model& model) {
  if (params.size() != model.param_count())
    throw DimensionError("unflatten: expected " + std::to_string(model.param_count()) +
                         " parameters, got " + std::to_string(params.size()));
  std::size_t pos = 0;
  for (auto* part : {&model.phi, &model.head})
    for (auto& l : *part) {
      std::copy_n(params.data() + pos, l.weights.size(), l.weights.data());
      pos += static_cast<std::size_t>(l.weights.size());
      std::copy_n(params.data() + pos, l.bias.size(), l.bias.data());
      pos += static_cast<std::size_t>(l.bias.size());
    }
}

std::vector<double> flatten(const Gradients& grads) {
  std::vector<double> out;
  for (const auto* part : {&grads.phi, &grads.head})
    for (const auto& g : *part) {
      out.insert(out.end(), g.weights.data(), g.weights.data() + g.weights.size());
      out.insert(out.end(), g.bias.data(), g.bias.data() + g.bias.size());
    }
  return out;
}

bool all_finite(const Model& model) {
  for (const auto* part : {&model.phi, &model.head})
    for (const auto& l : *part)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

}  // namespace pfpl
