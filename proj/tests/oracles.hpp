// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used by the unit and acceptance tests.
// Nothing here calls the code under test for the quantity being checked: the
// forward pass is a scalar triple loop, gradients come from central finite
// differences, and the prototype aggregates are written out from their
// formulas with plain loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "pfpl/numeric.hpp"
#include "pfpl/prototypes.hpp"
#include "pfpl/rng.hpp"

namespace oracle {

using pfpl::Batch;
using pfpl::ClientId;
using pfpl::DenseLayer;
using pfpl::Label;
using pfpl::Matrix;
using pfpl::Model;
using pfpl::Vector;

// Central-difference step and the denominator floor of the relative error.
inline constexpr double kFdStep = 1e-5;
inline constexpr double kRelFloor = 1e-6;

inline Matrix naive_dense(const Matrix& x, const DenseLayer& layer) {
  Matrix out(x.rows(), layer.weights.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index o = 0; o < layer.weights.cols(); ++o) {
      double acc = layer.bias(o);
      for (Eigen::Index i = 0; i < x.cols(); ++i) acc += x(r, i) * layer.weights(i, o);
      if (layer.activation == pfpl::Activation::relu && acc < 0.0) acc = 0.0;
      out(r, o) = acc;
    }
  return out;
}

inline Matrix naive_chain(const std::vector<DenseLayer>& layers, Matrix x) {
  for (const auto& layer : layers) x = naive_dense(x, layer);
  return x;
}

inline Matrix naive_features(const Model& m, const Matrix& x) { return naive_chain(m.phi, x); }
inline Matrix naive_logits(const Model& m, const Matrix& h) { return naive_chain(m.head, h); }

inline double naive_cross_entropy(const Matrix& logits, const std::vector<Label>& labels) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double top = logits(r, 0);
    for (Eigen::Index c = 1; c < logits.cols(); ++c) top = std::max(top, logits(r, c));
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - top);
    total += top + std::log(sum) - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(logits.rows());
}

// CE + lambda * (1/B) sum_b ||h_b - target[y_b]||^2 (missing targets add 0).
inline double naive_composite(const Model& m, const Batch& batch,
                              const std::map<Label, Vector>& targets, double lambda) {
  const Matrix h = naive_features(m, batch.inputs);
  double reg = 0.0;
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    auto it = targets.find(batch.labels[static_cast<std::size_t>(r)]);
    if (it == targets.end()) continue;
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      const double diff = h(r, j) - it->second(j);
      reg += diff * diff;
    }
  }
  reg /= static_cast<double>(h.rows());
  return naive_cross_entropy(naive_logits(m, h), batch.labels) + lambda * reg;
}

// Smallest |pre-activation| over every ReLU unit for the batch. Finite
// differences are meaningless when a unit sits on the kink.
inline double relu_margin(const Model& m, const Matrix& inputs) {
  double margin = INFINITY;
  Matrix x = inputs;
  for (const auto& layer : m.phi) {
    DenseLayer linear = layer;
    linear.activation = pfpl::Activation::identity;
    const Matrix z = naive_dense(x, linear);
    if (layer.activation == pfpl::Activation::relu) margin = std::min(margin, z.cwiseAbs().minCoeff());
    x = naive_dense(x, layer);
  }
  return margin;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares every analytic gradient entry against a central difference of
// `loss` with respect to the matching flattened parameter.
inline GradCheck check_gradients(const Model& model, const std::vector<double>& analytic,
                                 const std::function<double(const Model&)>& loss) {
  GradCheck out;
  const std::vector<double> base = pfpl::flatten(model);
  Model probe = model;
  std::vector<double> p = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    p[i] = base[i] + kFdStep;
    pfpl::unflatten(p, probe);
    const double up = loss(probe);
    p[i] = base[i] - kFdStep;
    pfpl::unflatten(p, probe);
    const double down = loss(probe);
    p[i] = base[i];
    const double numeric = (up - down) / (2.0 * kFdStep);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), kRelFloor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - analytic[i]) / denom);
    ++out.checked;
  }
  return out;
}

inline Matrix random_matrix(pfpl::Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

inline Vector random_vector(pfpl::Rng& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Batch random_batch(pfpl::Rng& rng, std::size_t rows, std::size_t dim, std::size_t classes) {
  Batch b;
  b.inputs = random_matrix(rng, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::uniform_int_distribution<Label> label(0, static_cast<Label>(classes) - 1);
  for (std::size_t r = 0; r < rows; ++r) b.labels.push_back(label(rng));
  return b;
}

// A tiny model / batch / target instance whose ReLU units all stay at least
// `margin` away from the kink, with at most 500 parameters and 8 samples.
struct GradInstance {
  Model model;
  Batch batch;
  std::map<Label, Vector> targets;
};

inline GradInstance random_grad_instance(pfpl::Rng& rng, double margin = 1e-3) {
  std::uniform_int_distribution<std::size_t> pick_p(2, 6), pick_h(2, 8), pick_d(2, 5),
      pick_c(2, 4), pick_b(1, 8), pick_depth(0, 2);
  for (;;) {
    const std::size_t p = pick_p(rng), d = pick_d(rng), c = pick_c(rng), b = pick_b(rng);
    std::vector<std::size_t> dims{p};
    const std::size_t depth = pick_depth(rng);
    for (std::size_t i = 0; i < depth; ++i) dims.push_back(pick_h(rng));
    dims.push_back(d);
    GradInstance inst;
    inst.model = pfpl::init_model(dims, d, c, rng());
    if (inst.model.param_count() > 500) continue;
    inst.batch = random_batch(rng, b, p, c);
    if (relu_margin(inst.model, inst.batch.inputs) < margin) continue;
    for (std::size_t k = 0; k < c; ++k)
      if (rng() % 4 != 0) inst.targets[static_cast<Label>(k)] = random_vector(rng, static_cast<Eigen::Index>(d));
    return inst;
  }
}

// ---- prototype algebra -------------------------------------------------

inline double sq_dist(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) s += (a(j) - b(j)) * (a(j) - b(j));
  return s;
}

// Peer weights written straight from their definitions, in client-id order.
inline std::map<ClientId, double> brute_peer_weights(ClientId self, const pfpl::ClassCluster& cluster,
                                                     pfpl::WeightMode mode) {
  const Vector* own = nullptr;
  for (const auto& m : cluster.members)
    if (m.client == self) own = &m.centroid;
  std::map<ClientId, double> dist;
  for (const auto& m : cluster.members)
    if (m.client != self) dist[m.client] = sq_dist(*own, m.centroid);
  std::map<ClientId, double> w;
  if (dist.empty()) return w;

  double total = 0.0;
  for (const auto& [id, dv] : dist) total += dv;
  if (total == 0.0) {
    for (const auto& [id, dv] : dist) w[id] = 1.0 / static_cast<double>(dist.size());
    return w;
  }
  if (mode == pfpl::WeightMode::paper_literal) {
    for (const auto& [id, dv] : dist) w[id] = dv / total;
    return w;
  }
  std::vector<double> sorted;
  for (const auto& [id, dv] : dist) sorted.push_back(dv);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double tau = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  if (tau == 0.0) {
    std::size_t ties = 0;
    for (const auto& [id, dv] : dist) ties += dv == sorted.front();
    for (const auto& [id, dv] : dist) w[id] = dv == sorted.front() ? 1.0 / static_cast<double>(ties) : 0.0;
    return w;
  }
  double z = 0.0;
  for (const auto& [id, dv] : dist) z += std::exp(-dv / tau);
  for (const auto& [id, dv] : dist) w[id] = std::exp(-dv / tau) / z;
  return w;
}

inline Vector brute_personalized(ClientId self, const pfpl::ClassCluster& cluster, double alpha,
                                 pfpl::WeightMode mode) {
  const Vector* own = nullptr;
  for (const auto& m : cluster.members)
    if (m.client == self) own = &m.centroid;
  if (cluster.members.size() == 1) return *own;
  const auto w = brute_peer_weights(self, cluster, mode);
  Vector out(own->size());
  for (Eigen::Index j = 0; j < own->size(); ++j) {
    double peer = 0.0;
    for (const auto& m : cluster.members)
      if (m.client != self) peer += w.at(m.client) * m.centroid(j);
    out(j) = alpha * (*own)(j) + (1.0 - alpha) * peer;
  }
  return out;
}

inline Vector brute_global(const pfpl::ClassCluster& cluster) {
  double n = 0.0;
  for (const auto& m : cluster.members) n += static_cast<double>(m.count);
  Vector out = Vector::Zero(cluster.members.front().centroid.size());
  for (Eigen::Index j = 0; j < out.size(); ++j)
    for (const auto& m : cluster.members) out(j) += static_cast<double>(m.count) / n * m.centroid(j);
  return out;
}

inline Vector brute_unbiased(const pfpl::ClassCluster& cluster) {
  Vector out = Vector::Zero(cluster.members.front().centroid.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    for (const auto& m : cluster.members) out(j) += m.centroid(j);
    out(j) /= static_cast<double>(cluster.members.size());
  }
  return out;
}

// Random cluster of 1..max_members members with distinct ids in dimension 1..max_dim.
// Some centroids are duplicated to exercise distance ties.
inline pfpl::ClassCluster random_cluster(pfpl::Rng& rng, std::size_t max_members = 10,
                                         std::size_t max_dim = 8) {
  std::uniform_int_distribution<std::size_t> pick_n(1, max_members), pick_d(1, max_dim),
      pick_count(1, 60);
  const std::size_t n = pick_n(rng);
  const auto d = static_cast<Eigen::Index>(pick_d(rng));
  pfpl::ClassCluster c;
  c.label = static_cast<Label>(rng() % 10);
  std::vector<ClientId> ids(20);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ClientId>(i);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    pfpl::ClusterMember m;
    m.client = ids[i];
    m.count = pick_count(rng);
    if (i > 0 && rng() % 6 == 0)
      m.centroid = c.members[rng() % i].centroid;
    else
      m.centroid = random_vector(rng, d, 2.0);
    c.members.push_back(m);
  }
  return c;
}

// True when v lies inside the componentwise [min, max] box of the members.
inline bool in_member_box(const Vector& v, const pfpl::ClassCluster& cluster, double tol = 1e-12) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& m : cluster.members) {
      lo = std::min(lo, m.centroid(j));
      hi = std::max(hi, m.centroid(j));
    }
    if (v(j) < lo - tol || v(j) > hi + tol) return false;
  }
  return true;
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace oracle
