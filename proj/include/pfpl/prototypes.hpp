// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Prototype algebra: local class centroids, per-class clustering on the
// server, peer weights, and the personalized / global / unbiased aggregates.

#pragma once

#include <cstddef>
#include <map>
#include <string_view>
#include <vector>

#include "pfpl/data.hpp"
#include "pfpl/numeric.hpp"

namespace pfpl {

struct PrototypeEntry {
  Vector centroid;
  std::size_t count = 0;
};

/// One client's class centroids in embedding space.
struct PrototypeSet {
  ClientId owner = 0;
  std::map<Label, PrototypeEntry> entries;

  /// Embedding dimension; 0 when empty.
  std::size_t dim() const;
  /// Scalars carried on the wire (classes x d).
  std::size_t scalar_count() const { return entries.size() * dim(); }
};

struct ClusterMember {
  ClientId client = 0;
  Vector centroid;
  std::size_t count = 0;
};

/// All uploaded centroids for a single class.
struct ClassCluster {
  Label label = 0;
  std::vector<ClusterMember> members;

  const ClusterMember* find(ClientId client) const;
  std::size_t dim() const;
};

/// Per-client regularization targets, keyed by class.
struct PersonalizedTargets {
  ClientId owner = 0;
  std::map<Label, Vector> entries;

  std::size_t scalar_count() const;
};

enum class WeightMode {
  /// softmax(-dist / tau) over peers with tau = median peer distance.
  similarity,
  /// dist / sum(dist): farther peers weigh more.
  paper_literal,
};

std::string_view to_string(WeightMode mode);
WeightMode parse_weight_mode(std::string_view text);

/// Class-wise mean of the training embeddings. Classes the client does not
/// hold are absent.
PrototypeSet compute_local_prototypes(const Model& model, const ClientDataset& dataset);

/// Squared Euclidean distance.
double l2_distance(const Vector& a, const Vector& b);

/// Groups uploads by class. Members within a cluster are ordered by client id,
/// so the result does not depend on upload order.
std::map<Label, ClassCluster> cluster_by_class(const std::vector<PrototypeSet>& all_sets);

/// Weights client `self` assigns to the other members of `cluster`. Empty when
/// `self` is the only member; otherwise nonnegative and summing to one.
std::map<ClientId, double> peer_weights(ClientId self, const ClassCluster& cluster,
                                        WeightMode mode);

/// alpha * own + (1 - alpha) * sum_m w(self, m) * peer_m. A sole holder gets
/// its own centroid back for any alpha.
Vector personalized_prototype(ClientId self, const ClassCluster& cluster, double alpha,
                              WeightMode mode);

/// Count-weighted mean of the member centroids.
Vector global_prototype(const ClassCluster& cluster);

/// Unweighted mean of the member centroids.
Vector unbiased_prototype(const ClassCluster& cluster);

}  // namespace pfpl
