// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "pfpl/errors.hpp"

namespace pfpl {

std::size_t PrototypeSet::dim() const {
  return entries.empty() ? 0 : static_cast<std::size_t>(entries.begin()->second.centroid.size());
}

const ClusterMember* ClassCluster::find(ClientId client) const {
  for (const auto& m : members)
    if (m.client == client) return &m;
  return nullptr;
}

std::size_t ClassCluster::dim() const {
  return members.empty() ? 0 : static_cast<std::size_t>(members.front().centroid.size());
}

std::size_t PersonalizedTargets::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [label, v] : entries) n += static_cast<std::size_t>(v.size());
  return n;
}

std::string_view to_string(WeightMode mode) {
  return mode == WeightMode::similarity ? "similarity" : "paper_literal";
}

WeightMode parse_weight_mode(std::string_view text) {
  if (text == "similarity") return WeightMode::similarity;
  if (text == "paper_literal") return WeightMode::paper_literal;
  throw ConfigError(fmt::format("unknown weight mode '{}' (similarity | paper_literal)", text));
}

PrototypeSet compute_local_prototypes(const Model& model, const ClientDataset& dataset) {
  PrototypeSet set;
  set.owner = dataset.id;
  if (dataset.train.empty()) return set;
  const Matrix h = forward_features(model, dataset.train.inputs);
  for (std::size_t r = 0; r < dataset.train.size(); ++r) {
    auto [it, inserted] = set.entries.try_emplace(dataset.train.labels[r]);
    if (inserted) it->second.centroid = Vector::Zero(h.cols());
    it->second.centroid += h.row(static_cast<Eigen::Index>(r)).transpose();
    ++it->second.count;
  }
  for (auto& [label, entry] : set.entries) entry.centroid /= static_cast<double>(entry.count);
  return set;
}

double l2_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw DimensionError(fmt::format("l2_distance: {} vs {} dimensions", a.size(), b.size()));
  return (a - b).squaredNorm();
}

std::map<Label, ClassCluster> cluster_by_class(const std::vector<PrototypeSet>& all_sets) {
  std::map<Label, ClassCluster> clusters;
  std::size_t dim = 0;
  std::set<ClientId> owners;
  for (const auto& set : all_sets) {
    if (!owners.insert(set.owner).second)
      throw ProtocolError(fmt::format("client {} uploaded twice", set.owner));
    for (const auto& [label, entry] : set.entries) {
      const auto d = static_cast<std::size_t>(entry.centroid.size());
      if (dim == 0) dim = d;
      if (d != dim)
        throw DimensionError(fmt::format("client {} class {}: dimension {} differs from {}",
                                         set.owner, label, d, dim));
      auto& cluster = clusters[label];
      cluster.label = label;
      cluster.members.push_back({set.owner, entry.centroid, entry.count});
    }
  }
  for (auto& [label, cluster] : clusters)
    std::sort(cluster.members.begin(), cluster.members.end(),
              [](const ClusterMember& a, const ClusterMember& b) { return a.client < b.client; });
  return clusters;
}

namespace {

// Members other than `self`, in client-id order.
std::vector<const ClusterMember*> peers_of(ClientId self, const ClassCluster& cluster) {
  std::vector<const ClusterMember*> peers;
  for (const auto& m : cluster.members)
    if (m.client != self) peers.push_back(&m);
  std::sort(peers.begin(), peers.end(),
            [](const ClusterMember* a, const ClusterMember* b) { return a->client < b->client; });
  return peers;
}

const ClusterMember& require_member(ClientId self, const ClassCluster& cluster) {
  const ClusterMember* own = cluster.find(self);
  if (own == nullptr)
    throw ProtocolError(fmt::format("client {} is not a member of the class {} cluster", self,
                                    cluster.label));
  return *own;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<const ClusterMember*> sorted_members(const ClassCluster& cluster) {
  if (cluster.members.empty())
    throw ProtocolError(fmt::format("class {} cluster is empty", cluster.label));
  std::vector<const ClusterMember*> out;
  for (const auto& m : cluster.members) out.push_back(&m);
  std::sort(out.begin(), out.end(),
            [](const ClusterMember* a, const ClusterMember* b) { return a->client < b->client; });
  return out;
}

}  // namespace

std::map<ClientId, double> peer_weights(ClientId self, const ClassCluster& cluster,
                                        WeightMode mode) {
  const ClusterMember& own = require_member(self, cluster);
  const auto peers = peers_of(self, cluster);
  std::map<ClientId, double> weights;
  if (peers.empty()) return weights;

  std::vector<double> dist;
  for (const auto* p : peers) dist.push_back(l2_distance(own.centroid, p->centroid));
  const double max_dist = *std::max_element(dist.begin(), dist.end());
  std::vector<double> w(peers.size(), 1.0);

  if (max_dist > 0.0) {
    if (mode == WeightMode::paper_literal) {
      w = dist;
    } else {
      const double tau = median(dist);
      const double nearest = *std::min_element(dist.begin(), dist.end());
      if (tau > 0.0) {
        for (std::size_t j = 0; j < dist.size(); ++j) w[j] = std::exp(-(dist[j] - nearest) / tau);
      } else {
        // tau -> 0 limit: uniform over the nearest peers.
        for (std::size_t j = 0; j < dist.size(); ++j) w[j] = dist[j] == nearest ? 1.0 : 0.0;
      }
    }
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (std::size_t j = 0; j < peers.size(); ++j) weights[peers[j]->client] = w[j] / total;
  return weights;
}

Vector personalized_prototype(ClientId self, const ClassCluster& cluster, double alpha,
                              WeightMode mode) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError(fmt::format("alpha = {} outside [0,1]", alpha));
  const ClusterMember& own = require_member(self, cluster);
  const auto weights = peer_weights(self, cluster, mode);
  if (weights.empty() || alpha == 1.0) return own.centroid;

  Vector blend = Vector::Zero(own.centroid.size());
  for (const auto* peer : peers_of(self, cluster)) {
    if (peer->centroid.size() != own.centroid.size())
      throw DimensionError("cluster members disagree on dimension");
    blend += weights.at(peer->client) * peer->centroid;
  }
  return alpha * own.centroid + (1.0 - alpha) * blend;
}

Vector global_prototype(const ClassCluster& cluster) {
  const auto members = sorted_members(cluster);
  double total = 0.0;
  for (const auto* m : members) total += static_cast<double>(m->count);
  if (!(total > 0.0))
    throw ProtocolError(fmt::format("class {} cluster has no samples", cluster.label));
  Vector out = Vector::Zero(members.front()->centroid.size());
  for (const auto* m : members) out += (static_cast<double>(m->count) / total) * m->centroid;
  return out;
}

Vector unbiased_prototype(const ClassCluster& cluster) {
  const auto members = sorted_members(cluster);
  Vector out = Vector::Zero(members.front()->centroid.size());
  for (const auto* m : members) out += m->centroid;
  return out / static_cast<double>(members.size());
}

}  // namespace pfpl
