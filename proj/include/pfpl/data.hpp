// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// Multi-domain labeled data: synthetic generation, file ingestion and the
// n-way / k-shot client partitioner.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "pfpl/numeric.hpp"

namespace pfpl {

using DomainId = std::int32_t;

/// Column-oriented labeled samples. Row r of `inputs` pairs with labels[r],
/// domains[r] and sample_ids[r]; sample ids are unique within a pool.
struct LabeledData {
  Matrix inputs;
  std::vector<Label> labels;
  std::vector<DomainId> domains;
  std::vector<std::uint64_t> sample_ids;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  bool empty() const { return labels.empty(); }

  LabeledData select(std::span<const std::size_t> rows) const;
  Batch batch(std::span<const std::size_t> rows) const;
  Batch all() const;
};

/// Affine feature map applied on top of the shared class generators.
/// Rotation acts on consecutive coordinate pairs (0,1), (2,3), ...
struct DomainSpec {
  DomainId id = 0;
  double rotation = 0.0;
  Vector scale;   // per-feature, nonzero
  Vector offset;  // per-feature
  double noise_std = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(scale.size()); }
  void validate() const;
  static DomainSpec identity(DomainId id, std::size_t dim);
};

/// Magnitudes used when drawing default per-domain transforms. Offsets and
/// noise are kept on the same scale as the default class spread (0.3); inputs
/// several times larger make lambda * l_R too stiff for eta = 0.01 with
/// momentum 0.9 and the regularized runs diverge.
struct DomainShift {
  double rotation_step = 3.14159265358979323846;  // domain j is rotated by j * step
  double scale_jitter = 0.25;                     // scale ~ U[1 - j, 1 + j]
  double offset_std = 0.15;
  double noise_std = 0.3;
};

std::vector<DomainSpec> default_domains(std::size_t num_domains, std::size_t dim,
                                        const DomainShift& shift, std::uint64_t seed);

/// Class c draws mu_c + N(0, noise_std^2) and is pushed through the domain's
/// affine map. Class means depend on `base_seed` only, so every domain shares
/// them; the per-sample noise stream also depends on the domain id.
LabeledData make_synthetic_domain(const DomainSpec& spec, std::size_t num_classes,
                                  std::uint64_t base_seed, std::size_t samples_per_class,
                                  double class_spread = 1.0);

/// Reads an IDX image/label pair (magic 0x803 / 0x801, big-endian). Pixels are
/// scaled to [0,1] and flattened row-major. Throws IngestionError.
LabeledData load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     DomainId domain = 0);

/// Reads a CSV with header f0..f{p-1},label,domain. Throws IngestionError.
LabeledData load_csv(const std::filesystem::path& path);

struct ClientDataset {
  ClientId id = 0;
  LabeledData train;
  LabeledData test;
  std::map<Label, std::size_t> per_class_counts;  // training counts

  std::set<Label> classes_present() const;
  std::set<DomainId> domains_present() const;
};

struct ClientAssignment {
  ClientId id = 0;
  std::vector<Label> classes;
  std::size_t k_shot = 0;  // allocation per class before the train/test split
  std::vector<DomainId> domains;
};

struct PartitionPlan {
  std::vector<ClientAssignment> clients;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

enum class DomainAssignment { round_robin, random };

/// Distribution from which per-client n, k and domains are drawn.
struct PlanSpec {
  std::size_t num_clients = 8;
  std::size_t num_classes = 6;
  std::size_t num_domains = 2;
  std::vector<std::size_t> n_choices{3};
  std::size_t k_min = 50;
  std::size_t k_max = 50;
  std::size_t domains_per_client = 1;
  DomainAssignment assignment = DomainAssignment::round_robin;
  double test_fraction = 0.2;
};

PartitionPlan draw_plan(const PlanSpec& spec, std::uint64_t seed);

/// Each class's k samples are drawn without replacement from the client's
/// domains in turn, then split into train/test by `test_fraction` per class.
/// Throws PartitionError naming class, domain and shortfall when the pool is short.
std::vector<ClientDataset> partition(const std::map<DomainId, LabeledData>& pool,
                                     const PartitionPlan& plan);

}  // namespace pfpl
