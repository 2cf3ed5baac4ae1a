// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <fmt/format.h>

#include "pfpl/errors.hpp"
#include "pfpl/rng.hpp"

namespace pfpl {

LabeledData LabeledData::select(std::span<const std::size_t> rows) const {
  LabeledData out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.labels.reserve(rows.size());
  out.domains.reserve(rows.size());
  out.sample_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(r));
    out.labels.push_back(labels[r]);
    out.domains.push_back(domains[r]);
    out.sample_ids.push_back(sample_ids[r]);
  }
  return out;
}

Batch LabeledData::batch(std::span<const std::size_t> rows) const {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  b.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
    b.labels.push_back(labels[rows[i]]);
  }
  return b;
}

Batch LabeledData::all() const { return {inputs, labels}; }

void DomainSpec::validate() const {
  if (scale.size() == 0) throw ConfigError(fmt::format("domain {}: empty scale vector", id));
  if (offset.size() != scale.size())
    throw ConfigError(fmt::format("domain {}: offset has {} entries, scale has {}", id,
                                  offset.size(), scale.size()));
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    if (scale(i) == 0.0 || !std::isfinite(scale(i)))
      throw ConfigError(fmt::format("domain {}: scale[{}] must be finite and nonzero", id, i));
  if (!(noise_std >= 0.0)) throw ConfigError(fmt::format("domain {}: noise_std must be >= 0", id));
  if (!std::isfinite(rotation) || !offset.allFinite())
    throw ConfigError(fmt::format("domain {}: non-finite transform", id));
}

DomainSpec DomainSpec::identity(DomainId id, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {id, 0.0, Vector::Ones(n), Vector::Zero(n), 0.0};
}

std::vector<DomainSpec> default_domains(std::size_t num_domains, std::size_t dim,
                                        const DomainShift& shift, std::uint64_t seed) {
  std::vector<DomainSpec> out;
  for (std::size_t j = 0; j < num_domains; ++j) {
    Rng rng = make_stream(seed, fmt::format("domain-transform/{}", j));
    std::uniform_real_distribution<double> jitter(1.0 - shift.scale_jitter,
                                                  1.0 + shift.scale_jitter);
    std::normal_distribution<double> offset(0.0, 1.0);
    DomainSpec spec = DomainSpec::identity(static_cast<DomainId>(j), dim);
    spec.rotation = static_cast<double>(j) * shift.rotation_step;
    for (std::size_t i = 0; i < dim; ++i) {
      spec.scale(static_cast<Eigen::Index>(i)) = jitter(rng);
      spec.offset(static_cast<Eigen::Index>(i)) = shift.offset_std * offset(rng);
    }
    spec.noise_std = shift.noise_std;
    out.push_back(std::move(spec));
  }
  return out;
}

namespace {

// Applies scale, then the pairwise rotation, then the offset.
Vector transform(const DomainSpec& spec, const Vector& x) {
  Vector y = x.cwiseProduct(spec.scale);
  const double c = std::cos(spec.rotation);
  const double s = std::sin(spec.rotation);
  for (Eigen::Index i = 0; i + 1 < y.size(); i += 2) {
    const double a = y(i);
    const double b = y(i + 1);
    y(i) = c * a - s * b;
    y(i + 1) = s * a + c * b;
  }
  return y + spec.offset;
}

}  // namespace

LabeledData make_synthetic_domain(const DomainSpec& spec, std::size_t num_classes,
                                  std::uint64_t base_seed, std::size_t samples_per_class,
                                  double class_spread) {
  spec.validate();
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (!(class_spread > 0.0)) throw ConfigError("class_spread must be > 0");

  const auto dim = static_cast<Eigen::Index>(spec.dim());
  std::vector<Vector> means;
  {
    Rng rng = make_stream(base_seed, "class-means");
    std::normal_distribution<double> normal(0.0, class_spread);
    for (std::size_t c = 0; c < num_classes; ++c) {
      Vector mu(dim);
      for (Eigen::Index i = 0; i < dim; ++i) mu(i) = normal(rng);
      means.push_back(std::move(mu));
    }
  }

  Rng rng = make_stream(base_seed, fmt::format("domain-noise/{}", spec.id));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t total = num_classes * samples_per_class;
  LabeledData data;
  data.inputs.resize(static_cast<Eigen::Index>(total), dim);
  data.labels.reserve(total);
  data.domains.assign(total, spec.id);
  data.sample_ids.reserve(total);
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
      Vector x = means[c];
      if (spec.noise_std > 0.0)
        for (Eigen::Index i = 0; i < dim; ++i) x(i) += spec.noise_std * normal(rng);
      data.inputs.row(static_cast<Eigen::Index>(row)) = transform(spec, x).transpose();
      data.labels.push_back(static_cast<Label>(c));
      data.sample_ids.push_back((static_cast<std::uint64_t>(static_cast<std::uint32_t>(spec.id))
                                 << 32) |
                                row);
    }
  }
  return data;
}

std::set<Label> ClientDataset::classes_present() const {
  std::set<Label> out;
  for (const auto& [label, count] : per_class_counts)
    if (count > 0) out.insert(label);
  return out;
}

std::set<DomainId> ClientDataset::domains_present() const {
  std::set<DomainId> out(train.domains.begin(), train.domains.end());
  out.insert(test.domains.begin(), test.domains.end());
  return out;
}

PartitionPlan draw_plan(const PlanSpec& spec, std::uint64_t seed) {
  if (spec.num_clients == 0) throw ConfigError("partition needs at least one client");
  if (spec.num_domains == 0) throw ConfigError("partition needs at least one domain");
  if (spec.n_choices.empty()) throw ConfigError("n_choices must be nonempty");
  for (std::size_t n : spec.n_choices)
    if (n == 0 || n > spec.num_classes)
      throw ConfigError(fmt::format("n = {} outside [1, {}]", n, spec.num_classes));
  if (spec.k_min == 0 || spec.k_min > spec.k_max)
    throw ConfigError("k range must satisfy 1 <= k_min <= k_max");
  if (spec.domains_per_client == 0 || spec.domains_per_client > spec.num_domains)
    throw ConfigError("domains_per_client must be in [1, num_domains]");
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0))
    throw ConfigError("test_fraction must be in [0,1)");

  Rng rng = make_stream(seed, "partition-plan");
  PartitionPlan plan;
  plan.test_fraction = spec.test_fraction;
  plan.seed = seed;
  std::vector<Label> all_classes(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) all_classes[c] = static_cast<Label>(c);
  std::vector<DomainId> all_domains(spec.num_domains);
  for (std::size_t d = 0; d < spec.num_domains; ++d) all_domains[d] = static_cast<DomainId>(d);

  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    ClientAssignment a;
    a.id = static_cast<ClientId>(i);
    std::uniform_int_distribution<std::size_t> pick_n(0, spec.n_choices.size() - 1);
    const std::size_t n = spec.n_choices[pick_n(rng)];
    std::uniform_int_distribution<std::size_t> pick_k(spec.k_min, spec.k_max);
    a.k_shot = pick_k(rng);

    std::vector<Label> classes = all_classes;
    std::shuffle(classes.begin(), classes.end(), rng);
    classes.resize(n);
    std::sort(classes.begin(), classes.end());
    a.classes = std::move(classes);

    if (spec.assignment == DomainAssignment::round_robin) {
      for (std::size_t j = 0; j < spec.domains_per_client; ++j)
        a.domains.push_back(static_cast<DomainId>((i + j) % spec.num_domains));
    } else {
      std::vector<DomainId> domains = all_domains;
      std::shuffle(domains.begin(), domains.end(), rng);
      domains.resize(spec.domains_per_client);
      a.domains = std::move(domains);
    }
    std::sort(a.domains.begin(), a.domains.end());
    plan.clients.push_back(std::move(a));
  }
  return plan;
}

std::vector<ClientDataset> partition(const std::map<DomainId, LabeledData>& pool,
                                     const PartitionPlan& plan) {
  if (!(plan.test_fraction >= 0.0 && plan.test_fraction < 1.0))
    throw ConfigError("test_fraction must be in [0,1)");

  // Shuffled per-(domain, class) row lists, consumed front to back.
  std::map<std::pair<DomainId, Label>, std::vector<std::size_t>> available;
  for (const auto& [domain, data] : pool)
    for (std::size_t r = 0; r < data.size(); ++r) available[{domain, data.labels[r]}].push_back(r);
  for (auto& [key, rows] : available) {
    Rng rng = make_stream(plan.seed, fmt::format("partition/{}/{}", key.first, key.second));
    std::shuffle(rows.begin(), rows.end(), rng);
  }

  std::map<std::pair<DomainId, Label>, std::size_t> demand;
  std::set<ClientId> seen_ids;
  for (const auto& a : plan.clients) {
    if (!seen_ids.insert(a.id).second)
      throw PartitionError(fmt::format("client {} appears twice in the plan", a.id));
    if (a.domains.empty()) throw PartitionError(fmt::format("client {} has no domain", a.id));
    if (a.classes.empty()) throw PartitionError(fmt::format("client {} has no classes", a.id));
    if (std::set<Label>(a.classes.begin(), a.classes.end()).size() != a.classes.size())
      throw PartitionError(fmt::format("client {} lists a class twice", a.id));
    for (DomainId d : a.domains)
      if (!pool.contains(d))
        throw PartitionError(fmt::format("client {} assigned to unknown domain {}", a.id, d));
    for (Label c : a.classes)
      for (std::size_t j = 0; j < a.k_shot; ++j) ++demand[{a.domains[j % a.domains.size()], c}];
  }
  for (const auto& [key, need] : demand) {
    const auto it = available.find(key);
    const std::size_t have = it == available.end() ? 0 : it->second.size();
    if (have < need)
      throw PartitionError(fmt::format("class {} in domain {}: need {} samples, pool has {} "
                                       "(shortfall {})",
                                       key.second, key.first, need, have, need - have));
  }

  std::map<std::pair<DomainId, Label>, std::size_t> cursor;
  std::vector<ClientDataset> out;
  for (const auto& a : plan.clients) {
    const std::size_t dim = pool.at(a.domains.front()).feature_dim();
    const auto n_test = static_cast<std::size_t>(
        std::lround(static_cast<double>(a.k_shot) * plan.test_fraction));
    std::vector<std::pair<DomainId, std::size_t>> train_rows, test_rows;
    ClientDataset client;
    client.id = a.id;
    std::vector<Label> classes = a.classes;
    std::sort(classes.begin(), classes.end());
    for (Label c : classes) {
      for (std::size_t j = 0; j < a.k_shot; ++j) {
        const DomainId d = a.domains[j % a.domains.size()];
        const std::size_t row = available[{d, c}][cursor[{d, c}]++];
        // The last n_test draws of each class are held out.
        (j + n_test < a.k_shot ? train_rows : test_rows).emplace_back(d, row);
      }
      client.per_class_counts[c] = a.k_shot - n_test;
    }

    auto gather = [&](const std::vector<std::pair<DomainId, std::size_t>>& rows) {
      LabeledData data;
      data.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const LabeledData& src = pool.at(rows[i].first);
        if (src.feature_dim() != dim)
          throw PartitionError("domains in the pool disagree on feature dimension");
        const std::size_t r = rows[i].second;
        data.inputs.row(static_cast<Eigen::Index>(i)) = src.inputs.row(static_cast<Eigen::Index>(r));
        data.labels.push_back(src.labels[r]);
        data.domains.push_back(src.domains[r]);
        data.sample_ids.push_back(src.sample_ids[r]);
      }
      return data;
    };
    client.train = gather(train_rows);
    client.test = gather(test_rows);
    out.push_back(std::move(client));
  }
  return out;
}

}  // namespace pfpl
