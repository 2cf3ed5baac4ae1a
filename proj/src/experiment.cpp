// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/experiment.hpp"

#include <fmt/format.h>

#include "pfpl/errors.hpp"
#include "pfpl/rng.hpp"

namespace pfpl {

std::map<DomainId, LabeledData> build_pool(const ExperimentConfig& config) {
  std::map<DomainId, LabeledData> pool;
  switch (config.source) {
    case DataSource::synthetic: {
      const auto specs = default_domains(config.num_domains, config.input_dim, config.shift,
                                         derive_seed(config.seed, "domains"));
      for (const auto& spec : specs)
        pool[spec.id] = make_synthetic_domain(spec, config.num_classes,
                                              derive_seed(config.seed, "data"),
                                              config.samples_per_class, config.class_spread);
      break;
    }
    case DataSource::idx:
      for (std::size_t i = 0; i < config.idx_images.size(); ++i)
        pool[static_cast<DomainId>(i)] =
            load_idx(config.idx_images[i], config.idx_labels[i], static_cast<DomainId>(i));
      break;
    case DataSource::csv: {
      std::map<DomainId, std::vector<std::pair<const LabeledData*, std::size_t>>> rows;
      std::vector<LabeledData> files;
      files.reserve(config.csv_paths.size());
      for (const auto& path : config.csv_paths) files.push_back(load_csv(path));
      for (std::size_t f = 0; f < files.size(); ++f)
        for (std::size_t r = 0; r < files[f].size(); ++r) {
          if (files[f].feature_dim() != files.front().feature_dim())
            throw IngestionError(config.csv_paths[f], "feature count differs from first CSV");
          rows[files[f].domains[r]].emplace_back(&files[f], r);
          files[f].sample_ids[r] = (static_cast<std::uint64_t>(f) << 40) | r;
        }
      for (const auto& [domain, list] : rows) {
        LabeledData d;
        d.inputs.resize(static_cast<Eigen::Index>(list.size()),
                        static_cast<Eigen::Index>(files.front().feature_dim()));
        for (std::size_t i = 0; i < list.size(); ++i) {
          const auto& [src, r] = list[i];
          d.inputs.row(static_cast<Eigen::Index>(i)) = src->inputs.row(static_cast<Eigen::Index>(r));
          d.labels.push_back(src->labels[r]);
          d.domains.push_back(domain);
          d.sample_ids.push_back(src->sample_ids[r]);
        }
        pool[domain] = std::move(d);
      }
      break;
    }
  }
  for (const auto& [domain, data] : pool) {
    if (data.empty()) throw DataError(fmt::format("domain {} has no samples", domain));
    for (Label y : data.labels)
      if (y < 0 || static_cast<std::size_t>(y) >= config.num_classes)
        throw DataError(fmt::format("domain {}: label {} outside [0, data.num_classes = {})",
                                    domain, y, config.num_classes));
  }
  return pool;
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  auto pool = build_pool(config);

  PlanSpec spec = config.plan_spec();
  spec.num_domains = pool.size();
  if (spec.domains_per_client > spec.num_domains)
    throw ConfigError(fmt::format("partition.domains_per_client: {} exceeds the {} available domains",
                                  spec.domains_per_client, spec.num_domains));
  PartitionPlan plan = draw_plan(spec, derive_seed(config.seed, "partition"));
  std::vector<DomainId> domain_ids;
  for (const auto& [id, data] : pool) domain_ids.push_back(id);
  for (auto& client : plan.clients)
    for (auto& d : client.domains) d = domain_ids.at(static_cast<std::size_t>(d));
  auto datasets = partition(pool, plan);

  const std::size_t input_dim = pool.begin()->second.feature_dim();
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.embedding_dim);
  const Model initial = init_model(dims, config.embedding_dim, config.num_classes,
                                   derive_seed(config.seed, "model-init"));

  PreparedExperiment prepared;
  prepared.config = config;
  prepared.state = init_federation(std::move(datasets), initial, config.eta, config.momentum,
                                   config.weight_decay, derive_seed(config.seed, "training"));
  return prepared;
}

RoundReport evaluate_round(const FederationState& state, std::size_t round) {
  RoundReport report;
  report.round = round;
  for (const auto& c : state.clients) {
    ClientRoundMetrics m;
    m.client = c.id;
    m.accuracy = evaluate(c.model, c.data.test);
    m.train_size = c.data.train.size();
    m.update.client = c.id;
    report.clients.push_back(std::move(m));
  }
  report.macro_accuracy = macro_average(report.clients);
  return report;
}

ExperimentResult summarize(std::vector<RoundReport> rounds, const ExperimentConfig& config) {
  ExperimentResult result;
  for (const auto& r : rounds)
    for (const auto& c : r.clients) {
      result.payload.upload_scalars += c.upload_params;
      result.payload.download_scalars += c.download_params;
    }
  if (!rounds.empty())
    for (const auto& c : rounds.back().clients) result.final_accuracy[c.client] = c.accuracy;
  result.diagnostics =
      convergence_diag(rounds, {config.strategy.effective_lambda(), config.eta});
  result.rounds = std::move(rounds);
  return result;
}

ExperimentResult run_experiment(PreparedExperiment prepared, const RoundObserver& observer) {
  const ExperimentConfig& config = prepared.config;
  FederationState& state = prepared.state;
  state.server.strategy = config.strategy.kind;
  std::vector<RoundReport> rounds;

  // Round 0: the untrained shared model, with its full-data training loss.
  {
    RoundReport r0 = evaluate_round(state, 0);
    for (std::size_t i = 0; i < state.clients.size(); ++i) {
      const auto& c = state.clients[i];
      const CompositeLoss l = composite_loss(c.model, c.data.train.all(), {}, 0.0);
      auto& u = r0.clients[i].update;
      u.loss_s = u.loss_total = u.start_loss = u.end_loss = l.loss_s;
      u.start_grad_norm = u.end_grad_norm = l.grads.norm();
    }
    r0.objective = federated_objective(r0.clients, config.strategy.effective_lambda());
    if (observer) observer(r0, state);
    rounds.push_back(std::move(r0));
  }

  for (std::size_t t = 1; t <= config.rounds; ++t) {
    RoundOutcome outcome = run_round(state, config.strategy, config.training());
    RoundReport report = evaluate_round(state, outcome.round);
    for (std::size_t i = 0; i < report.clients.size(); ++i) {
      auto& m = report.clients[i];
      m.update = std::move(outcome.reports[i]);
      m.update.prototypes = {};
      m.upload_params = outcome.payloads.at(m.client).upload_scalars;
      m.download_params = outcome.payloads.at(m.client).download_scalars;
    }
    report.objective = federated_objective(report.clients, config.strategy.effective_lambda());
    if (observer) observer(report, state);
    rounds.push_back(std::move(report));
  }
  return summarize(std::move(rounds), config);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RoundObserver& observer) {
  return run_experiment(prepare_experiment(config), observer);
}

}  // namespace pfpl
