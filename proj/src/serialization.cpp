// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/serialization.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pfpl/errors.hpp"

namespace pfpl {

namespace {

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Label label_from_key(const std::string& key) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(key, &used);
    if (used != key.size()) throw std::invalid_argument(key);
    return static_cast<Label>(v);
  } catch (const std::exception&) {
    throw DataError(fmt::format("class key '{}' is not an integer", key));
  }
}

}  // namespace

std::string format_double(double v) { return fmt::format("{}", v); }

Json to_json(const PrototypeSet& set, std::size_t round) {
  Json entries = Json::object();
  for (const auto& [label, entry] : set.entries)
    entries[std::to_string(label)] = {{"centroid", vector_to_json(entry.centroid)},
                                      {"count", entry.count}};
  return {{"client", set.owner}, {"round", round}, {"entries", std::move(entries)}};
}

PrototypeSet prototype_set_from_json(const Json& j) {
  PrototypeSet set;
  set.owner = j.at("client").get<ClientId>();
  for (const auto& [key, value] : j.at("entries").items())
    set.entries[label_from_key(key)] = {vector_from_json(value.at("centroid")),
                                        value.at("count").get<std::size_t>()};
  return set;
}

Json to_json(const PersonalizedTargets& targets, std::size_t round) {
  Json entries = Json::object();
  for (const auto& [label, v] : targets.entries) entries[std::to_string(label)] = vector_to_json(v);
  return {{"client", targets.owner}, {"round", round}, {"entries", std::move(entries)}};
}

PersonalizedTargets targets_from_json(const Json& j) {
  PersonalizedTargets t;
  t.owner = j.at("client").get<ClientId>();
  for (const auto& [key, value] : j.at("entries").items())
    t.entries[label_from_key(key)] = vector_from_json(value);
  return t;
}

Json to_json(const ServerState& server) {
  Json j = {{"round", server.round}, {"strategy", std::string(to_string(server.strategy))}};
  Json uploads = Json::array();
  for (const auto& u : server.uploads) uploads.push_back(to_json(u, server.round));
  j["uploads"] = std::move(uploads);
  Json targets = Json::array();
  for (const auto& [id, t] : server.targets) targets.push_back(to_json(t, server.round));
  j["targets"] = std::move(targets);
  if (server.global_parameters) j["global_parameters"] = *server.global_parameters;
  return j;
}

Json to_json(const ClientRoundMetrics& m, std::size_t round) {
  const auto& u = m.update;
  return {{"round", round},
          {"client", m.client},
          {"accuracy", m.accuracy},
          {"train_size", m.train_size},
          {"upload_params", m.upload_params},
          {"download_params", m.download_params},
          {"loss_s", u.loss_s},
          {"loss_r", u.loss_r},
          {"loss_total", u.loss_total},
          {"samples_seen", u.samples_seen},
          {"steps", u.steps},
          {"had_targets", u.had_targets},
          {"start_loss", u.start_loss},
          {"end_loss", u.end_loss},
          {"start_grad_norm", u.start_grad_norm},
          {"end_grad_norm", u.end_grad_norm},
          {"param_step_norm", u.param_step_norm},
          {"grad_change_norm", u.grad_change_norm},
          {"embedding_lipschitz", u.embedding_lipschitz},
          {"batch_grad_norms", u.batch_grad_norms}};
}

ClientRoundMetrics client_metrics_from_json(const Json& j) {
  ClientRoundMetrics m;
  m.client = j.at("client").get<ClientId>();
  m.accuracy = j.at("accuracy").get<double>();
  m.train_size = j.at("train_size").get<std::size_t>();
  m.upload_params = j.at("upload_params").get<std::size_t>();
  m.download_params = j.at("download_params").get<std::size_t>();
  auto& u = m.update;
  u.client = m.client;
  u.loss_s = j.at("loss_s").get<double>();
  u.loss_r = j.at("loss_r").get<double>();
  u.loss_total = j.at("loss_total").get<double>();
  u.samples_seen = j.at("samples_seen").get<std::size_t>();
  u.steps = j.at("steps").get<std::size_t>();
  u.had_targets = j.at("had_targets").get<bool>();
  u.start_loss = j.at("start_loss").get<double>();
  u.end_loss = j.at("end_loss").get<double>();
  u.start_grad_norm = j.at("start_grad_norm").get<double>();
  u.end_grad_norm = j.at("end_grad_norm").get<double>();
  u.param_step_norm = j.at("param_step_norm").get<double>();
  u.grad_change_norm = j.at("grad_change_norm").get<double>();
  u.embedding_lipschitz = j.at("embedding_lipschitz").get<double>();
  u.batch_grad_norms = j.at("batch_grad_norms").get<std::vector<double>>();
  return m;
}

std::string metrics_csv(const std::vector<RoundReport>& rounds) {
  std::string out = "round,client_id,acc,loss_s,loss_r,loss_total,upload_params,download_params\n";
  for (const auto& r : rounds)
    for (const auto& c : r.clients)
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.round, c.client, format_double(c.accuracy),
                         format_double(c.update.loss_s), format_double(c.update.loss_r),
                         format_double(c.update.loss_total), c.upload_params, c.download_params);
  return out;
}

Json summary_json(const ExperimentResult& result, const ExperimentConfig& config) {
  Json macro = Json::array(), loss_r = Json::array(), loss_total = Json::array(),
       objective = Json::array();
  for (const auto& r : result.rounds) {
    macro.push_back(r.macro_accuracy);
    double lr = 0.0, lt = 0.0;
    for (const auto& c : r.clients) {
      lr += c.update.loss_r;
      lt += c.update.loss_total;
    }
    const double n = r.clients.empty() ? 1.0 : static_cast<double>(r.clients.size());
    loss_r.push_back(lr / n);
    loss_total.push_back(lt / n);
    objective.push_back(r.objective);
  }
  Json finals = Json::object();
  for (const auto& [id, acc] : result.final_accuracy) finals[std::to_string(id)] = acc;

  const auto& d = result.diagnostics;
  Json diag_rounds = Json::array();
  for (const auto& rd : d.rounds) {
    Json entry = {{"round", rd.round},
                  {"lambda_exceeds_bound", rd.lambda_exceeds_bound},
                  {"theorem_bound_gap", rd.theorem_bound_gap}};
    // Infinite when L2 or G is estimated as zero; JSON has no infinity.
    entry["lambda_bound"] = std::isfinite(rd.lambda_bound) ? Json(rd.lambda_bound) : Json(nullptr);
    diag_rounds.push_back(std::move(entry));
  }

  return {{"strategy", std::string(to_string(config.strategy.kind))},
          {"rounds", config.rounds},
          {"clients", result.final_accuracy.size()},
          {"final_macro_accuracy", result.rounds.empty() ? 0.0 : result.rounds.back().macro_accuracy},
          {"macro_accuracy", std::move(macro)},
          {"mean_loss_r", std::move(loss_r)},
          {"mean_loss_total", std::move(loss_total)},
          {"objective", std::move(objective)},
          {"final_accuracy", std::move(finals)},
          {"payload",
           {{"upload_scalars", result.payload.upload_scalars},
            {"download_scalars", result.payload.download_scalars},
            {"upload_bytes", result.payload.upload_scalars * kBytesPerScalar},
            {"download_bytes", result.payload.download_scalars * kBytesPerScalar}}},
          {"diagnostics",
           {{"available", d.available},
            {"g_hat", d.g_hat},
            {"sigma_hat", d.sigma_hat},
            {"l1_hat", d.l1_hat},
            {"l2_hat", d.l2_hat},
            {"monotone_fraction", d.monotone_fraction},
            {"rounds", std::move(diag_rounds)}}}};
}

}  // namespace pfpl
