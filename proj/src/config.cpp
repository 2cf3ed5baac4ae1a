// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "pfpl/errors.hpp"

namespace pfpl {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError(fmt::format("{}: expected a finite number, got '{}'", key, text));
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, text));
  return v;
}

std::size_t to_size(const std::string& key, const std::string& text) {
  return static_cast<std::size_t>(to_u64(key, text));
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(to_size(key, item));
  return out;
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

template <typename T>
std::string join(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

struct KeyDef {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define PFPL_DOUBLE_KEY(name, field)                                                   \
  KeyDef {                                                                             \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(name, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.field); }                  \
  }
#define PFPL_SIZE_KEY(name, field)                                                   \
  KeyDef {                                                                           \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = to_size(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }            \
  }
#define PFPL_LIST_KEY(name, field)                                                         \
  KeyDef {                                                                                 \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = split_list(v); },      \
        [](const ExperimentConfig& c) { return join(c.field); }                            \
  }

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = {
      {"strategy",
       [](ExperimentConfig& c, const std::string& v) { c.strategy.kind = parse_strategy(trim(v)); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.strategy.kind)); }},
      PFPL_DOUBLE_KEY("alpha", strategy.alpha),
      PFPL_DOUBLE_KEY("lambda", strategy.lambda),
      {"weight_mode",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategy.weight_mode = parse_weight_mode(trim(v));
       },
       [](const ExperimentConfig& c) { return std::string(to_string(c.strategy.weight_mode)); }},
      {"model.hidden",
       [](ExperimentConfig& c, const std::string& v) { c.hidden = to_size_list("model.hidden", v); },
       [](const ExperimentConfig& c) { return join(c.hidden); }},
      PFPL_SIZE_KEY("model.embedding_dim", embedding_dim),
      {"data.source",
       [](ExperimentConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t == "synthetic")
           c.source = DataSource::synthetic;
         else if (t == "idx")
           c.source = DataSource::idx;
         else if (t == "csv")
           c.source = DataSource::csv;
         else
           throw ConfigError(fmt::format("data.source: unknown source '{}' (synthetic | idx | csv)", t));
       },
       [](const ExperimentConfig& c) {
         return std::string(c.source == DataSource::synthetic ? "synthetic"
                            : c.source == DataSource::idx     ? "idx"
                                                              : "csv");
       }},
      PFPL_SIZE_KEY("data.input_dim", input_dim),
      PFPL_SIZE_KEY("data.num_classes", num_classes),
      PFPL_SIZE_KEY("data.num_domains", num_domains),
      PFPL_SIZE_KEY("data.samples_per_class", samples_per_class),
      PFPL_DOUBLE_KEY("data.class_spread", class_spread),
      PFPL_DOUBLE_KEY("data.rotation_step", shift.rotation_step),
      PFPL_DOUBLE_KEY("data.scale_jitter", shift.scale_jitter),
      PFPL_DOUBLE_KEY("data.offset_std", shift.offset_std),
      PFPL_DOUBLE_KEY("data.noise_std", shift.noise_std),
      PFPL_LIST_KEY("data.idx.images", idx_images),
      PFPL_LIST_KEY("data.idx.labels", idx_labels),
      PFPL_LIST_KEY("data.csv.paths", csv_paths),
      PFPL_SIZE_KEY("partition.clients", clients),
      {"partition.n",
       [](ExperimentConfig& c, const std::string& v) { c.n_choices = to_size_list("partition.n", v); },
       [](const ExperimentConfig& c) { return join(c.n_choices); }},
      PFPL_SIZE_KEY("partition.k_min", k_min),
      PFPL_SIZE_KEY("partition.k_max", k_max),
      PFPL_SIZE_KEY("partition.domains_per_client", domains_per_client),
      {"partition.domain_assignment",
       [](ExperimentConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t == "round_robin")
           c.domain_assignment = DomainAssignment::round_robin;
         else if (t == "random")
           c.domain_assignment = DomainAssignment::random;
         else
           throw ConfigError(fmt::format(
               "partition.domain_assignment: unknown value '{}' (round_robin | random)", t));
       },
       [](const ExperimentConfig& c) {
         return std::string(c.domain_assignment == DomainAssignment::round_robin ? "round_robin"
                                                                                 : "random");
       }},
      PFPL_DOUBLE_KEY("partition.test_fraction", test_fraction),
      PFPL_DOUBLE_KEY("optimizer.eta", eta),
      PFPL_DOUBLE_KEY("optimizer.momentum", momentum),
      PFPL_DOUBLE_KEY("optimizer.weight_decay", weight_decay),
      PFPL_SIZE_KEY("optimizer.batch_size", batch_size),
      PFPL_SIZE_KEY("rounds", rounds),
      PFPL_SIZE_KEY("local_epochs", local_epochs),
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = trim(v); },
       [](const ExperimentConfig& c) { return c.output_dir; }},
  };
  return keys;
}

#undef PFPL_DOUBLE_KEY
#undef PFPL_SIZE_KEY
#undef PFPL_LIST_KEY

const KeyDef& find_key(const std::string& key) {
  for (const auto& def : registry())
    if (def.name == key) return def;
  throw ConfigError(fmt::format("unknown key '{}'", key));
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& def : registry()) out.push_back(def.name);
    return out;
  }();
  return names;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  find_key(key).set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, const std::string& key) {
  return find_key(key).get(config);
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& constraint) {
    if (!ok) throw ConfigError(fmt::format("{}: {}", key, constraint));
  };
  require(strategy.alpha >= 0.0 && strategy.alpha <= 1.0, "alpha",
          fmt::format("value {} violates constraint alpha in [0,1]", strategy.alpha));
  require(strategy.lambda >= 0.0, "lambda",
          fmt::format("value {} violates constraint lambda >= 0", strategy.lambda));
  for (std::size_t h : hidden) require(h > 0, "model.hidden", "hidden widths must be positive");
  require(embedding_dim > 0, "model.embedding_dim", "must be positive");
  require(num_classes >= 2, "data.num_classes", "must be >= 2");
  require(class_spread > 0.0, "data.class_spread", "must be > 0");
  require(shift.noise_std >= 0.0, "data.noise_std", "must be >= 0");
  require(shift.scale_jitter >= 0.0 && shift.scale_jitter < 1.0, "data.scale_jitter",
          "must be in [0,1) so scales stay nonzero");
  require(shift.offset_std >= 0.0, "data.offset_std", "must be >= 0");
  switch (source) {
    case DataSource::synthetic:
      require(input_dim > 0, "data.input_dim", "must be positive");
      require(num_domains > 0, "data.num_domains", "must be positive");
      require(samples_per_class > 0, "data.samples_per_class", "must be positive");
      break;
    case DataSource::idx:
      require(!idx_images.empty(), "data.idx.images", "at least one image file is required");
      require(idx_images.size() == idx_labels.size(), "data.idx.labels",
              "must list one label file per image file");
      break;
    case DataSource::csv:
      require(!csv_paths.empty(), "data.csv.paths", "at least one CSV file is required");
      break;
  }
  require(clients > 0, "partition.clients", "must be positive");
  require(!n_choices.empty(), "partition.n", "must list at least one value");
  for (std::size_t n : n_choices)
    require(n >= 1 && n <= num_classes, "partition.n",
            fmt::format("value {} outside [1, data.num_classes = {}]", n, num_classes));
  require(k_min >= 1, "partition.k_min", "must be >= 1");
  require(k_max >= k_min, "partition.k_max", "must be >= partition.k_min");
  require(domains_per_client >= 1, "partition.domains_per_client", "must be >= 1");
  if (source == DataSource::synthetic)
    require(domains_per_client <= num_domains, "partition.domains_per_client",
            "must not exceed data.num_domains");
  require(test_fraction >= 0.0 && test_fraction < 1.0, "partition.test_fraction",
          "must be in [0,1)");
  require(std::lround(static_cast<double>(k_min) * test_fraction) >= 1, "partition.test_fraction",
          "every client needs at least one test sample per class (k_min * test_fraction >= 0.5)");
  require(eta > 0.0, "optimizer.eta", "must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "optimizer.momentum", "must be in [0,1)");
  require(weight_decay >= 0.0, "optimizer.weight_decay", "must be >= 0");
  require(batch_size >= 1, "optimizer.batch_size", "must be >= 1");
  require(local_epochs >= 1, "local_epochs", "must be >= 1");
  require(!output_dir.empty(), "output_dir", "must not be empty");
}

PlanSpec ExperimentConfig::plan_spec() const {
  PlanSpec s;
  s.num_clients = clients;
  s.num_classes = num_classes;
  s.num_domains = num_domains;
  s.n_choices = n_choices;
  s.k_min = k_min;
  s.k_max = k_max;
  s.domains_per_client = domains_per_client;
  s.assignment = domain_assignment;
  s.test_fraction = test_fraction;
  return s;
}

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues out;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}: invalid JSON: {}", origin, e.what()));
    }
    if (!j.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", origin));
    for (const auto& [key, value] : j.items()) {
      std::string v;
      if (value.is_string()) {
        v = value.get<std::string>();
      } else if (value.is_number() || value.is_boolean()) {
        v = value.dump();
      } else if (value.is_array()) {
        std::vector<std::string> parts;
        for (const auto& item : value)
          parts.push_back(item.is_string() ? item.get<std::string>() : item.dump());
        v = join(parts);
      } else {
        throw ConfigError(fmt::format("{}: key '{}' has an unsupported value type", origin, key));
      }
      out.emplace_back(key, v);
    }
    return out;
  }

  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, line_no));
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig resolve_config(const std::filesystem::path* file, const KeyValues& overrides) {
  ExperimentConfig config;
  if (file != nullptr) {
    std::ifstream in(*file);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", file->string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(buffer.str(), file->string()))
      set_config_value(config, k, v);
  }
  for (const auto& [k, v] : overrides) set_config_value(config, k, v);
  config.validate();
  return config;
}

std::string config_to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& def : registry()) j[def.name] = def.get(config);
  return j.dump(2) + "\n";
}

}  // namespace pfpl
