// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <string>

#include "pfpl/config.hpp"
#include "pfpl/errors.hpp"
#include "temp_dir.hpp"

using namespace pfpl;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string config_error(const fs::path* file, const KeyValues& overrides) {
  try {
    resolve_config(file, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults follow the desk-scale benchmark") {
  const ExperimentConfig c = resolve_config(nullptr, {});
  CHECK(c.strategy.kind == StrategyKind::pfpl);
  CHECK(c.strategy.alpha == 0.5);
  CHECK(c.strategy.lambda == 1.0);
  CHECK(c.strategy.weight_mode == WeightMode::similarity);
  CHECK(c.eta == 0.01);
  CHECK(c.momentum == 0.9);
  CHECK(c.weight_decay == 1e-5);
  CHECK(c.batch_size == 4);
  CHECK(c.clients == 8);
  CHECK(c.num_classes == 6);
  CHECK(c.num_domains == 2);
  CHECK(c.n_choices == std::vector<std::size_t>{3});
  CHECK(c.k_min == 50);
  CHECK(c.k_max == 50);
  CHECK(c.rounds == 30);
  CHECK(c.local_epochs == 1);
  CHECK(c.embedding_dim == 32);
}

TEST_CASE("empty config file resolves to the defaults") {
  testing::TempDir dir;
  const auto empty = write_file(dir.path, "empty.conf", "");
  const auto comments = write_file(dir.path, "comments.conf", "# nothing here\n\n   # still nothing\n");
  const std::string defaults = config_to_json(resolve_config(nullptr, {}));
  CHECK(config_to_json(resolve_config(&empty, {})) == defaults);
  CHECK(config_to_json(resolve_config(&comments, {})) == defaults);
}

TEST_CASE("alpha outside [0,1] names the key and the constraint") {
  const std::string msg = config_error(nullptr, {{"alpha", "1.5"}});
  CHECK(msg.find("alpha") != std::string::npos);
  CHECK(msg.find("[0,1]") != std::string::npos);
}

TEST_CASE("flags override the file, which overrides the defaults") {
  testing::TempDir dir;
  const auto file = write_file(dir.path, "run.conf", "lambda = 1\nrounds = 7  # short\nstrategy = global_proto\n");
  const auto c = resolve_config(&file, {{"lambda", "2"}});
  CHECK(c.strategy.lambda == 2.0);
  CHECK(c.rounds == 7);
  CHECK(c.strategy.kind == StrategyKind::global_proto);
}

TEST_CASE("flat JSON config files") {
  testing::TempDir dir;
  const auto file = write_file(dir.path, "run.json",
                               R"({"alpha": 0.3, "partition.n": "3,4,5", "rounds": 4, "data.source": "synthetic"})");
  const auto c = resolve_config(&file, {});
  CHECK(c.strategy.alpha == 0.3);
  CHECK(c.n_choices == std::vector<std::size_t>{3, 4, 5});
  CHECK(c.rounds == 4);
  const auto nested = write_file(dir.path, "nested.json", R"({"model": {"hidden": 3}})");
  CHECK_THROWS_AS(resolve_config(&nested, {}), ConfigError);
}

TEST_CASE("unknown keys, type errors and constraint violations") {
  CHECK(config_error(nullptr, {{"learning_rate", "0.1"}}).find("learning_rate") != std::string::npos);
  CHECK(config_error(nullptr, {{"rounds", "ten"}}).find("rounds") != std::string::npos);
  CHECK(config_error(nullptr, {{"optimizer.eta", "-1"}}).find("optimizer.eta") != std::string::npos);
  CHECK(config_error(nullptr, {{"optimizer.momentum", "1"}}).find("optimizer.momentum") != std::string::npos);
  CHECK(config_error(nullptr, {{"lambda", "-0.5"}}).find("lambda") != std::string::npos);
  CHECK(config_error(nullptr, {{"strategy", "fedprox"}}).find("strategy") != std::string::npos);
  CHECK(config_error(nullptr, {{"partition.k_min", "60"}, {"partition.k_max", "40"}}).find("partition.k") !=
        std::string::npos);
  CHECK(config_error(nullptr, {{"partition.n", "7"}}).find("partition.n") != std::string::npos);
  CHECK_FALSE(config_error(nullptr, {{"data.source", "idx"}}).empty());

  testing::TempDir dir;
  const auto bad = write_file(dir.path, "bad.conf", "alpha 0.5\n");
  CHECK_THROWS_AS(resolve_config(&bad, {}), ConfigError);
  const fs::path missing = dir.path / "missing.conf";
  CHECK_THROWS_AS(resolve_config(&missing, {}), ConfigError);
}

TEST_CASE("resolved config echo is itself a config reproducing the run") {
  testing::TempDir dir;
  const auto c = resolve_config(nullptr, {{"alpha", "0.3"},
                                          {"lambda", "0.1"},
                                          {"partition.n", "3,4"},
                                          {"partition.k_min", "20"},
                                          {"partition.k_max", "40"},
                                          {"data.rotation_step", "0.1"},
                                          {"model.hidden", "32,16"},
                                          {"seed", "18446744073709551615"}});
  const std::string echo = config_to_json(c);
  const auto file = write_file(dir.path, "resolved-config.json", echo);
  const auto again = resolve_config(&file, {});
  CHECK(config_to_json(again) == echo);
  CHECK(again.seed == 18446744073709551615ULL);
  CHECK(again.hidden == std::vector<std::size_t>{32, 16});
  CHECK(again.shift.rotation_step == 0.1);
}

TEST_CASE("every key round-trips through its text form") {
  ExperimentConfig c;
  for (const auto& key : config_keys()) {
    const std::string v = get_config_value(c, key);
    ExperimentConfig copy = c;
    set_config_value(copy, key, v);
    CHECK(get_config_value(copy, key) == v);
  }
  const std::string echo = config_to_json(c);
  for (const auto& key : config_keys()) CHECK(echo.find("\"" + key + "\"") != std::string::npos);
}
