// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/runner.hpp"

#include <algorithm>
#include <cctype>
#include <atomic>
#include <exception>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pfpl/errors.hpp"
#include "pfpl/serialization.hpp"

namespace fs = std::filesystem;

namespace pfpl {

namespace {

constexpr const char* kRunArtifacts[] = {"resolved-config.json", "rounds", "metrics.csv",
                                         "summary.json"};
constexpr const char* kSweepArtifacts[] = {"points", "comparison.csv", "final.csv", "grid.json"};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string(), "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool non_empty_dir(const fs::path& dir) {
  return fs::exists(dir) && fs::is_directory(dir) && !fs::is_empty(dir);
}

template <std::size_t N>
void prepare_dir(const fs::path& dir, bool force, const char* const (&artifacts)[N]) {
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw ConfigError(fmt::format("output_dir: {} exists and is not a directory", dir.string()));
  if (non_empty_dir(dir)) {
    if (!force)
      throw ConfigError(fmt::format(
          "output_dir: {} is not empty; pass --force to overwrite its artifacts", dir.string()));
    for (const char* name : artifacts) fs::remove_all(dir / name);
  }
  fs::create_directories(dir);
}

std::string round_dir_name(std::size_t round) { return fmt::format("round-{:04d}", round); }

void write_round(const fs::path& run_dir, const RoundReport& report, const FederationState& state,
                 StrategyKind strategy) {
  const fs::path dir = run_dir / "rounds" / round_dir_name(report.round);
  fs::create_directories(dir);

  std::string uploads, targets, reports;
  if (report.round > 0) {
    if (strategy == StrategyKind::fedavg) {
      for (const auto& c : report.clients)
        uploads += Json{{"client", c.client},
                        {"round", report.round},
                        {"kind", "parameters"},
                        {"scalars", c.upload_params}}
                       .dump() +
                   "\n";
    } else {
      for (const auto& u : state.server.uploads) uploads += to_json(u, report.round).dump() + "\n";
    }
    for (const auto& [id, t] : state.server.targets) targets += to_json(t, report.round).dump() + "\n";
  }
  for (const auto& c : report.clients) reports += to_json(c, report.round).dump() + "\n";

  write_file(dir / "uploads.jsonl", uploads);
  write_file(dir / "targets.jsonl", targets);
  write_file(dir / "reports.jsonl", reports);
  ServerState server = state.server;
  server.round = report.round;
  write_file(dir / "server.json", to_json(server).dump() + "\n");
}

void write_outputs(const fs::path& run_dir, const ExperimentResult& result,
                   const ExperimentConfig& config) {
  write_file(run_dir / "metrics.csv", metrics_csv(result.rounds));
  write_file(run_dir / "summary.json", summary_json(result, config).dump(2) + "\n");
}

std::string canonical_key(const std::string& key) {
  if (key == "n" || key == "partition.n") return "n";
  if (key == "k" || key == "partition.k") return "k";
  for (const char* k : {"alpha", "lambda", "strategy", "weight_mode", "seed"})
    if (key == k) return key;
  throw ConfigError(fmt::format(
      "sweep: key '{}' is not sweepable (alpha, lambda, strategy, n, k, weight_mode, seed)", key));
}

void apply_assignment(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key == "n") {
    set_config_value(config, "partition.n", value);
  } else if (key == "k") {
    set_config_value(config, "partition.k_min", value);
    set_config_value(config, "partition.k_max", value);
  } else {
    set_config_value(config, key, value);
  }
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' ||
          c == '='))
      c = '_';
  return s;
}

}  // namespace

ExperimentResult run_to_directory(const ExperimentConfig& config, bool force) {
  config.validate();
  const fs::path dir = config.output_dir;
  if (non_empty_dir(dir) && !force)
    throw ConfigError(fmt::format(
        "output_dir: {} is not empty; pass --force to overwrite its artifacts", dir.string()));
  PreparedExperiment prepared = prepare_experiment(config);

  prepare_dir(dir, force, kRunArtifacts);
  write_file(dir / "resolved-config.json", config_to_json(config));
  const StrategyKind strategy = config.strategy.kind;
  ExperimentResult result = run_experiment(
      std::move(prepared), [&](const RoundReport& report, const FederationState& state) {
        write_round(dir, report, state, strategy);
      });
  write_outputs(dir, result, config);
  return result;
}

std::vector<RoundReport> load_round_reports(const fs::path& run_dir) {
  const fs::path rounds_dir = run_dir / "rounds";
  if (!fs::is_directory(rounds_dir))
    throw IngestionError(rounds_dir.string(), "missing rounds directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(rounds_dir))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  std::vector<RoundReport> rounds;
  for (const auto& d : dirs) {
    RoundReport report;
    std::stringstream lines(read_file(d / "reports.jsonl"));
    std::string line;
    bool first = true;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw IngestionError((d / "reports.jsonl").string(), e.what());
      }
      if (first) report.round = j.at("round").get<std::size_t>();
      first = false;
      report.clients.push_back(client_metrics_from_json(j));
    }
    report.macro_accuracy = macro_average(report.clients);
    rounds.push_back(std::move(report));
  }
  return rounds;
}

ExperimentResult report_directory(const fs::path& run_dir) {
  const fs::path config_path = run_dir / "resolved-config.json";
  const ExperimentConfig config = resolve_config(&config_path, {});
  std::vector<RoundReport> rounds = load_round_reports(run_dir);
  for (auto& r : rounds)
    r.objective = federated_objective(r.clients, config.strategy.effective_lambda());
  ExperimentResult result = summarize(std::move(rounds), config);
  write_outputs(run_dir, result, config);
  return result;
}

std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs) {
  std::vector<GridAxis> axes;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError(fmt::format("sweep: grid spec '{}' must look like key=v1,v2", spec));
    GridAxis axis;
    axis.key = canonical_key(spec.substr(0, eq));
    std::stringstream ss(spec.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ','))
      if (!v.empty()) axis.values.push_back(v);
    if (axis.values.empty())
      throw ConfigError(fmt::format("sweep: grid axis '{}' has no values", axis.key));
    for (const auto& other : axes)
      if (other.key == axis.key)
        throw ConfigError(fmt::format("sweep: grid axis '{}' given twice", axis.key));
    axes.push_back(std::move(axis));
  }
  return axes;
}

std::vector<SweepPoint> expand_grid(const ExperimentConfig& base, const std::vector<GridAxis>& axes,
                                    const fs::path& root) {
  std::vector<SweepPoint> points;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    SweepPoint p;
    p.config = base;
    std::vector<std::string> parts;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& value = axes[a].values[index[a]];
      apply_assignment(p.config, axes[a].key, value);
      p.assignment.emplace_back(axes[a].key, value);
      parts.push_back(axes[a].key + "=" + value);
    }
    p.name = parts.empty() ? "base" : sanitize(fmt::format("{}", fmt::join(parts, "__")));
    p.config.output_dir = (root / "points" / p.name).string();
    p.config.validate();
    points.push_back(std::move(p));

    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++index[a] < axes[a].values.size()) break;
      index[a] = 0;
      if (a == 0) return points;
    }
    if (axes.empty()) return points;
  }
}

SweepResult run_sweep(const ExperimentConfig& base, const std::vector<GridAxis>& axes,
                      const fs::path& root, bool force, std::size_t jobs) {
  SweepResult sweep;
  sweep.points = expand_grid(base, axes, root);
  if (non_empty_dir(root) && !force)
    throw ConfigError(fmt::format(
        "output_dir: {} is not empty; pass --force to overwrite its artifacts", root.string()));
  std::vector<PreparedExperiment> prepared;
  for (const auto& p : sweep.points) prepared.push_back(prepare_experiment(p.config));
  prepare_dir(root, force, kSweepArtifacts);

  Json grid = Json::object();
  for (const auto& axis : axes) grid[axis.key] = axis.values;
  write_file(root / "grid.json", grid.dump(2) + "\n");

  sweep.results.resize(sweep.points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < sweep.points.size(); i = next++) {
      try {
        const auto& config = sweep.points[i].config;
        const fs::path dir = config.output_dir;
        prepare_dir(dir, true, kRunArtifacts);
        write_file(dir / "resolved-config.json", config_to_json(config));
        const StrategyKind strategy = config.strategy.kind;
        sweep.results[i] = run_experiment(
            std::move(prepared[i]), [&](const RoundReport& report, const FederationState& state) {
              write_round(dir, report, state, strategy);
            });
        write_outputs(dir, sweep.results[i], config);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, sweep.points.size()));
  std::vector<std::future<void>> futures;
  for (std::size_t w = 1; w < workers; ++w) futures.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : futures) f.get();
  if (failure) std::rethrow_exception(failure);

  std::string header = "point";
  for (const auto& axis : axes) header += "," + axis.key;
  std::string comparison = header +
                           ",round,macro_acc,mean_loss_s,mean_loss_r,mean_loss_total,"
                           "upload_params,download_params\n";
  std::string final_rows = header + ",final_macro_acc,final_mean_loss_r,monotone_fraction,"
                                    "upload_params_per_round\n";
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    std::string prefix = sweep.points[i].name;
    for (const auto& [key, value] : sweep.points[i].assignment) prefix += "," + value;
    const auto& result = sweep.results[i];
    for (const auto& r : result.rounds) {
      double ls = 0.0, lr = 0.0, lt = 0.0;
      std::size_t up = 0, down = 0;
      for (const auto& c : r.clients) {
        ls += c.update.loss_s;
        lr += c.update.loss_r;
        lt += c.update.loss_total;
        up += c.upload_params;
        down += c.download_params;
      }
      const double n = static_cast<double>(std::max<std::size_t>(1, r.clients.size()));
      comparison += fmt::format("{},{},{},{},{},{},{},{}\n", prefix, r.round,
                                format_double(r.macro_accuracy), format_double(ls / n),
                                format_double(lr / n), format_double(lt / n), up, down);
    }
    const auto& last = result.rounds.back();
    double lr = 0.0;
    std::size_t up = 0;
    for (const auto& c : last.clients) {
      lr += c.update.loss_r;
      up += c.upload_params;
    }
    final_rows += fmt::format(
        "{},{},{},{},{}\n", prefix, format_double(last.macro_accuracy),
        format_double(lr / static_cast<double>(std::max<std::size_t>(1, last.clients.size()))),
        format_double(result.diagnostics.monotone_fraction), up);
  }
  write_file(root / "comparison.csv", comparison);
  write_file(root / "final.csv", final_rows);
  return sweep;
}

}  // namespace pfpl
