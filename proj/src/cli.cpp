// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include "pfpl/cli.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pfpl/config.hpp"
#include "pfpl/errors.hpp"
#include "pfpl/runner.hpp"

namespace pfpl {

namespace {

// Turns leftover `--key=value` / `--key value` arguments into overrides.
KeyValues overrides_from(const std::vector<std::string>& extras) {
  KeyValues out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0)
      throw ConfigError(fmt::format("unexpected argument '{}'", arg));
    const std::string body = arg.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(body, extras[++i]);
    } else {
      throw ConfigError(fmt::format("{}: missing value", body));
    }
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized federated prototype learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool force = false;
  std::vector<std::string> grid;
  std::size_t jobs = 1;
  std::string report_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Config file (key = value lines or flat JSON)");
    cmd->allow_extras();
  };
  CLI::App* validate = app.add_subcommand("validate", "Resolve and check a config");
  add_common(validate);
  CLI::App* run = app.add_subcommand("run", "Run one experiment into an artifact tree");
  add_common(run);
  run->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");
  run->add_flag("-f,--force", force, "Overwrite artifacts in a non-empty output directory");
  CLI::App* sweep = app.add_subcommand("sweep", "Run the cartesian product of a grid");
  add_common(sweep);
  sweep->add_option("-o,--out", out_dir, "Sweep root directory (overrides output_dir)");
  sweep->add_flag("-f,--force", force, "Overwrite artifacts in a non-empty output directory");
  sweep->add_option("-g,--grid", grid, "Grid axis key=v1,v2,... (repeatable)")->required();
  sweep->add_option("-j,--jobs", jobs, "Grid points run concurrently")->check(CLI::PositiveNumber);
  CLI::App* report = app.add_subcommand("report", "Regenerate metrics.csv and summary.json");
  report->add_option("dir", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (report->parsed()) {
      const auto result = report_directory(report_dir);
      out << fmt::format("regenerated {} rounds in {}\n", result.rounds.size(), report_dir);
      return kExitOk;
    }

    CLI::App* active = validate->parsed() ? validate : run->parsed() ? run : sweep;
    KeyValues overrides = overrides_from(active->remaining());
    if (!out_dir.empty()) overrides.emplace_back("output_dir", out_dir);
    const std::filesystem::path file(config_path);
    const ExperimentConfig config = resolve_config(config_path.empty() ? nullptr : &file, overrides);

    if (validate->parsed()) {
      out << config_to_json(config);
      return kExitOk;
    }
    if (run->parsed()) {
      const auto result = run_to_directory(config, force);
      out << fmt::format("{}: {} rounds, final macro accuracy {:.4f} -> {}\n",
                         to_string(config.strategy.kind), config.rounds,
                         result.rounds.back().macro_accuracy, config.output_dir);
      return kExitOk;
    }
    const auto axes = parse_grid(grid);
    const auto result = run_sweep(config, axes, config.output_dir, force, jobs);
    for (std::size_t i = 0; i < result.points.size(); ++i)
      out << fmt::format("{}: final macro accuracy {:.4f}\n", result.points[i].name,
                         result.results[i].rounds.back().macro_accuracy);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PartitionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IngestionError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace pfpl
