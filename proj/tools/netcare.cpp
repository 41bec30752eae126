#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "netcare/config.hpp"
#include "netcare/pipeline.hpp"

namespace {

// Exit status per failure class.
enum Exit : int { ok = 0, unexpected = 1, config = 2, io = 3, data = 4, budget = 5, artifact = 6 };

int exit_code(netcare::ErrorKind k) {
  switch (k) {
    case netcare::ErrorKind::config: return Exit::config;
    case netcare::ErrorKind::io: return Exit::io;
    case netcare::ErrorKind::data: return Exit::data;
    case netcare::ErrorKind::budget: return Exit::budget;
    case netcare::ErrorKind::artifact: return Exit::artifact;
  }
  return Exit::unexpected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netcare: social-structure and wearable-behavior analytics pipeline"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--threads", threads, "worker threads for graph metrics and model fitting")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--threshold", threshold, "correlation threshold for the censuses (overrides the config)");

  std::string chosen;
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "generate a synthetic cohort (comm, wearable, survey files)"},
      {"ingest", "parse raw files, build study weeks and compliance"},
      {"graph", "filter edges and compute weekly network metrics"},
      {"features", "weekly behavior features and model matrices"},
      {"analyze", "correlations, censuses and group tests"},
      {"train", "classifiers, tuning and ensemble evaluation"},
      {"report", "tables, box-plot series and run manifest"},
      {"all", "run every stage in order"},
  };
  for (auto [name, help] : commands) {
    app.add_subcommand(name, help)->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Exit::ok : Exit::config;
  }

  try {
    netcare::ConfigOverrides ov;
    if (out) ov.out = *out;
    ov.threads = threads;
    ov.seed = seed;
    ov.threshold = threshold;
    netcare::Pipeline pipeline(netcare::load_config(config_path, ov));
    if (chosen == "all") {
      pipeline.run_all();
    } else {
      pipeline.run(netcare::parse_stage(chosen));
    }
  } catch (const netcare::Error& e) {
    std::cerr << "netcare: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "netcare: unexpected failure: " << e.what() << '\n';
    return Exit::unexpected;
  }
  return Exit::ok;
}
