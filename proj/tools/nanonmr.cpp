#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include "nanonmr/cli.hpp"
#include "nanonmr/errors.hpp"

namespace cli = nanonmr::cli;

int main(int argc, char** argv) {
  CLI::App app{"Confined nano-NMR: analytic correlations, MD cross-checks and sensitivity"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.require_subcommand(0, 1);

  std::string config_path, preset, out = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic = false, list_presets = false;
  app.add_flag("--list-presets", list_presets, "Print the shipped presets and exit");

  const std::map<std::string, std::string> about = {
      {"brms", "B_rms^2 table over a sweep"},
      {"meanfield", "Mean-field integral table over a sweep"},
      {"asymptote", "Long-time correlation constant table over a sweep"},
      {"corr", "Correlation curve with short, power-law and long-time fits"},
      {"propagator", "Diffusion propagator between two points over time"},
      {"md", "Lennard-Jones runs writing field traces at the NV depths"},
      {"analyze", "Spectra, autocorrelations, depth scan and overlay from traces"},
      {"fisher", "Fisher information for correlation spectroscopy and Qdyne"},
      {"fit", "Fit a model to one column of a CSV file"},
  };
  for (const auto& name : cli::subcommands()) {
    auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : "");
    auto* cfg = sub->add_option("--config", config_path, "JSON job config")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "Shipped preset name")->excludes(cfg);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--threads", threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--deterministic", deterministic, "Serial reductions for bit-identical reruns");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (list_presets) {
    for (const auto& p : cli::preset_names()) std::cout << p << '\n';
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }
  auto* sub = app.get_subcommands().front();
  try {
    if (config_path.empty() && preset.empty()) throw nanonmr::ConfigError("give --config or --preset");
    cli::json config = preset.empty() ? cli::load_config(config_path) : cli::load_preset(preset);
    if (config.contains("subcommand") && config["subcommand"] != sub->get_name()) {
      std::cerr << "note: config was written for '" << config["subcommand"].get<std::string>() << "'\n";
    }
    cli::RunOptions opt;
    opt.out_dir = out;
    if (sub->count("--seed")) opt.seed = seed;
    opt.threads = threads;
    opt.deterministic = deterministic;
    for (const auto& f : cli::run(sub->get_name(), config, opt)) std::cout << f.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "nanonmr " << sub->get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
