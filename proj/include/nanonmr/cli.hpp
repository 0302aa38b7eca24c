// Job plumbing for the command-line front end: declarative JSON configs,
// presets, manifests and the subcommands themselves.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nanonmr::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

const std::vector<std::string>& subcommands();

/// Parses a config file; throws ConfigError on syntax errors or unknown keys.
json load_config(const std::filesystem::path& path);
/// Loads presets/<name>.json from the preset directory.
json load_preset(const std::string& name);
std::filesystem::path preset_dir();
std::vector<std::string> preset_names();

/// Rejects keys outside the schema anywhere in the config.
void validate_config(const json& config);

std::uint64_t fnv1a(const std::string& bytes);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 leaves the OpenMP default
  bool deterministic = false;
};

struct Manifest {
  std::string subcommand;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  bool deterministic = false;
  json to_json() const;
  /// "# manifest {...}\n", the first line of every CSV output.
  std::string csv_line() const;
};

/// The effective config (seed override applied) and its manifest.
Manifest make_manifest(const std::string& subcommand, const json& config, const RunOptions& opt);

/// Runs one subcommand and returns the files it wrote.
std::vector<std::filesystem::path> run(const std::string& subcommand, json config, const RunOptions& opt);

/// Reads the manifest line of a CSV written by this tool.
json read_csv_manifest(const std::filesystem::path& path);

}  // namespace nanonmr::cli
