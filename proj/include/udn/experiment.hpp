#pragma once

#include "udn/datagen.hpp"
#include "udn/matrix.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace udn::experiment {

inline constexpr std::array<std::string_view, 6> kExperimentNames = {
    "fig1b", "fig1c", "fig2a", "fig2b", "loo", "lower_bound"};

/// Parameter lists of one experiment after defaults are applied. Cells pair
/// n[i] with d[i]; fig1b instead crosses every n with every d.
struct Grid {
  std::vector<Eigen::Index> n;
  std::vector<Eigen::Index> d;
  std::vector<double> sigma;
  double ratio = 0.1;  // n = round(ratio * d) when n is not given
  int rank = 3;
  double bandwidth = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double fraction = 0.1;  // share of rows corrupted in Xtilde
};

nlohmann::json to_json(const Grid& grid);

/// Parsed experiment configuration. See README for the JSON schema.
struct Config {
  std::vector<std::string> experiments;
  std::uint64_t base_seed = 0;
  std::optional<std::size_t> trials;
  nlohmann::json grid = nlohmann::json::object();  // raw, may hold per-experiment blocks
  ZigzagParams zigzag;
  NoiseFamily noise = NoiseFamily::kGaussian;
  std::string output_dir;
  bool paper_scale = false;
  std::size_t threads = 0;  // 0 = default_thread_count()
  nlohmann::json source;    // the document as given
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

struct Plan {
  std::string experiment;
  std::size_t trials = 1;
  Grid grid;
};

/// Defaults for `experiment` overlaid with the config (top-level grid keys,
/// then the grid block named after the experiment), then validated.
Plan resolve(const Config& config, std::string_view experiment);

/// One long-format CSV record. trial = -1 marks summaries over trials and
/// index = -1 marks values that are not per-row.
struct Row {
  long long trial = -1;
  std::uint64_t seed = 0;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  double sigma = 0.0;
  long long index = -1;
  std::string metric;
  double value = 0.0;
};

inline constexpr std::string_view kCsvHeader = "experiment,trial,seed,n,d,sigma,index,metric,value";

struct Output {
  Plan plan;
  std::vector<Row> rows;
  std::vector<std::string> warnings;
  nlohmann::json summary = nlohmann::json::object();
  double wall_seconds = 0.0;
};

Output run_fig1b(const Config& config);
Output run_fig1c(const Config& config);
Output run_fig2a(const Config& config);
Output run_fig2b(const Config& config);
Output run_loo(const Config& config);
Output run_lower_bound(const Config& config);
Output run_experiment(const Config& config, std::string_view experiment);

/// Rows serialized with the fixed header and shortest round-trip numbers.
std::string to_csv(std::string_view experiment, const std::vector<Row>& rows);

std::string sha256_hex(std::string_view bytes);

struct RunResult {
  std::vector<Output> outputs;
  nlohmann::json manifest;
};

/// Runs every configured experiment, writing <out_dir>/<experiment>.csv and
/// <out_dir>/manifest.json. An empty out_dir falls back to config.output_dir.
RunResult run_all(const Config& config, const std::filesystem::path& out_dir);

}  // namespace udn::experiment
