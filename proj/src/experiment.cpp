#include "udn/experiment.hpp"

#include "udn/bounds.hpp"
#include "udn/denoise.hpp"
#include "udn/downstream.hpp"
#include "udn/error.hpp"
#include "udn/linalg.hpp"
#include "udn/parallel.hpp"
#include "udn/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#ifndef UDN_VERSION
#define UDN_VERSION "0.0.0"
#endif

namespace udn::experiment {
namespace {

using nlohmann::json;

// Trial slots reserved for the per-experiment model streams.
constexpr std::uint64_t kCurveSlot = ~std::uint64_t{0};
constexpr std::uint64_t kEmbeddingSlot = ~std::uint64_t{0} - 1;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename Int>
std::string format_int(Int x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Sample standard deviation over mean.
double coefficient_of_variation(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  return standard_error(v) * std::sqrt(static_cast<double>(v.size())) / mean(v);
}

// ---------------------------------------------------------------------------
// Config parsing

const std::set<std::string, std::less<>> kGridKeys = {"n",     "d",  "sigma", "ratio",    "rank",
                                                      "bandwidth", "c1", "c2", "fraction", "trials"};

bool known_experiment(std::string_view name) {
  return std::find(kExperimentNames.begin(), kExperimentNames.end(), name) != kExperimentNames.end();
}

std::vector<double> number_list(const json& value, const std::string& key) {
  std::vector<double> out;
  if (value.is_number()) {
    out.push_back(value.get<double>());
  } else if (value.is_array()) {
    for (const auto& item : value) {
      if (!item.is_number()) throw ConfigError("grid." + key + " must contain only numbers");
      out.push_back(item.get<double>());
    }
  } else {
    throw ConfigError("grid." + key + " must be a number or a list of numbers");
  }
  if (out.empty()) throw ConfigError("grid." + key + " is empty");
  for (double x : out) {
    if (!std::isfinite(x)) throw ConfigError("grid." + key + " contains a non-finite value");
  }
  return out;
}

std::vector<Eigen::Index> size_list(const json& value, const std::string& key) {
  std::vector<Eigen::Index> out;
  for (double x : number_list(value, key)) {
    if (x < 1.0 || x != std::floor(x) || x > 1e9) {
      throw ConfigError("grid." + key + " values must be positive integers");
    }
    out.push_back(static_cast<Eigen::Index>(x));
  }
  return out;
}

double scalar(const json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError("grid." + key + " must be a number");
  const double x = value.get<double>();
  if (!std::isfinite(x)) throw ConfigError("grid." + key + " must be finite");
  return x;
}

std::size_t count_value(const json& value, const std::string& key) {
  if (!value.is_number_integer() || value.get<long long>() < 1) {
    throw ConfigError(key + " must be a positive integer");
  }
  return static_cast<std::size_t>(value.get<long long>());
}

void check_grid_block(const json& block, const std::string& where) {
  if (!block.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : block.items()) {
    if (kGridKeys.count(key) != 0) continue;
    if (where == "grid" && known_experiment(key)) {
      check_grid_block(value, "grid." + key);
      continue;
    }
    throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

ZigzagParams parse_zigzag(const json& j) {
  if (!j.is_object()) throw ConfigError("zigzag must be an object");
  ZigzagParams p;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw ConfigError("zigzag." + key + " must be a number");
    if (key == "segments") {
      p.segments = value.get<int>();
    } else if (key == "intrinsic_dim") {
      p.intrinsic_dim = value.get<int>();
    } else if (key == "min_segment") {
      p.min_segment = value.get<double>();
    } else if (key == "separation") {
      p.separation = value.get<double>();
    } else if (key == "curve_radius") {
      p.curve_radius = value.get<double>();
    } else {
      throw ConfigError("unknown key '" + key + "' in zigzag");
    }
  }
  if (p.segments < 1 || p.intrinsic_dim < 1) {
    throw ConfigError("zigzag segments and intrinsic_dim must be positive");
  }
  if (p.intrinsic_dim > p.segments) {
    throw ConfigError("zigzag needs at least intrinsic_dim segments to span its space");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Defaults

struct Defaults {
  Grid grid;
  bool n_given = false;
  std::size_t trials = 1;
};

Defaults defaults_for(std::string_view experiment, bool paper_scale) {
  Defaults out;
  Grid& g = out.grid;
  g.bandwidth = std::sqrt(0.005);
  if (experiment == "fig1b") {
    g.n = paper_scale ? std::vector<Eigen::Index>{100, 400, 900, 1600, 2500, 3600, 4900}
                      : std::vector<Eigen::Index>{100, 400, 1600, 4900};
    g.d = {20};
    out.n_given = true;
    out.trials = 5;
  } else if (experiment == "fig1c") {
    g.d = paper_scale ? std::vector<Eigen::Index>{100, 200, 500, 1000, 2000, 5000, 10000}
                      : std::vector<Eigen::Index>{200, 1000, 5000};
    g.ratio = 0.1;
    g.sigma = {0.025, 0.05, 0.1};
    out.trials = 20;
  } else if (experiment == "fig2a") {
    g.d = {5000};
    g.ratio = 0.2;
    g.sigma = {0.0075, 0.05};
    out.trials = 1;
  } else if (experiment == "fig2b") {
    g.d = paper_scale ? std::vector<Eigen::Index>{5000} : std::vector<Eigen::Index>{1000};
    g.ratio = 0.2;
    g.sigma = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    out.trials = 20;
  } else if (experiment == "loo") {
    g.d = {200, 500};
    g.ratio = 1.0;
    g.sigma = {0.05};
    out.trials = 20;
  } else if (experiment == "lower_bound") {
    g.d = {1000};
    g.n = {100};
    g.sigma = {0.5};
    out.n_given = true;
    out.trials = 200;
  } else {
    throw ConfigError("unknown experiment '" + std::string(experiment) + "'");
  }
  return out;
}

void overlay(const json& block, Grid& g, bool& n_given, std::optional<std::size_t>& trials) {
  for (const auto& [key, value] : block.items()) {
    if (key == "n") {
      g.n = size_list(value, key);
      n_given = true;
    } else if (key == "d") {
      g.d = size_list(value, key);
    } else if (key == "sigma") {
      g.sigma = number_list(value, key);
    } else if (key == "ratio") {
      g.ratio = scalar(value, key);
    } else if (key == "rank") {
      const double r = scalar(value, key);
      if (r != std::floor(r) || r < 1.0 || r > 1e6) throw ConfigError("grid.rank must be a positive integer");
      g.rank = static_cast<int>(r);
    } else if (key == "bandwidth") {
      g.bandwidth = scalar(value, key);
    } else if (key == "c1") {
      g.c1 = scalar(value, key);
    } else if (key == "c2") {
      g.c2 = scalar(value, key);
    } else if (key == "fraction") {
      g.fraction = scalar(value, key);
    } else if (key == "trials") {
      trials = count_value(value, "grid.trials");
    }
  }
}

struct Cell {
  Eigen::Index n;
  Eigen::Index d;
};

std::vector<Cell> cells_of(const Plan& plan) {
  std::vector<Cell> cells;
  if (plan.experiment == "fig1b") {
    for (auto d : plan.grid.d) {
      for (auto n : plan.grid.n) cells.push_back({n, d});
    }
  } else {
    for (std::size_t i = 0; i < plan.grid.d.size(); ++i) cells.push_back({plan.grid.n[i], plan.grid.d[i]});
  }
  return cells;
}

std::string cell_name(const Cell& c) {
  return "n=" + format_int(c.n) + " d=" + format_int(c.d);
}

// ---------------------------------------------------------------------------
// Shared machinery

struct TaskResult {
  std::vector<Row> rows;
  std::vector<std::string> warnings;
};

template <typename Fn>
void run_tasks(std::size_t count, std::size_t threads, Output& out, Fn&& fn) {
  std::vector<TaskResult> slots(count);
  parallel_for(count, threads, [&](std::size_t i) { slots[i] = fn(i); });
  for (auto& slot : slots) {
    out.rows.insert(out.rows.end(), std::make_move_iterator(slot.rows.begin()),
                    std::make_move_iterator(slot.rows.end()));
    out.warnings.insert(out.warnings.end(), slot.warnings.begin(), slot.warnings.end());
  }
}

std::size_t thread_count(const Config& config) {
  return config.threads == 0 ? default_thread_count() : config.threads;
}

struct Models {
  TwoClassZigzagModel base;
  std::map<Eigen::Index, TwoClassZigzagModel> by_dim;
  const TwoClassZigzagModel& at(Eigen::Index d) const { return by_dim.at(d); }
};

Models build_models(const Config& config, const Plan& plan) {
  Models m;
  CounterRng curve_rng(seed_for(config.base_seed, plan.experiment, kCurveSlot));
  const auto embedding_seed = seed_for(config.base_seed, plan.experiment, kEmbeddingSlot);
  m.base = make_two_class_model(config.zigzag, config.zigzag.intrinsic_dim, curve_rng, embedding_seed);
  for (auto d : plan.grid.d) {
    if (m.by_dim.count(d) == 0) m.by_dim.emplace(d, reembed(m.base, d));
  }
  return m;
}

std::uint64_t cell_key(const Cell& c) {
  return mix64(static_cast<std::uint64_t>(c.n)) ^ static_cast<std::uint64_t>(c.d);
}

// Streams of one (cell, trial) task. Every sigma of a cell reuses the same
// sample and the same unit-variance noise draw.
struct TaskStreams {
  std::uint64_t seed;
  CounterRng sample;
  std::uint64_t noise_seed;
  CounterRng aux;
};

TaskStreams streams_for(const Config& config, const Plan& plan, const Cell& cell, std::size_t trial) {
  const auto seed = seed_for(config.base_seed, plan.experiment, trial);
  const CounterRng root = CounterRng(seed).split(cell_key(cell));
  return {seed, root.split("sample"), root.split("noise")(), root.split("aux")};
}

Matrix unit_noise(const Matrix& X, NoiseFamily family, std::uint64_t seed) {
  return add_noise(Matrix::Zero(X.rows(), X.cols()), {family, 1.0, seed});
}

double lambda_r_of(const LabeledSample& s, int rank) {
  return singular_values(s.intrinsic)(rank - 1);
}

struct RowMaker {
  long long trial;
  std::uint64_t seed;
  Cell cell;
  double sigma;
  std::vector<Row>* rows;
  void operator()(std::string metric, double value, long long index = -1) const {
    rows->push_back({trial, seed, cell.n, cell.d, sigma, index, std::move(metric), value});
  }
};

// Metric values keyed by (cell, sigma) for the summaries.
std::map<std::tuple<Eigen::Index, Eigen::Index, double>, std::vector<double>> collect(
    const std::vector<Row>& rows, std::string_view metric, bool per_trial_only = true) {
  std::map<std::tuple<Eigen::Index, Eigen::Index, double>, std::vector<double>> out;
  for (const auto& r : rows) {
    if (r.metric != metric || r.index != -1) continue;
    if (per_trial_only && r.trial < 0) continue;
    out[{r.n, r.d, r.sigma}].push_back(r.value);
  }
  return out;
}

// Per-trial metrics get median rows (trial = -1) in the CSV.
void append_medians(Output& out, const std::vector<std::string>& metrics) {
  for (const auto& metric : metrics) {
    for (const auto& [key, values] : collect(out.rows, metric)) {
      const auto& [n, d, sigma] = key;
      out.rows.push_back({-1, 0, n, d, sigma, -1, "median_" + metric, median(values)});
    }
  }
}

// Returns the model's intrinsic mixture second moment r-th eigenvalue.
double population_lambda(const TwoClassZigzagModel& model, int rank) {
  Matrix m = Matrix::Zero(model.intrinsic_dim(), model.intrinsic_dim());
  for (int label = 0; label < 2; ++label) {
    const auto& curve = model.curve(label);
    m += 0.5 * (curve_covariance_bound(curve).covariance + curve.shift * curve.shift.transpose());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  return solver.eigenvalues().reverse()(rank - 1);
}

// Sorts samples by class, then by time along the curve.
void sort_by_class_and_time(LabeledSample& s) {
  const auto n = s.X.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto ia = static_cast<std::size_t>(a);
    const auto ib = static_cast<std::size_t>(b);
    if (s.labels[ia] != s.labels[ib]) return s.labels[ia] < s.labels[ib];
    return s.times[ia] < s.times[ib];
  });
  LabeledSample sorted;
  sorted.X.resize(n, s.X.cols());
  sorted.intrinsic.resize(n, s.intrinsic.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    sorted.X.row(i) = s.X.row(src);
    sorted.intrinsic.row(i) = s.intrinsic.row(src);
    sorted.labels.push_back(s.labels[static_cast<std::size_t>(src)]);
    sorted.times.push_back(s.times[static_cast<std::size_t>(src)]);
  }
  s = std::move(sorted);
}

// Orients a clean Fiedler vector so that class 1 sits on the positive side.
Vector orient_by_labels(const Vector& v, const Labels& labels) {
  double score = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) score += labels[i] == 1 ? v(static_cast<Eigen::Index>(i)) : -v(static_cast<Eigen::Index>(i));
  return score < 0.0 ? Vector(-v) : v;
}

struct SpectralComparison {
  Matrix Xhat;
  AverageErrorMatrix tilde;
  LaplacianResult clean, denoised, averaged;
  Vector eta_clean, eta_denoised, eta_averaged;
};

SpectralComparison compare_spectral(const LabeledSample& s, const Matrix& Z, const Grid& g,
                                    CounterRng tilde_rng) {
  SpectralComparison c;
  c.Xhat = pca_denoise(Z, g.rank).Xhat;
  c.tilde = make_average_error_matrix(s.X, Z, c.Xhat, g.fraction, tilde_rng);
  c.clean = normalized_laplacian(s.X, g.bandwidth);
  c.denoised = normalized_laplacian(c.Xhat, g.bandwidth);
  c.averaged = normalized_laplacian(c.tilde.Xtilde, g.bandwidth);
  c.eta_clean = orient_by_labels(c.clean.fiedler_vector, s.labels);
  c.eta_denoised = align_sign(c.denoised.fiedler_vector, c.eta_clean);
  c.eta_averaged = align_sign(c.averaged.fiedler_vector, c.eta_clean);
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

json to_json(const Grid& g) {
  return {{"n", g.n},           {"d", g.d},   {"sigma", g.sigma}, {"ratio", g.ratio},
          {"rank", g.rank},     {"bandwidth", g.bandwidth},     {"c1", g.c1},
          {"c2", g.c2},         {"fraction", g.fraction}};
}

Config parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  Config c;
  c.source = j;
  bool have_experiment = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment" || key == "experiments") {
      if (have_experiment) throw ConfigError("give either 'experiment' or 'experiments', not both");
      have_experiment = true;
      if (value.is_string() && value.get<std::string>() == "all") {
        c.experiments.assign(kExperimentNames.begin(), kExperimentNames.end());
      } else if (value.is_string()) {
        c.experiments.push_back(value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& item : value) {
          if (!item.is_string()) throw ConfigError("experiments must be strings");
          c.experiments.push_back(item.get<std::string>());
        }
      } else {
        throw ConfigError("experiment must be a string or a list of strings");
      }
    } else if (key == "base_seed") {
      if (!value.is_number_integer() || (value.is_number_integer() && !value.is_number_unsigned() &&
                                          value.get<long long>() < 0)) {
        throw ConfigError("base_seed must be a non-negative integer");
      }
      c.base_seed = value.get<std::uint64_t>();
    } else if (key == "trials") {
      c.trials = count_value(value, "trials");
    } else if (key == "grid") {
      check_grid_block(value, "grid");
      c.grid = value;
    } else if (key == "zigzag") {
      c.zigzag = parse_zigzag(value);
    } else if (key == "noise") {
      if (!value.is_string()) throw ConfigError("noise must be a string");
      c.noise = parse_noise_family(value.get<std::string>());
    } else if (key == "output_dir") {
      if (!value.is_string()) throw ConfigError("output_dir must be a string");
      c.output_dir = value.get<std::string>();
    } else if (key == "paper_scale") {
      if (!value.is_boolean()) throw ConfigError("paper_scale must be true or false");
      c.paper_scale = value.get<bool>();
    } else if (key == "threads") {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("threads must be a non-negative integer");
      }
      c.threads = static_cast<std::size_t>(value.get<long long>());
    } else if (key == "description") {
      continue;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (!have_experiment || c.experiments.empty()) throw ConfigError("config names no experiment");
  std::set<std::string> seen;
  for (const auto& name : c.experiments) {
    if (!known_experiment(name)) throw ConfigError("unknown experiment '" + name + "'");
    if (!seen.insert(name).second) throw ConfigError("experiment '" + name + "' listed twice");
  }
  // Resolve everything now so that errors surface before any work starts.
  for (const auto& name : c.experiments) resolve(c, name);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

Plan resolve(const Config& config, std::string_view experiment) {
  Defaults def = defaults_for(experiment, config.paper_scale);
  Plan plan;
  plan.experiment = std::string(experiment);
  plan.grid = def.grid;
  bool n_given = def.n_given;
  std::optional<std::size_t> trials = config.trials;
  // Top-level grid keys override defaults; a per-experiment block overrides both.
  json common = json::object();
  for (const auto& [key, value] : config.grid.items()) {
    if (!known_experiment(key)) common[key] = value;
  }
  if (common.contains("n") || common.contains("d")) n_given = false;
  overlay(common, plan.grid, n_given, trials);
  if (config.grid.contains(plan.experiment)) {
    const auto& block = config.grid.at(plan.experiment);
    if (block.contains("n") || block.contains("d")) n_given = block.contains("n");
    overlay(block, plan.grid, n_given, trials);
  }
  plan.trials = trials.value_or(def.trials);
  Grid& g = plan.grid;
  const std::string where = "experiment " + plan.experiment + ": ";

  if (!(g.ratio > 0.0)) throw ConfigError(where + "grid.ratio must be positive");
  if (plan.experiment != "fig1b") {
    if (n_given) {
      if (g.n.size() != g.d.size()) {
        throw ConfigError(where + "grid.n and grid.d must have the same length");
      }
    } else {
      g.n.clear();
      for (auto d : g.d) {
        const auto n = static_cast<Eigen::Index>(std::llround(g.ratio * static_cast<double>(d)));
        if (n < 1) throw ConfigError(where + "ratio * d rounds to zero rows");
        g.n.push_back(n);
      }
    }
    if (g.sigma.empty()) throw ConfigError(where + "grid.sigma is empty");
    for (double s : g.sigma) {
      if (!(s > 0.0)) throw ConfigError(where + "grid.sigma values must be positive");
    }
  } else {
    g.sigma.clear();
    if (g.rank > config.zigzag.intrinsic_dim) {
      throw ConfigError(where + "rank exceeds the intrinsic dimension of the curves");
    }
  }
  if (g.n.empty() || g.d.empty()) throw ConfigError(where + "grid.n and grid.d must be non-empty");
  if (g.c1 < 0.0 || g.c2 < 0.0) throw ConfigError(where + "c1 and c2 must be non-negative");
  const bool spectral = plan.experiment == "fig2a" || plan.experiment == "fig2b";
  if (spectral && !(g.bandwidth > 0.0)) throw ConfigError(where + "bandwidth must be positive");
  if (spectral && !(g.fraction > 0.0 && g.fraction < 1.0)) {
    throw ConfigError(where + "fraction must lie in (0, 1)");
  }
  for (const auto& cell : cells_of(plan)) {
    const auto limit = plan.experiment == "loo" ? std::min(cell.n - 1, cell.d) : std::min(cell.n, cell.d);
    if (plan.experiment != "lower_bound" && g.rank > limit) {
      throw ConfigError(where + "rank " + format_int(g.rank) + " exceeds the limit " +
                        format_int(limit) + " at " + cell_name(cell));
    }
    if (plan.experiment == "fig1b" && cell.n < g.rank) {
      throw ConfigError(where + "n must be at least the rank");
    }
    if (spectral && cell.n < 2) throw ConfigError(where + "spectral clustering needs n >= 2");
  }
  return plan;
}

// ---------------------------------------------------------------------------

Output run_fig1b(const Config& config) {
  Output out;
  out.plan = resolve(config, "fig1b");
  const auto& plan = out.plan;
  const auto models = build_models(config, plan);
  const auto cells = cells_of(plan);
  const int r = plan.grid.rank;
  const std::size_t T = plan.trials;

  run_tasks(cells.size() * T, thread_count(config), out, [&](std::size_t task) {
    const auto& cell = cells[task / T];
    const auto trial = task % T;
    auto streams = streams_for(config, plan, cell, trial);
    TaskResult result;
    const RowMaker emit{static_cast<long long>(trial), streams.seed, cell, 0.0, &result.rows};
    const auto sample = sample_two_class(models.at(cell.d), cell.n, streams.sample);
    const double lam = lambda_r_of(sample, r);
    const double lam_embedded = singular_values(sample.X)(r - 1);
    emit("lambda_r", lam);
    emit("lambda_r_over_sqrt_n", lam / std::sqrt(static_cast<double>(cell.n)));
    emit("lambda_r_embedded", lam_embedded);
    emit("lambda_r_embedding_gap", std::abs(lam - lam_embedded));
    return result;
  });

  const double population = std::sqrt(population_lambda(models.base, r));
  for (const auto& cell : cells) {
    out.rows.push_back({-1, 0, cell.n, cell.d, 0.0, -1, "population_lambda_r_over_sqrt_n", population});
  }
  append_medians(out, {"lambda_r", "lambda_r_over_sqrt_n"});

  for (auto d : plan.grid.d) {
    std::vector<double> medians;
    for (const auto& [key, values] : collect(out.rows, "lambda_r_over_sqrt_n")) {
      if (std::get<1>(key) == d) medians.push_back(median(values));
    }
    out.summary["d=" + format_int(d)] = {
        {"cv_median_lambda_r_over_sqrt_n", coefficient_of_variation(medians)},
        {"population_lambda_r_over_sqrt_n", population}};
  }
  return out;
}

Output run_fig1c(const Config& config) {
  Output out;
  out.plan = resolve(config, "fig1c");
  const auto& plan = out.plan;
  const auto models = build_models(config, plan);
  const auto cells = cells_of(plan);
  const auto& g = plan.grid;
  const std::size_t T = plan.trials;

  run_tasks(cells.size() * T, thread_count(config), out, [&](std::size_t task) {
    const auto& cell = cells[task / T];
    const auto trial = task % T;
    auto streams = streams_for(config, plan, cell, trial);
    TaskResult result;
    const auto sample = sample_two_class(models.at(cell.d), cell.n, streams.sample);
    const Matrix E = unit_noise(sample.X, config.noise, streams.noise_seed);
    const double lam = lambda_r_of(sample, g.rank);
    const double sqrt_n = std::sqrt(static_cast<double>(cell.n));
    for (double sigma : g.sigma) {
      const RowMaker emit{static_cast<long long>(trial), streams.seed, cell, sigma, &result.rows};
      const Matrix Z = sample.X + sigma * E;
      const Matrix Xhat = pca_denoise(Z, g.rank).Xhat;
      const Matrix noisy_err = Z - sample.X;
      const Matrix denoised_err = Xhat - sample.X;
      emit("uniform_err_over_sigma_noisy", two_inf_norm(noisy_err) / sigma);
      emit("uniform_err_over_sigma_denoised", two_inf_norm(denoised_err) / sigma);
      emit("avg_err_over_sigma_noisy", frobenius_norm(noisy_err) / sqrt_n / sigma);
      emit("avg_err_over_sigma_denoised", frobenius_norm(denoised_err) / sqrt_n / sigma);
      // lambda_r comes from the intrinsic coordinates, but the threshold
      // uses the ambient shape.
      const double threshold =
          1.0 + g.c1 * sigma * (sqrt_n + std::sqrt(static_cast<double>(cell.d)));
      emit("lambda_r", lam);
      emit("gap_threshold", threshold);
      emit("gap_satisfied", lam > threshold ? 1.0 : 0.0);
      const auto bounds = theorem1_bounds(static_cast<double>(cell.n), static_cast<double>(cell.d),
                                          sigma, lam, g.c2);
      emit("bound_general_over_sigma", bounds.general_bound / sigma);
      emit("bound_regime_over_sigma", bounds.regime_bound / sigma);
      emit("bound_canonical_over_sigma", bounds.canonical_bound / sigma);
      if (!(lam > threshold)) {
        result.warnings.push_back("fig1c " + cell_name(cell) + " sigma=" + format_double(sigma) +
                                  " trial=" + format_int(trial) + ": spectral gap condition fails (lambda_r=" +
                                  format_double(lam) + ", threshold=" + format_double(threshold) + ")");
      }
    }
    return result;
  });

  append_medians(out, {"uniform_err_over_sigma_noisy", "uniform_err_over_sigma_denoised",
                       "avg_err_over_sigma_noisy", "avg_err_over_sigma_denoised"});

  const auto denoised = collect(out.rows, "uniform_err_over_sigma_denoised");
  const auto noisy = collect(out.rows, "uniform_err_over_sigma_noisy");
  for (double sigma : g.sigma) {
    std::vector<double> den_medians;
    double first_noisy = 0.0;
    double last_noisy = 0.0;
    Eigen::Index first_d = -1;
    Eigen::Index last_d = -1;
    for (const auto& cell : cells) {
      const auto key = std::make_tuple(cell.n, cell.d, sigma);
      den_medians.push_back(median(denoised.at(key)));
      const double m = median(noisy.at(key));
      if (first_d < 0 || cell.d < first_d) {
        first_d = cell.d;
        first_noisy = m;
      }
      if (cell.d > last_d) {
        last_d = cell.d;
        last_noisy = m;
      }
    }
    const auto [lo, hi] = std::minmax_element(den_medians.begin(), den_medians.end());
    out.summary["sigma=" + format_double(sigma)] = {
        {"denoised_median_max_over_min", *hi / *lo},
        {"noisy_median_growth_largest_over_smallest_d", last_noisy / first_noisy},
        {"expected_noisy_growth_sqrt_d_ratio",
         std::sqrt(static_cast<double>(last_d) / static_cast<double>(first_d))}};
  }
  return out;
}

Output run_fig2a(const Config& config) {
  Output out;
  out.plan = resolve(config, "fig2a");
  const auto& plan = out.plan;
  const auto models = build_models(config, plan);
  const auto cells = cells_of(plan);
  const auto& g = plan.grid;
  const std::size_t T = plan.trials;
  const std::size_t S = g.sigma.size();

  run_tasks(cells.size() * T * S, thread_count(config), out, [&](std::size_t task) {
    const auto& cell = cells[task / (T * S)];
    const auto trial = (task / S) % T;
    const double sigma = g.sigma[task % S];
    auto streams = streams_for(config, plan, cell, trial);
    TaskResult result;
    const RowMaker emit{static_cast<long long>(trial), streams.seed, cell, sigma, &result.rows};
    auto sample = sample_two_class(models.at(cell.d), cell.n, streams.sample);
    sort_by_class_and_time(sample);
    const Matrix Z = sample.X + sigma * unit_noise(sample.X, config.noise, streams.noise_seed);
    const auto c = compare_spectral(sample, Z, g, streams.aux.split("tilde"));

    std::vector<char> corrupted(static_cast<std::size_t>(cell.n), 0);
    for (auto i : c.tilde.corrupted) corrupted[static_cast<std::size_t>(i)] = 1;
    const Vector row_err_denoised = (c.Xhat - sample.X).rowwise().norm();
    const Vector row_err_averaged = (c.tilde.Xtilde - sample.X).rowwise().norm();
    const Vector diff_denoised = (c.eta_denoised - c.eta_clean).cwiseAbs();
    const Vector diff_averaged = (c.eta_averaged - c.eta_clean).cwiseAbs();
    for (Eigen::Index i = 0; i < cell.n; ++i) {
      const auto idx = static_cast<long long>(i);
      const auto si = static_cast<std::size_t>(i);
      emit("label", sample.labels[si], idx);
      emit("time", sample.times[si], idx);
      emit("corrupted", corrupted[si], idx);
      emit("fiedler_clean", c.eta_clean(i), idx);
      emit("fiedler_denoised", c.eta_denoised(i), idx);
      emit("fiedler_averaged", c.eta_averaged(i), idx);
      emit("absdiff_denoised", diff_denoised(i), idx);
      emit("absdiff_averaged", diff_averaged(i), idx);
      emit("row_err_denoised", row_err_denoised(i), idx);
      emit("row_err_averaged", row_err_averaged(i), idx);
    }
    const auto labels_clean = sign_cluster(c.eta_clean);
    const auto labels_denoised = sign_cluster(c.eta_denoised);
    const auto labels_averaged = sign_cluster(c.eta_averaged);
    emit("ari_clean", adjusted_rand_index(labels_clean, sample.labels));
    emit("ari_denoised", adjusted_rand_index(labels_denoised, sample.labels));
    emit("ari_averaged", adjusted_rand_index(labels_averaged, sample.labels));
    emit("sign_mismatch_clean", 1.0 - binary_clustering_accuracy(labels_clean, sample.labels));
    emit("sign_mismatch_denoised", 1.0 - binary_clustering_accuracy(labels_denoised, sample.labels));
    emit("sign_mismatch_averaged", 1.0 - binary_clustering_accuracy(labels_averaged, sample.labels));
    emit("max_absdiff_denoised", diff_denoised.maxCoeff());
    emit("max_absdiff_averaged", diff_averaged.maxCoeff());
    std::vector<double> abs_clean(static_cast<std::size_t>(cell.n));
    for (Eigen::Index i = 0; i < cell.n; ++i) abs_clean[static_cast<std::size_t>(i)] = std::abs(c.eta_clean(i));
    emit("median_abs_fiedler_clean", median(abs_clean));
    emit("fiedler_value_clean", c.clean.fiedler_value);
    emit("fiedler_value_denoised", c.denoised.fiedler_value);
    emit("fiedler_value_averaged", c.averaged.fiedler_value);
    emit("laplacian_dist_denoised", laplacian_inf_distance(c.clean.L, c.denoised.L));
    emit("laplacian_dist_averaged", laplacian_inf_distance(c.clean.L, c.averaged.L));
    emit("uniform_err_denoised", row_err_denoised.maxCoeff());
    emit("uniform_err_averaged", row_err_averaged.maxCoeff());
    emit("frobenius_err_denoised", row_err_denoised.norm());
    emit("frobenius_err_averaged", row_err_averaged.norm());
    emit("alpha", c.tilde.alpha);
    emit("alpha_clamped", c.tilde.clamped ? 1.0 : 0.0);
    return result;
  });
  return out;
}

Output run_fig2b(const Config& config) {
  Output out;
  out.plan = resolve(config, "fig2b");
  const auto& plan = out.plan;
  const auto models = build_models(config, plan);
  const auto cells = cells_of(plan);
  const auto& g = plan.grid;
  const std::size_t T = plan.trials;
  const std::size_t S = g.sigma.size();

  run_tasks(cells.size() * T * S, thread_count(config), out, [&](std::size_t task) {
    const auto& cell = cells[task / (T * S)];
    const auto trial = (task / S) % T;
    const double sigma = g.sigma[task % S];
    auto streams = streams_for(config, plan, cell, trial);
    TaskResult result;
    const RowMaker emit{static_cast<long long>(trial), streams.seed, cell, sigma, &result.rows};
    const auto sample = sample_two_class(models.at(cell.d), cell.n, streams.sample);
    const Matrix Z = sample.X + sigma * unit_noise(sample.X, config.noise, streams.noise_seed);
    const auto c = compare_spectral(sample, Z, g, streams.aux.split("tilde"));
    const auto labels_clean = sign_cluster(c.eta_clean);
    const auto labels_denoised = sign_cluster(c.eta_denoised);
    const auto labels_averaged = sign_cluster(c.eta_averaged);
    emit("ari_clean", adjusted_rand_index(labels_clean, sample.labels));
    emit("ari_denoised", adjusted_rand_index(labels_denoised, sample.labels));
    emit("ari_averaged", adjusted_rand_index(labels_averaged, sample.labels));
    emit("accuracy_clean", binary_clustering_accuracy(labels_clean, sample.labels));
    emit("accuracy_denoised", binary_clustering_accuracy(labels_denoised, sample.labels));
    emit("accuracy_averaged", binary_clustering_accuracy(labels_averaged, sample.labels));
    emit("uniform_err_denoised", two_inf_norm(c.Xhat - sample.X));
    emit("uniform_err_averaged", two_inf_norm(c.tilde.Xtilde - sample.X));
    emit("alpha", c.tilde.alpha);
    emit("alpha_clamped", c.tilde.clamped ? 1.0 : 0.0);
    return result;
  });

  append_medians(out, {"ari_clean", "ari_denoised", "ari_averaged", "accuracy_denoised",
                       "accuracy_averaged"});
  const auto den = collect(out.rows, "ari_denoised");
  const auto avg = collect(out.rows, "ari_averaged");
  const auto clean = collect(out.rows, "ari_clean");
  for (const auto& [key, values] : den) {
    const auto& [n, d, sigma] = key;
    out.summary[cell_name({n, d}) + " sigma=" + format_double(sigma)] = {
        {"median_ari_clean", median(clean.at(key))},
        {"median_ari_denoised", median(values)},
        {"median_ari_averaged", median(avg.at(key))}};
  }
  return out;
}

Output run_loo(const Config& config) {
  Output out;
  out.plan = resolve(config, "loo");
  const auto& plan = out.plan;
  const auto models = build_models(config, plan);
  const auto cells = cells_of(plan);
  const auto& g = plan.grid;
  const std::size_t T = plan.trials;

  run_tasks(cells.size() * T, thread_count(config), out, [&](std::size_t task) {
    const auto& cell = cells[task / T];
    const auto trial = task % T;
    auto streams = streams_for(config, plan, cell, trial);
    TaskResult result;
    const auto sample = sample_two_class(models.at(cell.d), cell.n, streams.sample);
    const Matrix E = unit_noise(sample.X, config.noise, streams.noise_seed);
    const auto row = static_cast<Eigen::Index>(streams.aux.below(static_cast<std::uint64_t>(cell.n)));
    const double lam = lambda_r_of(sample, g.rank);
    const double noiseless = leave_one_out_residual(sample.X, row, g.rank);
    const double log_n = std::log(static_cast<double>(cell.n));
    for (double sigma : g.sigma) {
      const RowMaker emit{static_cast<long long>(trial), streams.seed, cell, sigma, &result.rows};
      const Matrix Z = sample.X + sigma * E;
      const double residual = leave_one_out_residual(Z, row, g.rank);
      const double scaled = sigma * std::sqrt(static_cast<double>(cell.d) * log_n) / (lam * lam);
      emit("removed_row", static_cast<double>(row));
      emit("lambda_r", lam);
      emit("residual", residual);
      emit("residual_noiseless", noiseless);
      emit("scaled_bound", scaled);
      emit("residual_over_scaled_bound", residual / scaled);
    }
    return result;
  });

  append_medians(out, {"residual", "residual_over_scaled_bound"});
  for (const auto& [key, values] : collect(out.rows, "residual_over_scaled_bound")) {
    const auto& [n, d, sigma] = key;
    const auto noiseless = collect(out.rows, "residual_noiseless").at(key);
    out.summary[cell_name({n, d}) + " sigma=" + format_double(sigma)] = {
        {"max_residual_over_scaled_bound", *std::max_element(values.begin(), values.end())},
        {"max_residual_noiseless", *std::max_element(noiseless.begin(), noiseless.end())}};
  }
  return out;
}

Output run_lower_bound(const Config& config) {
  Output out;
  out.plan = resolve(config, "lower_bound");
  const auto& plan = out.plan;
  const auto cells = cells_of(plan);
  const auto& g = plan.grid;
  const std::size_t T = plan.trials;
  const std::size_t S = g.sigma.size();

  run_tasks(cells.size() * T * S, thread_count(config), out, [&](std::size_t task) {
    const auto& cell = cells[task / (T * S)];
    const auto trial = (task / S) % T;
    const double sigma = g.sigma[task % S];
    auto streams = streams_for(config, plan, cell, trial);
    TaskResult result;
    const RowMaker emit{static_cast<long long>(trial), streams.seed, cell, sigma, &result.rows};
    LowerBoundOptions options;
    options.compare_pca = true;
    const auto est = lower_bound_montecarlo(cell.d, cell.n, sigma, 1, streams.aux, options);
    emit("max_sq_err_bayes", est.values.front());
    emit("max_sq_err_pca", est.pca_values.front());
    return result;
  });

  const auto bayes = collect(out.rows, "max_sq_err_bayes");
  const auto pca = collect(out.rows, "max_sq_err_pca");
  for (const auto& [key, values] : bayes) {
    const auto& [n, d, sigma] = key;
    auto add = [&](const std::string& metric, double value) {
      out.rows.push_back({-1, 0, n, d, sigma, -1, metric, value});
    };
    const double floor = normal_cdf(-1.0) * sigma * sigma / 16.0;
    add("mean_max_sq_err_bayes", mean(values));
    add("se_max_sq_err_bayes", standard_error(values));
    add("mean_max_sq_err_pca", mean(pca.at(key)));
    add("se_max_sq_err_pca", standard_error(pca.at(key)));
    add("event_floor", floor);
    out.summary[cell_name({n, d}) + " sigma=" + format_double(sigma)] = {
        {"mean_bayes", mean(values)},
        {"se_bayes", standard_error(values)},
        {"event_floor", floor},
        {"mean_minus_3se_above_floor", mean(values) - 3.0 * standard_error(values) >= floor}};
  }
  return out;
}

Output run_experiment(const Config& config, std::string_view experiment) {
  const auto start = std::chrono::steady_clock::now();
  Output out;
  if (experiment == "fig1b") {
    out = run_fig1b(config);
  } else if (experiment == "fig1c") {
    out = run_fig1c(config);
  } else if (experiment == "fig2a") {
    out = run_fig2a(config);
  } else if (experiment == "fig2b") {
    out = run_fig2b(config);
  } else if (experiment == "loo") {
    out = run_loo(config);
  } else if (experiment == "lower_bound") {
    out = run_lower_bound(config);
  } else {
    throw ConfigError("unknown experiment '" + std::string(experiment) + "'");
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string to_csv(std::string_view experiment, const std::vector<Row>& rows) {
  std::string text(kCsvHeader);
  text += '\n';
  for (const auto& r : rows) {
    text += experiment;
    text += ',';
    text += format_int(r.trial);
    text += ',';
    text += format_int(r.seed);
    text += ',';
    text += format_int(r.n);
    text += ',';
    text += format_int(r.d);
    text += ',';
    text += format_double(r.sigma);
    text += ',';
    text += format_int(r.index);
    text += ',';
    text += r.metric;
    text += ',';
    text += format_double(r.value);
    text += '\n';
  }
  return text;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << text;
  if (!file) throw IoError("failed writing " + path.string());
}

json csv_schema() {
  return {{"columns", {"experiment", "trial", "seed", "n", "d", "sigma", "index", "metric", "value"}},
          {"trial", "trial index, or -1 for a summary over trials"},
          {"seed", "per-trial seed = seed_for(base_seed, experiment, trial); 0 on summary rows"},
          {"sigma", "noise level; 0 where it does not apply"},
          {"index", "sample index for per-row metrics, otherwise -1"},
          {"value", "shortest round-trip decimal"}};
}

}  // namespace

RunResult run_all(const Config& config, const std::filesystem::path& out_dir) {
  const auto dir = out_dir.empty() ? std::filesystem::path(config.output_dir) : out_dir;
  if (dir.empty()) throw ConfigError("no output directory given");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  // Probe writability before spending time on the runs.
  write_text(dir / ".udn_write_test", "");
  std::filesystem::remove(dir / ".udn_write_test", ec);

  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  json experiments = json::array();
  for (const auto& name : config.experiments) {
    Output out = run_experiment(config, name);
    const std::string text = to_csv(name, out.rows);
    const std::string file = name + ".csv";
    write_text(dir / file, text);
    std::set<std::string> metrics;
    for (const auto& r : out.rows) metrics.insert(r.metric);
    experiments.push_back({{"experiment", name},
                           {"file", file},
                           {"sha256", sha256_hex(text)},
                           {"rows", out.rows.size()},
                           {"trials", out.plan.trials},
                           {"grid", to_json(out.plan.grid)},
                           {"metrics", metrics},
                           {"summary", out.summary},
                           {"warnings", out.warnings},
                           {"wall_seconds", out.wall_seconds}});
    result.outputs.push_back(std::move(out));
  }
  result.manifest = {
      {"tool", "udn"},
      {"version", UDN_VERSION},
      {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                            "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"compiler", __VERSION__},
      {"config", config.source},
      {"base_seed", config.base_seed},
      {"paper_scale", config.paper_scale},
      {"threads", thread_count(config)},
      {"noise", std::string(to_string(config.noise))},
      {"zigzag",
       {{"segments", config.zigzag.segments},
        {"intrinsic_dim", config.zigzag.intrinsic_dim},
        {"min_segment", config.zigzag.min_segment},
        {"separation", config.zigzag.separation},
        {"curve_radius", config.zigzag.curve_radius}}},
      {"csv_schema", csv_schema()},
      {"experiments", experiments},
      {"wall_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  write_text(dir / "manifest.json", result.manifest.dump(2) + "\n");
  return result;
}

}  // namespace udn::experiment
