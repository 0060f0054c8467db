// udn command-line tool. Exit codes: 0 success, 2 configuration or input
// errors, 3 numerical failures, 1 anything else.

#include "udn/bounds.hpp"
#include "udn/datagen.hpp"
#include "udn/denoise.hpp"
#include "udn/downstream.hpp"
#include "udn/error.hpp"
#include "udn/experiment.hpp"
#include "udn/linalg.hpp"
#include "udn/matrix.hpp"
#include "udn/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace udn;

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void emit_report(const json& report, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path);
  out << report.dump(2) << "\n";
}

json gap_json(const SpectralGapReport& gap) {
  return {{"lambda_r", gap.lambda_r},
          {"threshold", gap.threshold},
          {"c1", gap.c1},
          {"satisfied", gap.satisfied}};
}

json assumption_json(const AssumptionReport& a) {
  return {{"clusters", a.clusters},
          {"defined", a.defined},
          {"c0", a.observed_min_frac},
          {"delta", a.observed_max_radius},
          {"cm", a.defined ? json(a.observed_min_center_gap) : json(nullptr)},
          {"epsilon", a.epsilon},
          {"required_gap", a.required_gap},
          {"margin_ok", a.margin_ok}};
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  Eigen::Index n = 200;
  Eigen::Index d = 1000;
  double sigma = 0.05;
  std::uint64_t seed = 0;
  std::string noise = "gaussian";
  ZigzagParams params;
  std::string out_dir = ".";
  std::string format = "csv";
  bool embed = false;
};

void run_generate(const GenerateArgs& a) {
  if (a.format != "csv" && a.format != "udmx") throw ConfigError("--format must be csv or udmx");
  const CounterRng root(a.seed);
  CounterRng curve_rng = root.split("curves");
  const auto embedding_seed = root.split("embedding")();
  const auto model = make_two_class_model(a.params, a.d, curve_rng, embedding_seed);
  CounterRng sample_rng = root.split("sample");
  const auto sample = sample_two_class(model, a.n, sample_rng);
  const NoiseSpec noise{parse_noise_family(a.noise), a.sigma, root.split("noise")()};
  const Matrix Z = add_noise(sample.X, noise);

  fs::create_directories(a.out_dir);
  const std::string ext = a.format == "csv" ? ".csv" : ".udmx";
  const fs::path dir(a.out_dir);
  io::write_matrix(dir / ("X" + ext), sample.X);
  io::write_matrix(dir / ("Z" + ext), Z);
  io::write_labels(dir / "labels.csv", sample.labels);
  {
    std::ofstream times(dir / "times.csv");
    times.precision(17);
    for (double t : sample.times) times << t << "\n";
    if (!times) throw IoError("cannot write times.csv");
  }
  json model_json = to_json(model, a.embed);
  model_json["noise"] = {{"family", a.noise}, {"sigma", a.sigma}, {"seed", noise.seed}};
  model_json["n"] = a.n;
  model_json["seed"] = a.seed;
  std::ofstream(dir / "model.json") << model_json.dump(2) << "\n";
  const auto cov0 = curve_covariance_bound(model.curve0);
  const auto cov1 = curve_covariance_bound(model.curve1);
  emit_report({{"X", (dir / ("X" + ext)).string()},
               {"Z", (dir / ("Z" + ext)).string()},
               {"labels", (dir / "labels.csv").string()},
               {"model", (dir / "model.json").string()},
               {"lambda_r_curve0", cov0.lambda_r},
               {"lambda_r_curve1", cov1.lambda_r},
               {"uniform_noise_error", two_inf_norm(Z - sample.X)}},
              "-");
}

struct DenoiseArgs {
  std::string input;
  std::string output;
  int rank = 0;
  int max_rank = 10;
  std::optional<double> sigma;
  double c1 = 1.0;
  std::string clean;
  std::string report;
};

void run_denoise(const DenoiseArgs& a) {
  const Matrix Z = io::read_matrix(a.input);
  json report;
  int rank = a.rank;
  if (rank == 0) {
    const auto sel = select_rank(Z, a.sigma, a.max_rank);
    report["rank_selection"] = {{"mode", a.sigma ? "sigma" : "eigengap"},
                                {"rank", sel.rank},
                                {"threshold", sel.threshold},
                                {"no_signal", sel.no_signal}};
    if (sel.no_signal) {
      std::cerr << "warning: no singular value clears the noise threshold; nothing to keep\n";
      throw NumericalError("rank selection found no signal");
    }
    rank = sel.rank;
  }
  const auto result = pca_denoise(Z, rank);
  io::write_matrix(a.output, result.Xhat);
  report["rank_used"] = result.rank_used;
  report["singular_values"] = vector_json(result.singular_values);
  report["tie_at_cut"] = result.tie_at_cut;
  if (a.sigma) {
    // Without the clean matrix the denoised one stands in for it.
    const Matrix proxy = a.clean.empty() ? result.Xhat : io::read_matrix(a.clean);
    report["gap_check"] = gap_json(spectral_gap_check(proxy, rank, *a.sigma, a.c1));
    report["gap_check"]["matrix"] = a.clean.empty() ? "denoised" : "clean";
  }
  if (!a.clean.empty()) {
    const Matrix X = io::read_matrix(a.clean);
    report["uniform_error"] = two_inf_norm(result.Xhat - X);
    report["frobenius_error"] = frobenius_norm(result.Xhat - X);
  }
  emit_report(report, a.report);
}

struct MetricsArgs {
  std::string a;
  std::string b;
  std::string rows;
};

void run_metrics(const MetricsArgs& a) {
  const Matrix A = io::read_matrix(a.a);
  const Matrix B = io::read_matrix(a.b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ConfigError("matrices differ in shape");
  const Matrix diff = A - B;
  const Vector per_row = diff.rowwise().norm();
  if (!a.rows.empty()) io::write_matrix(a.rows, per_row);
  emit_report({{"n", diff.rows()},
               {"d", diff.cols()},
               {"uniform_error", two_inf_norm(diff)},
               {"frobenius_error", frobenius_norm(diff)},
               {"average_error", frobenius_norm(diff) / std::sqrt(static_cast<double>(diff.rows()))},
               {"spectral_error", spectral_norm(diff)},
               {"inf_operator_error", inf_operator_norm(diff)}},
              "-");
}

struct ClusterArgs {
  std::string input;
  int k = 2;
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iters = 300;
  std::string labels_out;
  std::string truth;
  std::string clean;
  std::optional<double> epsilon;
  std::string report;
};

void run_cluster(const ClusterArgs& a) {
  const Matrix X = io::read_matrix(a.input);
  const auto result = kmeans(X, a.k, CounterRng(a.seed), {a.max_iters, a.restarts});
  if (!a.labels_out.empty()) io::write_labels(a.labels_out, result.labels);
  json report = {{"loss", result.loss},
                 {"iterations", result.iterations},
                 {"converged", result.converged},
                 {"loss_history", result.loss_history}};
  if (!a.truth.empty()) {
    const Labels truth = io::read_labels(a.truth);
    report["ari"] = adjusted_rand_index(result.labels, truth);
    if (a.k == 2) report["accuracy"] = binary_clustering_accuracy(result.labels, truth);
    double eps = a.epsilon.value_or(0.0);
    Matrix reference = X;
    if (!a.clean.empty()) {
      reference = io::read_matrix(a.clean);
      if (!a.epsilon) eps = two_inf_norm(X - reference);
    }
    report["assumption"] = assumption_json(check_cluster_assumption(reference, truth, eps));
  }
  emit_report(report, a.report);
}

struct LaplacianArgs {
  std::string input;
  double bandwidth = std::sqrt(0.005);
  std::string labels_out;
  std::string fiedler_out;
  std::string truth;
  std::string compare;
  std::string report;
  std::size_t threads = 1;
};

void run_laplacian(const LaplacianArgs& a) {
  const Matrix X = io::read_matrix(a.input);
  const auto lap = normalized_laplacian(X, a.bandwidth, a.threads);
  const Labels labels = sign_cluster(lap.fiedler_vector);
  if (!a.labels_out.empty()) io::write_labels(a.labels_out, labels);
  if (!a.fiedler_out.empty()) io::write_matrix(a.fiedler_out, lap.fiedler_vector);
  json report = {{"n", X.rows()},
                 {"bandwidth", a.bandwidth},
                 {"fiedler_value", lap.fiedler_value},
                 {"smallest_value", lap.smallest_value}};
  if (!a.truth.empty()) {
    const Labels truth = io::read_labels(a.truth);
    report["ari"] = adjusted_rand_index(labels, truth);
    report["accuracy"] = binary_clustering_accuracy(labels, truth);
  }
  if (!a.compare.empty()) {
    const Matrix other = io::read_matrix(a.compare);
    const auto lap2 = normalized_laplacian(other, a.bandwidth, a.threads);
    const Vector aligned = align_sign(lap2.fiedler_vector, lap.fiedler_vector);
    report["compare"] = {{"laplacian_inf_distance", laplacian_inf_distance(lap.L, lap2.L)},
                         {"fiedler_max_abs_diff", (aligned - lap.fiedler_vector).cwiseAbs().maxCoeff()},
                         {"fiedler_value", lap2.fiedler_value}};
  }
  emit_report(report, a.report);
}

struct BoundsArgs {
  std::string mode = "theorem1";
  double n = 0;
  double d = 0;
  double sigma = 0;
  double lambda_r = 0;
  double c2 = 1.0;
  std::string input;
  int rank = 3;
  std::vector<long long> rows;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  bool compare_pca = false;
  std::optional<double> epsilon;
  std::string csv;
  std::string report;
  std::size_t threads = 1;
};

void run_bounds(const BoundsArgs& a) {
  if (a.mode == "theorem1") {
    const auto b = theorem1_bounds(a.n, a.d, a.sigma, a.lambda_r, a.c2);
    emit_report({{"mode", "theorem1"},
                 {"n", a.n},
                 {"d", a.d},
                 {"sigma", a.sigma},
                 {"lambda_r", a.lambda_r},
                 {"c2", b.c2},
                 {"regime", std::string(to_string(b.regime))},
                 {"general_bound", b.general_bound},
                 {"regime_bound", b.regime_bound},
                 {"canonical_bound", b.canonical_bound},
                 {"gamma", b.gamma}},
                a.report);
  } else if (a.mode == "loo") {
    if (a.input.empty()) throw ConfigError("--mode loo needs --input");
    const Matrix Z = io::read_matrix(a.input);
    std::vector<Eigen::Index> rows(a.rows.begin(), a.rows.end());
    if (rows.empty()) rows.push_back(0);
    const auto residuals = leave_one_out_residuals(Z, rows, a.rank);
    json records = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      records.push_back({{"row", rows[i]}, {"residual", residuals[i]}});
    }
    emit_report({{"mode", "loo"}, {"rank", a.rank}, {"records", records}}, a.report);
  } else if (a.mode == "lower") {
    LowerBoundOptions options;
    options.compare_pca = a.compare_pca;
    options.threads = a.threads;
    const auto est = lower_bound_montecarlo(static_cast<Eigen::Index>(a.d),
                                            static_cast<Eigen::Index>(a.n), a.sigma, a.trials,
                                            CounterRng(a.seed), options);
    json report = {{"mode", "lower"},
                   {"n", a.n},
                   {"d", a.d},
                   {"sigma", a.sigma},
                   {"trials", a.trials},
                   {"mean", est.mean},
                   {"standard_error", est.standard_error},
                   {"event_floor", normal_cdf(-1.0) * a.sigma * a.sigma / 16.0}};
    if (a.compare_pca) {
      report["pca_mean"] = est.pca_mean;
      report["pca_standard_error"] = est.pca_standard_error;
    }
    if (a.epsilon) {
      const auto t = lower_bound_thresholds(*a.epsilon, a.d, a.sigma);
      report["thresholds"] = {{"epsilon", t.epsilon},
                              {"sigma_threshold", t.sigma_threshold},
                              {"n_threshold", t.n_threshold}};
    }
    if (!a.csv.empty()) {
      std::ofstream out(a.csv);
      if (!out) throw IoError("cannot write " + a.csv);
      out.precision(17);
      out << "trial,value\n";
      for (std::size_t t = 0; t < est.values.size(); ++t) out << t << "," << est.values[t] << "\n";
    }
    emit_report(report, a.report);
  } else {
    throw ConfigError("--mode must be theorem1, loo or lower");
  }
}

struct ExperimentArgs {
  std::string config;
  std::string out;
  std::optional<std::size_t> threads;
  bool paper_scale = false;
};

void run_experiment_cmd(const ExperimentArgs& a) {
  auto config = experiment::load_config(a.config);
  if (a.threads) config.threads = *a.threads;
  if (a.paper_scale) {
    config.paper_scale = true;
    config.source["paper_scale"] = true;
    for (const auto& name : config.experiments) experiment::resolve(config, name);
  }
  const auto result = experiment::run_all(config, a.out);
  for (const auto& out : result.outputs) {
    std::cerr << out.plan.experiment << ": " << out.rows.size() << " rows in " << out.wall_seconds
              << " s";
    if (!out.warnings.empty()) std::cerr << ", " << out.warnings.size() << " warnings";
    std::cerr << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"udn: PCA denoising with uniform error guarantees"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "sample two-class zigzag data and add noise");
  g->add_option("--n", gen.n, "samples")->check(CLI::PositiveNumber);
  g->add_option("--d", gen.d, "ambient dimension")->check(CLI::PositiveNumber);
  g->add_option("--sigma", gen.sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "base seed");
  g->add_option("--noise", gen.noise, "gaussian, rademacher or uniform");
  g->add_option("--segments", gen.params.segments, "segments per curve");
  g->add_option("--intrinsic-dim", gen.params.intrinsic_dim, "intrinsic dimension r");
  g->add_option("--min-segment", gen.params.min_segment, "minimum segment length rho");
  g->add_option("--separation", gen.params.separation, "gap between the class slabs");
  g->add_option("--curve-radius", gen.params.curve_radius, "maximum curve radius");
  g->add_option("--out-dir", gen.out_dir, "output directory");
  g->add_option("--format", gen.format, "csv or udmx");
  g->add_flag("--embed-model", gen.embed, "store the embedding in model.json");

  DenoiseArgs den;
  auto* dn = app.add_subcommand("denoise", "project rows onto the top-r right singular space");
  dn->add_option("--input", den.input, "noisy matrix Z")->required();
  dn->add_option("--output", den.output, "denoised matrix")->required();
  dn->add_option("--rank", den.rank, "rank r, 0 selects it automatically")->check(CLI::NonNegativeNumber);
  dn->add_option("--max-rank", den.max_rank, "cap for automatic selection");
  dn->add_option("--sigma", den.sigma, "noise level, enables the gap check");
  dn->add_option("--c1", den.c1, "gap-check constant");
  dn->add_option("--clean", den.clean, "clean matrix for error reporting");
  dn->add_option("--report", den.report, "JSON report path (stdout by default)");

  MetricsArgs met;
  auto* mt = app.add_subcommand("metrics", "norms of the difference of two matrices");
  mt->add_option("--a", met.a, "first matrix")->required();
  mt->add_option("--b", met.b, "second matrix")->required();
  mt->add_option("--rows", met.rows, "write per-row errors here");

  ClusterArgs clu;
  auto* cl = app.add_subcommand("cluster", "k-means clustering");
  cl->add_option("--input", clu.input, "data matrix")->required();
  cl->add_option("--k", clu.k, "number of clusters");
  cl->add_option("--seed", clu.seed, "seed");
  cl->add_option("--restarts", clu.restarts, "k-means++ restarts");
  cl->add_option("--max-iters", clu.max_iters, "Lloyd iterations per restart");
  cl->add_option("--labels-out", clu.labels_out, "write labels here");
  cl->add_option("--truth", clu.truth, "true labels for ARI and the assumption check");
  cl->add_option("--clean", clu.clean, "clean matrix; sets epsilon and the assumption reference");
  cl->add_option("--epsilon", clu.epsilon, "perturbation size for the assumption check");
  cl->add_option("--report", clu.report, "JSON report path");

  LaplacianArgs lap;
  auto* lp = app.add_subcommand("laplacian", "normalized Laplacian and Fiedler-sign clustering");
  lp->add_option("--input", lap.input, "data matrix")->required();
  lp->add_option("--bandwidth", lap.bandwidth, "kernel bandwidth b");
  lp->add_option("--labels-out", lap.labels_out, "sign labels");
  lp->add_option("--fiedler-out", lap.fiedler_out, "Fiedler vector");
  lp->add_option("--truth", lap.truth, "true labels");
  lp->add_option("--compare", lap.compare, "second matrix to compare against");
  lp->add_option("--threads", lap.threads, "kernel assembly threads");
  lp->add_option("--report", lap.report, "JSON report path");

  BoundsArgs bnd;
  auto* bd = app.add_subcommand("bounds", "bound evaluators and the lower-bound simulation");
  bd->add_option("--mode", bnd.mode, "theorem1, loo or lower")
      ->check(CLI::IsMember({"theorem1", "loo", "lower"}));
  bd->add_option("--n", bnd.n, "samples");
  bd->add_option("--d", bnd.d, "dimension");
  bd->add_option("--sigma", bnd.sigma, "noise level");
  bd->add_option("--lambda-r", bnd.lambda_r, "r-th singular value of X");
  bd->add_option("--c2", bnd.c2, "constant for the bounds");
  bd->add_option("--input", bnd.input, "noisy matrix for loo");
  bd->add_option("--rank", bnd.rank, "rank for loo");
  bd->add_option("--rows", bnd.rows, "rows to remove for loo")->delimiter(',');
  bd->add_option("--trials", bnd.trials, "Monte-Carlo trials");
  bd->add_option("--seed", bnd.seed, "Monte-Carlo seed");
  bd->add_flag("--compare-pca", bnd.compare_pca, "also run PCA on each draw");
  bd->add_option("--epsilon", bnd.epsilon, "report lower-bound thresholds for this epsilon");
  bd->add_option("--csv", bnd.csv, "per-trial CSV (trial,value)");
  bd->add_option("--threads", bnd.threads, "worker threads");
  bd->add_option("--report", bnd.report, "JSON report path");

  ExperimentArgs exa;
  auto* ex = app.add_subcommand("experiment", "run configured experiments");
  ex->add_option("--config", exa.config, "JSON config")->required();
  ex->add_option("--out", exa.out, "output directory (overrides output_dir)");
  ex->add_option("--threads", exa.threads, "worker threads");
  ex->add_flag("--paper-scale", exa.paper_scale, "use the full-size default grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (g->parsed()) run_generate(gen);
    if (dn->parsed()) run_denoise(den);
    if (mt->parsed()) run_metrics(met);
    if (cl->parsed()) run_cluster(clu);
    if (lp->parsed()) run_laplacian(lap);
    if (bd->parsed()) run_bounds(bnd);
    if (ex->parsed()) run_experiment_cmd(exa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "input/output error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input/output error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
