#include "udn/bounds.hpp"
#include "udn/datagen.hpp"
#include "udn/denoise.hpp"
#include "udn/downstream.hpp"
#include "udn/error.hpp"
#include "udn/experiment.hpp"
#include "udn/linalg.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace udn;

namespace {

py::dict generate(Eigen::Index n, Eigen::Index d, double sigma, std::uint64_t seed, const std::string& noise,
                  int segments, int intrinsic_dim, double min_segment, double separation, double curve_radius) {
  ZigzagParams params{segments, intrinsic_dim, min_segment, separation, curve_radius};
  // Same stream layout as `udn generate`, so a seed gives identical data.
  const CounterRng root(seed);
  CounterRng curve_rng = root.split("curves");
  const auto model = make_two_class_model(params, d, curve_rng, root.split("embedding")());
  CounterRng sample_rng = root.split("sample");
  const auto s = sample_two_class(model, n, sample_rng);
  const Matrix Z = add_noise(s.X, {parse_noise_family(noise), sigma, root.split("noise")()});
  py::dict out;
  out["X"] = s.X;
  out["Z"] = Z;
  out["labels"] = s.labels;
  out["times"] = s.times;
  out["intrinsic"] = s.intrinsic;
  out["embedding"] = model.embedding;
  return out;
}

py::dict denoise(const Matrix& Z, int rank) {
  const auto r = pca_denoise(Z, rank);
  py::dict out;
  out["Xhat"] = r.Xhat;
  out["basis"] = r.basis;
  out["singular_values"] = r.singular_values;
  out["rank"] = r.rank_used;
  out["tie_at_cut"] = r.tie_at_cut;
  return out;
}

py::dict bounds(double n, double d, double sigma, double lambda_r, double c2) {
  const auto b = theorem1_bounds(n, d, sigma, lambda_r, c2);
  py::dict out;
  out["general"] = b.general_bound;
  out["regime"] = b.regime_bound;
  out["canonical"] = b.canonical_bound;
  out["gamma"] = b.gamma;
  out["regime_name"] = std::string(to_string(b.regime));
  return out;
}

py::dict laplacian(const Matrix& X, double bandwidth, std::size_t threads) {
  const auto l = normalized_laplacian(X, bandwidth, threads);
  py::dict out;
  out["L"] = l.L;
  out["degrees"] = l.degrees;
  out["fiedler_value"] = l.fiedler_value;
  out["fiedler_vector"] = l.fiedler_vector;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "PCA denoising with uniform error guarantees";

  // ConfigError derives from std::invalid_argument and arrives as ValueError.
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "svd",
      [](const Matrix& a, Eigen::Index k) {
        auto s = svd(a, k);
        return py::make_tuple(s.left, s.singular_values, s.right);
      },
      py::arg("a"), py::arg("k"), "Top-k singular triplets (U, s, V).");
  m.def("two_inf_norm", &two_inf_norm, py::arg("a"));
  m.def("frobenius_norm", &frobenius_norm, py::arg("a"));
  m.def("spectral_norm", &spectral_norm, py::arg("a"));
  m.def("inf_operator_norm", &inf_operator_norm, py::arg("a"));
  m.def("project_rows", &project_rows, py::arg("a"), py::arg("basis"));

  m.def("generate", &generate, py::arg("n"), py::arg("d"), py::arg("sigma"), py::arg("seed") = 0,
        py::arg("noise") = "gaussian", py::arg("segments") = 10, py::arg("intrinsic_dim") = 3,
        py::arg("min_segment") = 0.05, py::arg("separation") = 0.2, py::arg("curve_radius") = 1.0,
        "Two-class zigzag sample; returns X, Z, labels, times, intrinsic, embedding.");
  m.def(
      "add_noise",
      [](const Matrix& X, double sigma, std::uint64_t seed, const std::string& family) {
        return add_noise(X, {parse_noise_family(family), sigma, seed});
      },
      py::arg("X"), py::arg("sigma"), py::arg("seed"), py::arg("family") = "gaussian");

  m.def("pca_denoise", &denoise, py::arg("Z"), py::arg("rank"));
  m.def(
      "select_rank",
      [](const Matrix& Z, std::optional<double> sigma, int max_rank) { return select_rank(Z, sigma, max_rank).rank; },
      py::arg("Z"), py::arg("sigma") = py::none(), py::arg("max_rank") = 10);

  m.def("theorem1_bounds", &bounds, py::arg("n"), py::arg("d"), py::arg("sigma"), py::arg("lambda_r"),
        py::arg("c2") = 1.0);
  m.def("leave_one_out_residual", &leave_one_out_residual, py::arg("Z"), py::arg("row"), py::arg("rank"));
  m.def("bayes_t_estimator", &bayes_t_estimator, py::arg("z"), py::arg("v_norm"), py::arg("sigma"));
  m.def(
      "lower_bound_montecarlo",
      [](Eigen::Index d, Eigen::Index n, double sigma, std::size_t trials, std::uint64_t seed) {
        const auto e = lower_bound_montecarlo(d, n, sigma, trials, CounterRng(seed));
        return py::make_tuple(e.mean, e.standard_error);
      },
      py::arg("d"), py::arg("n"), py::arg("sigma"), py::arg("trials"), py::arg("seed") = 0,
      "Monte-Carlo (mean, standard error) of the Bayes max-row squared error.");

  m.def(
      "kmeans",
      [](const Matrix& X, int K, std::uint64_t seed, int restarts) {
        KMeansOptions opt;
        opt.restarts = restarts;
        const auto c = kmeans(X, K, CounterRng(seed), opt);
        return py::make_tuple(c.labels, c.centers, c.loss);
      },
      py::arg("X"), py::arg("K"), py::arg("seed") = 0, py::arg("restarts") = 10);
  m.def("normalized_laplacian", &laplacian, py::arg("X"), py::arg("bandwidth"), py::arg("threads") = 1);
  m.def("sign_cluster", &sign_cluster, py::arg("v"));
  m.def("adjusted_rand_index", &adjusted_rand_index, py::arg("a"), py::arg("b"));

  m.def(
      "run_experiments",
      [](const std::string& config_json, const std::string& out_dir) {
        const auto config = experiment::parse_config(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        return experiment::run_all(config, out_dir).manifest.dump();
      },
      py::arg("config_json"), py::arg("out_dir"), "Runs a JSON config; returns the manifest as a JSON string.");
}
