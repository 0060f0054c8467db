#pragma once

#include "udn/matrix.hpp"
#include "udn/rng.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace udn {

enum class BoundRegime { kDLarge, kDSmall };

std::string_view to_string(BoundRegime regime) noexcept;

/// Upper bounds on ||Xhat - X||_{2,inf} for PCA denoising, with every
/// unspecified constant set to c2.
struct BoundReport {
  double general_bound = 0.0;    // two-term minimum plus the Gamma correction
  double regime_bound = 0.0;     // simplified form for lambda_r ~ sqrt(n)
  double canonical_bound = 0.0;  // c2 sigma log n
  double gamma = 0.0;            // the Gamma term of the correction
  double c2 = 1.0;
  BoundRegime regime = BoundRegime::kDLarge;  // d >= n
};

BoundReport theorem1_bounds(double n, double d, double sigma, double lambda_r, double c2 = 1.0);

/// max_k ||(I - V~ V~^T) vhat_k|| where vhat_k are the top-r right singular
/// vectors of Z and V~ spans those of Z with row `row` deleted.
double leave_one_out_residual(const Matrix& Z, Eigen::Index row, int rank);

/// Same quantity for several removed rows, sharing the full-data SVD.
std::vector<double> leave_one_out_residuals(const Matrix& Z, std::span<const Eigen::Index> rows,
                                            int rank);

/// Posterior mean of t given z = Z_i^T v / ||v|| in the single-segment model
/// X_i = (t + 1) v, t ~ U(0, 1), with Gaussian noise of level sigma: the mean
/// of N(z / ||v||, (sigma / ||v||)^2) truncated to [1, 2], minus one.
/// Evaluated through log-tail ratios so that it stays finite for small sigma.
double bayes_t_estimator(double z, double v_norm, double sigma);

/// Alternative closed form with a sigma^2 / ||v||^2 prefactor and
/// phi(b) - phi(a) in the numerator. Kept so that its disagreement with the
/// posterior mean can be measured; no estimator here uses it.
double bayes_t_estimator_alternative(double z, double v_norm, double sigma);

/// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

struct LowerBoundThresholds {
  double epsilon = 0.0;
  double sigma_threshold = 0.0;  // 4 eps / sqrt(Phi(-1))
  double n_threshold = 0.0;      // d sigma^2 / (5 eps^2)
};

/// Requires 0 < epsilon < d / 4 and sigma > 0.
LowerBoundThresholds lower_bound_thresholds(double epsilon, double d, double sigma);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<double> values;  // one per trial
  // Filled when PCA is compared on the same draws.
  double pca_mean = 0.0;
  double pca_standard_error = 0.0;
  std::vector<double> pca_values;
};

struct LowerBoundOptions {
  bool compare_pca = false;
  std::size_t threads = 1;
};

/// Monte-Carlo mean over trials of max_i ||Xhat_i - X_i||^2 in the
/// single-segment model (v ~ N(0, I/d), t_i ~ U(0, 1), Z_i = (t_i + 1) v +
/// N(0, sigma^2 I)), where Xhat_i = (that_i + 1) v uses the known-v Bayes
/// estimator. Trial k draws from rng.split(k).
MonteCarloEstimate lower_bound_montecarlo(Eigen::Index d, Eigen::Index n, double sigma,
                                          std::size_t trials, const CounterRng& rng,
                                          const LowerBoundOptions& options = {});

}  // namespace udn
