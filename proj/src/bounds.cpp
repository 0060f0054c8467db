#include "udn/bounds.hpp"

#include "udn/denoise.hpp"
#include "udn/error.hpp"
#include "udn/linalg.hpp"
#include "udn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace udn {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double log_normal_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

// log Q(x) = log P(N(0,1) > x) for x >= 0.
double log_upper_tail(double x) {
  if (x < 30.0) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  // Mills-ratio asymptotic series; the next term is below 1e-11 relative.
  const double inv2 = 1.0 / (x * x);
  const double series =
      1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return log_normal_pdf(x) - std::log(x) + std::log(series);
}

// (phi(a) - phi(b)) / (Phi(b) - Phi(a)) for a < b.
double truncated_mills_ratio(double a, double b) {
  if (a >= 0.0) {
    const double log_qa = log_upper_tail(a);
    const double log_qb = log_upper_tail(b);
    const double head = std::exp(log_normal_pdf(a) - log_qa);
    const double num = -std::expm1(0.5 * (a * a - b * b));
    const double den = -std::expm1(log_qb - log_qa);
    return head * num / den;
  }
  if (b <= 0.0) return -truncated_mills_ratio(-b, -a);
  const double den = 1.0 - 0.5 * std::erfc(b / std::numbers::sqrt2) -
                     0.5 * std::erfc(-a / std::numbers::sqrt2);
  return (normal_pdf(a) - normal_pdf(b)) / den;
}

// M(a, b) - a for 0 <= a < b, where M is the ratio above. Written out so
// that the tail case (M ~ a + 1/a) does not lose digits to cancellation.
double mills_excess(double a, double b) {
  const double log_qa = log_upper_tail(a);
  double lam_minus_a = 0.0;
  if (a < 5.0) {
    lam_minus_a = std::exp(log_normal_pdf(a) - log_qa) - a;
  } else {
    // Q(a) / phi(a) = 1 / (a + 1 / (a + 2 / (a + 3 / ...))), so the inverse
    // Mills ratio minus a is the inner fraction.
    double tail = 0.0;
    for (int k = 100; k >= 2; --k) tail = k / (a + tail);
    lam_minus_a = 1.0 / (a + tail);
  }
  const double log_ratio = log_upper_tail(b) - log_qa;
  const double q = std::exp(log_ratio);
  const double e = std::exp(-0.5 * (b - a) * (b + a));
  return lam_minus_a + (lam_minus_a + a) * (q - e) / -std::expm1(log_ratio);
}

void check_bayes_inputs(double z, double v_norm, double sigma) {
  if (!(v_norm > 0.0) || !(sigma > 0.0) || !std::isfinite(z)) {
    throw ConfigError("Bayes estimator needs ||v|| > 0, sigma > 0 and finite z");
  }
}

}  // namespace

std::string_view to_string(BoundRegime regime) noexcept {
  return regime == BoundRegime::kDLarge ? "d_large" : "d_small";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(log_normal_pdf(x)); }

BoundReport theorem1_bounds(double n, double d, double sigma, double lambda_r, double c2) {
  if (!(n >= 1.0) || !(d >= 1.0)) throw ConfigError("bounds need n >= 1 and d >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
  if (!(lambda_r > 0.0)) throw ConfigError("lambda_r must be positive");
  if (!(c2 >= 0.0)) throw ConfigError("c2 must be non-negative");

  const double log_n = std::log(n);
  const double sqrt_log_n = std::sqrt(log_n);
  const double sqrt_n = std::sqrt(n);
  const double sqrt_d = std::sqrt(d);
  const double lam2 = lambda_r * lambda_r;
  const double s2 = sigma * sigma;

  BoundReport out;
  out.c2 = c2;
  const double davis_kahan = sigma * (sqrt_n + sqrt_d) / lambda_r + n * sigma * sqrt_log_n / lam2;
  const double second_order = sigma / lam2 * (std::sqrt(n * d) + n * sqrt_log_n);
  out.gamma = c2 * sigma / lam2 * sqrt_log_n * (n + s2 * n * sqrt_n + s2 * d * sqrt_n) *
              (1.0 + sigma * sqrt_log_n);
  const double correction = out.gamma / lam2 * (1.0 + sigma * (sqrt_d + sqrt_log_n));
  out.general_bound = c2 * std::min(davis_kahan, second_order) + correction;

  if (d >= n) {
    out.regime = BoundRegime::kDLarge;
    const double ratio = d / n;
    out.regime_bound =
        c2 * (std::sqrt(ratio) * sigma *
                  (1.0 + ratio * s2 * sigma * sqrt_log_n + ratio * s2 * s2 * log_n) +
              sqrt_log_n * sigma);
  } else {
    out.regime = BoundRegime::kDSmall;
    out.regime_bound = c2 * sqrt_log_n * sigma * (1.0 + s2 * s2 * std::sqrt(d * log_n / n));
  }
  out.canonical_bound = c2 * sigma * log_n;
  return out;
}

std::vector<double> leave_one_out_residuals(const Matrix& Z, std::span<const Eigen::Index> rows,
                                            int rank) {
  require_nonempty(Z, "leave-one-out input");
  require_finite(Z, "leave-one-out input");
  const auto n = Z.rows();
  if (n < 2) throw ConfigError("leave-one-out needs at least two rows");
  if (rank < 1 || rank > std::min(n - 1, Z.cols())) {
    throw ConfigError("leave-one-out rank must lie in [1, min(n - 1, d)]");
  }
  const Matrix full = svd(Z, rank).right;
  std::vector<double> out;
  out.reserve(rows.size());
  Matrix reduced(n - 1, Z.cols());
  for (const auto row : rows) {
    if (row < 0 || row >= n) {
      throw ConfigError("row index " + std::to_string(row) + " out of range");
    }
    reduced.topRows(row) = Z.topRows(row);
    reduced.bottomRows(n - 1 - row) = Z.bottomRows(n - 1 - row);
    const Matrix loo = svd(reduced, rank).right;
    const Matrix outside = full - loo * (loo.transpose() * full);
    out.push_back(outside.colwise().norm().maxCoeff());
  }
  return out;
}

double leave_one_out_residual(const Matrix& Z, Eigen::Index row, int rank) {
  const Eigen::Index rows[] = {row};
  return leave_one_out_residuals(Z, rows, rank).front();
}

double bayes_t_estimator(double z, double v_norm, double sigma) {
  check_bayes_inputs(z, v_norm, sigma);
  const double mu = z / v_norm;
  const double scale = sigma / v_norm;
  const double a = (1.0 - mu) / scale;
  const double b = (2.0 - mu) / scale;
  double t = 0.0;
  if (a >= 0.0) {
    t = scale * mills_excess(a, b);
  } else if (b <= 0.0) {
    t = 1.0 - scale * mills_excess(-b, -a);
  } else {
    t = mu - 1.0 + scale * truncated_mills_ratio(a, b);
  }
  return std::clamp(t, 0.0, 1.0);
}

double bayes_t_estimator_alternative(double z, double v_norm, double sigma) {
  check_bayes_inputs(z, v_norm, sigma);
  const double mu = z / v_norm;
  const double a = (v_norm - z) / sigma;
  const double b = (2.0 * v_norm - z) / sigma;
  // (phi(b) - phi(a)) / (Phi(b) - Phi(a)) is minus the Mills ratio above.
  return mu - 1.0 - (sigma * sigma) / (v_norm * v_norm) * truncated_mills_ratio(a, b);
}

LowerBoundThresholds lower_bound_thresholds(double epsilon, double d, double sigma) {
  if (!(epsilon > 0.0) || !(epsilon < d / 4.0)) {
    throw ConfigError("epsilon must lie in (0, d / 4)");
  }
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  LowerBoundThresholds out;
  out.epsilon = epsilon;
  out.sigma_threshold = 4.0 * epsilon / std::sqrt(normal_cdf(-1.0));
  out.n_threshold = d * sigma * sigma / (5.0 * epsilon * epsilon);
  return out;
}

MonteCarloEstimate lower_bound_montecarlo(Eigen::Index d, Eigen::Index n, double sigma,
                                          std::size_t trials, const CounterRng& rng,
                                          const LowerBoundOptions& options) {
  if (d < 1 || n < 1) throw ConfigError("lower-bound simulation needs d, n >= 1");
  if (trials < 1) throw ConfigError("lower-bound simulation needs at least one trial");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");

  MonteCarloEstimate out;
  out.values.assign(trials, 0.0);
  if (options.compare_pca) out.pca_values.assign(trials, 0.0);

  parallel_for(trials, options.threads, [&](std::size_t trial) {
    CounterRng draw = rng.split(static_cast<std::uint64_t>(trial));
    Vector v(d);
    const double v_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index k = 0; k < d; ++k) v(k) = v_scale * draw.normal();
    const double v_norm = v.norm();

    Matrix X(n, d);
    Matrix Z(n, d);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = draw.uniform();
      X.row(i) = ((t + 1.0) * v).transpose();
      Z.row(i) = X.row(i);
      for (Eigen::Index k = 0; k < d; ++k) Z(i, k) += sigma * draw.normal();
      double t_hat = t;
      if (sigma > 0.0 && v_norm > 0.0) {
        const double z = Z.row(i).dot(v) / v_norm;
        t_hat = bayes_t_estimator(z, v_norm, sigma);
      }
      const double err = (t_hat - t) * (t_hat - t) * v_norm * v_norm;
      worst = std::max(worst, err);
    }
    out.values[trial] = worst;
    if (options.compare_pca) {
      const Matrix Xhat = pca_denoise(Z, 1).Xhat;
      const double e = two_inf_norm(Xhat - X);
      out.pca_values[trial] = e * e;
    }
  });

  auto summarize = [&](const std::vector<double>& values, double& mean, double& se) {
    double sum = 0.0;
    for (double x : values) sum += x;
    mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) {
      se = 0.0;
      return;
    }
    double ss = 0.0;
    for (double x : values) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                   static_cast<double>(values.size()));
  };
  summarize(out.values, out.mean, out.standard_error);
  if (options.compare_pca) summarize(out.pca_values, out.pca_mean, out.pca_standard_error);
  return out;
}

}  // namespace udn
