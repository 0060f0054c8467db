#include "udn/denoise.hpp"

#include "udn/error.hpp"
#include "udn/linalg.hpp"
#include "udn/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace udn {

DenoiseResult pca_denoise(const Matrix& Z, int rank) {
  require_nonempty(Z, "noisy matrix");
  require_finite(Z, "noisy matrix");
  const auto min_dim = std::min(Z.rows(), Z.cols());
  if (rank < 1 || rank > min_dim) {
    throw ConfigError("rank r=" + std::to_string(rank) + " outside [1, " +
                      std::to_string(min_dim) + "]");
  }
  // One extra triplet lets us detect a tie at the cut.
  const Eigen::Index want = std::min<Eigen::Index>(rank + 1, min_dim);
  SvdResult triplets = svd(Z, want);

  DenoiseResult out;
  out.rank_used = rank;
  out.basis = triplets.right.leftCols(rank);
  out.singular_values = triplets.spectrum;
  out.Xhat = (Z * out.basis) * out.basis.transpose();
  if (want > rank) {
    const double top = triplets.singular_values(0);
    const double gap = triplets.singular_values(rank - 1) - triplets.singular_values(rank);
    out.tie_at_cut = top > 0.0 && gap <= tol::kSingularTie * top;
  }
  return out;
}

RankSelection select_rank(const Matrix& Z, std::optional<double> sigma_hint, int max_rank) {
  require_nonempty(Z, "noisy matrix");
  require_finite(Z, "noisy matrix");
  const auto min_dim = static_cast<int>(std::min(Z.rows(), Z.cols()));
  if (max_rank < 1) throw ConfigError("max_rank must be at least 1");
  max_rank = std::min(max_rank, min_dim);

  const Eigen::Index want = std::min(max_rank + 1, min_dim);
  const Vector s = svd(Z, want).singular_values;

  RankSelection out;
  if (sigma_hint) {
    if (!(*sigma_hint >= 0.0)) throw ConfigError("sigma hint must be non-negative");
    const double n = static_cast<double>(Z.rows());
    const double d = static_cast<double>(Z.cols());
    out.threshold = tol::kRankThresholdFactor * *sigma_hint * (std::sqrt(n) + std::sqrt(d));
    int count = 0;
    while (count < max_rank && s(count) > out.threshold) ++count;
    out.rank = count;
    out.no_signal = count == 0;
    return out;
  }

  if (s(0) == 0.0) {
    out.no_signal = true;
    return out;
  }
  if (min_dim == 1) {
    out.rank = 1;
    return out;
  }
  // A next value at round-off level counts as an infinite ratio; the first
  // such k wins.
  const double floor = 1e-13 * s(0);
  const int last = std::min(max_rank, min_dim - 1);
  int best = 1;
  double best_ratio = -1.0;
  for (int k = 1; k <= last; ++k) {
    if (s(k) <= floor) {
      out.rank = k;
      return out;
    }
    const double ratio = s(k - 1) / s(k);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = k;
    }
  }
  out.rank = best;
  return out;
}

SpectralGapReport spectral_gap_check(const Matrix& X, int rank, double sigma, double c1) {
  require_nonempty(X, "gap-check matrix");
  require_finite(X, "gap-check matrix");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  const auto min_dim = std::min(X.rows(), X.cols());
  if (rank < 1 || rank > min_dim) {
    throw ConfigError("rank r=" + std::to_string(rank) + " outside [1, " +
                      std::to_string(min_dim) + "]");
  }
  SpectralGapReport out;
  out.c1 = c1;
  out.lambda_r = svd(X, rank).singular_values(rank - 1);
  const double n = static_cast<double>(X.rows());
  const double d = static_cast<double>(X.cols());
  out.threshold = 1.0 + c1 * sigma * (std::sqrt(n) + std::sqrt(d));
  out.satisfied = out.lambda_r > out.threshold;
  return out;
}

}  // namespace udn
