#pragma once

#include "udn/matrix.hpp"

#include <optional>

namespace udn {

struct DenoiseResult {
  Matrix Xhat;             // Z * basis * basis^T
  Matrix basis;            // d x r top right singular vectors of Z
  Vector singular_values;  // every singular value of Z that was computed
  int rank_used = 0;
  // sigma_r and sigma_{r+1} of Z coincide, so the basis is one arbitrary
  // (but deterministic) choice inside the tied subspace.
  bool tie_at_cut = false;
};

/// PCA denoising: project every row of Z onto the span of its top-r right
/// singular vectors.
DenoiseResult pca_denoise(const Matrix& Z, int rank);

struct RankSelection {
  int rank = 0;
  double threshold = 0.0;  // only meaningful in the sigma-hint mode
  bool no_signal = false;  // set when nothing clears the threshold
};

/// With a noise level: number of singular values above
/// 1.5 * sigma * (sqrt(n) + sqrt(d)), capped at max_rank. Without one: the k
/// maximizing s_k / s_{k+1} over k <= max_rank.
RankSelection select_rank(const Matrix& Z, std::optional<double> sigma_hint, int max_rank);

struct SpectralGapReport {
  double lambda_r = 0.0;
  double threshold = 0.0;  // 1 + c1 * sigma * (sqrt(n) + sqrt(d))
  double c1 = 1.0;
  bool satisfied = false;  // lambda_r > threshold
};

/// Checks lambda_r(X) > 1 + c1 sigma (sqrt(n) + sqrt(d)) for the clean
/// matrix, or for a proxy such as the denoised matrix when X is unknown.
SpectralGapReport spectral_gap_check(const Matrix& X, int rank, double sigma, double c1 = 1.0);

}  // namespace udn
