#pragma once

#include "udn/matrix.hpp"
#include "udn/rng.hpp"

#include <cstddef>
#include <vector>

namespace udn {

// ---------------------------------------------------------------------------
// k-means

struct Clustering {
  Labels labels;  // values in [0, K)
  Matrix centers; // K x d
  // (1/n) sum_k sum_{i in C_k} ||X_i - m_k||^2. The unnormalized sum is
  // loss * n.
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
  // Loss after every assignment step of the winning restart.
  std::vector<double> loss_history;
};

struct KMeansOptions {
  int max_iters = 300;
  int restarts = 10;
};

/// Lloyd's algorithm from k-means++ seeding, best of `restarts` runs
/// (restart k draws from rng.split(k)). A cluster that empties is re-seeded
/// at the point farthest from its assigned center, lowest index first.
Clustering kmeans(const Matrix& X, int K, const CounterRng& rng, const KMeansOptions& options = {});

/// Mean squared distance of rows to the center of their label.
double kmeans_loss(const Matrix& X, const Labels& labels, const Matrix& centers);

struct AssumptionThresholds {
  double c0 = 0.0;
  double delta = 1e300;
  double cm = 0.0;
};

struct AssumptionReport {
  int clusters = 0;
  bool defined = false;             // false when there is a single cluster
  double observed_min_frac = 0.0;   // c0
  double observed_max_radius = 0.0; // delta
  double observed_min_center_gap = 0.0;  // c_m
  double epsilon = 0.0;
  double required_gap = 0.0;  // 2 (delta + eps + 2 sqrt(2 (delta^2 + eps^2) / c0))
  bool c0_ok = false;
  bool delta_ok = false;
  bool cm_ok = false;
  bool margin_ok = false;  // c_m > required_gap
};

/// Measures the cluster-regularity constants of a labeled data set around
/// its empirical centers and evaluates the exact-recovery margin for a
/// uniform perturbation of size epsilon.
AssumptionReport check_cluster_assumption(const Matrix& X, const Labels& labels, double epsilon,
                                          const AssumptionThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Graph Laplacian

struct LaplacianResult {
  Matrix L;        // I - D^{-1/2} A D^{-1/2}
  Vector degrees;  // row sums of A, including A_ii = 1
  double fiedler_value = 0.0;
  // Unit-norm eigenvector of the second-smallest eigenvalue, taken orthogonal
  // to the trivial eigenvector D^{1/2} 1.
  Vector fiedler_vector;
  double smallest_value = 0.0;  // Rayleigh quotient of D^{1/2} 1, zero up to rounding
};

/// Gaussian-kernel normalized Laplacian, A_ij = exp(-||X_i - X_j||^2 / (2 b^2)).
/// Kernel assembly runs over fixed 64-row blocks on `threads` workers, so
/// the result does not depend on the worker count.
LaplacianResult normalized_laplacian(const Matrix& X, double bandwidth, std::size_t threads = 1);

/// ||L1 - L2||_inf (max absolute row sum).
double laplacian_inf_distance(const Matrix& L1, const Matrix& L2);

/// label_i = 1 if v_i >= 0 else 0.
Labels sign_cluster(const Vector& v);

/// Flips `v` if needed so that its inner product with `reference` is >= 0.
Vector align_sign(const Vector& v, const Vector& reference);

// ---------------------------------------------------------------------------
// Agreement measures

/// Adjusted Rand index under the permutation model. Two partitions that are
/// both a single cluster (zero denominator) score 1.
double adjusted_rand_index(const Labels& a, const Labels& b);

/// Fraction of matching labels after the best relabeling of `b`
/// (labels in {0, 1} only).
double binary_clustering_accuracy(const Labels& a, const Labels& b);

// ---------------------------------------------------------------------------
// Averaged-error comparison matrix

struct AverageErrorMatrix {
  Matrix Xtilde;
  std::vector<Eigen::Index> corrupted;  // sorted
  double alpha = 1.0;
  bool clamped = false;  // target error exceeds the available noise; alpha = 0
};

/// Matches the total squared error of Xhat but concentrates it on
/// ceil(fraction * n) random rows: Xtilde_i = alpha X_i + (1 - alpha) Z_i on
/// the chosen rows and X_i elsewhere.
AverageErrorMatrix make_average_error_matrix(const Matrix& X, const Matrix& Z, const Matrix& Xhat,
                                             double fraction, CounterRng& rng);

// ---------------------------------------------------------------------------
// ERM loss gap (least squares)

struct ErmGap {
  double gap = 0.0;    // |f(theta_hat) - f(theta)| on the clean empirical risk
  double bound = 0.0;  // 2 L epsilon
  double epsilon = 0.0;
  double lipschitz = 0.0;
  Vector theta_clean;
  Vector theta_denoised;
};

/// Fits least squares on X and on Xhat and compares the clean-data risk
/// f(theta) = (1/n) sum 1/2 (theta^T X_i - y_i)^2 at both minimizers. L is the
/// largest ||grad_x F|| = |theta^T x - y| ||theta|| over both fits and both
/// data sets, which bounds the Lipschitz constant on every segment
/// [X_i, Xhat_i].
ErmGap erm_gap_check(const Matrix& X, const Matrix& Xhat, const Vector& y);

}  // namespace udn
