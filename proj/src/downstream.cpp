#include "udn/downstream.hpp"

#include "udn/error.hpp"
#include "udn/linalg.hpp"
#include "udn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace udn {
namespace {

constexpr Eigen::Index kKernelBlock = 64;

Eigen::Index nearest_center(const Matrix& X, Eigen::Index i, const Matrix& centers,
                            double* distance = nullptr) {
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    const double dist = (X.row(i) - centers.row(k)).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  if (distance) *distance = best_dist;
  return best;
}

Matrix cluster_means(const Matrix& X, const Labels& labels, Eigen::Index K, const Matrix& fallback) {
  Matrix centers = Matrix::Zero(K, X.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(K), 0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto k = labels[static_cast<std::size_t>(i)];
    centers.row(k) += X.row(i);
    ++counts[static_cast<std::size_t>(k)];
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto count = counts[static_cast<std::size_t>(k)];
    if (count > 0) {
      centers.row(k) /= static_cast<double>(count);
    } else {
      centers.row(k) = fallback.row(k);
    }
  }
  return centers;
}

Matrix kmeanspp_seed(const Matrix& X, int K, CounterRng& rng) {
  const Eigen::Index n = X.rows();
  Matrix centers(K, X.cols());
  centers.row(0) = X.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector best = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < K; ++k) {
    const double total = best.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += best(i);
        if (acc > target && best(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(k) = X.row(pick);
    best = best.cwiseMin((X.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  return centers;
}

// Moves the farthest point of a non-singleton cluster into every empty
// cluster. Returns true if anything changed.
bool fill_empty_clusters(const Matrix& X, Labels& labels, Matrix& centers) {
  const auto K = centers.rows();
  bool changed = false;
  while (true) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(K), 0);
    for (int label : labels) ++counts[static_cast<std::size_t>(label)];
    const auto empty = std::find(counts.begin(), counts.end(), 0);
    if (empty == counts.end()) return changed;
    const auto target = static_cast<int>(empty - counts.begin());
    Eigen::Index far = -1;
    double far_dist = -1.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int label = labels[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(label)] < 2) continue;
      const double dist = (X.row(i) - centers.row(label)).squaredNorm();
      if (dist > far_dist) {
        far_dist = dist;
        far = i;
      }
    }
    if (far < 0) throw NumericalError("k-means cannot fill an empty cluster");
    labels[static_cast<std::size_t>(far)] = target;
    centers.row(target) = X.row(far);
    changed = true;
  }
}

Clustering lloyd(const Matrix& X, int K, CounterRng& rng, int max_iters) {
  const Eigen::Index n = X.rows();
  Matrix centers = kmeanspp_seed(X, K, rng);
  Labels labels(static_cast<std::size_t>(n), 0);

  auto assign = [&] {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = static_cast<int>(nearest_center(X, i, centers));
      if (labels[static_cast<std::size_t>(i)] != k) {
        labels[static_cast<std::size_t>(i)] = k;
        moved = true;
      }
    }
    return moved;
  };

  Clustering out;
  assign();
  fill_empty_clusters(X, labels, centers);
  out.loss_history.push_back(kmeans_loss(X, labels, centers));
  int iter = 0;
  bool converged = false;
  while (iter < max_iters) {
    ++iter;
    centers = cluster_means(X, labels, K, centers);
    bool moved = assign();
    moved = fill_empty_clusters(X, labels, centers) || moved;
    out.loss_history.push_back(kmeans_loss(X, labels, centers));
    if (!moved) {
      converged = true;
      break;
    }
  }
  out.centers = cluster_means(X, labels, K, centers);
  out.labels = std::move(labels);
  out.loss = kmeans_loss(X, out.labels, out.centers);
  out.loss_history.push_back(out.loss);
  out.iterations = iter;
  out.converged = converged;
  return out;
}

}  // namespace

double kmeans_loss(const Matrix& X, const Labels& labels, const Matrix& centers) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw ConfigError("label count does not match the number of rows");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    total += (X.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total / static_cast<double>(X.rows());
}

Clustering kmeans(const Matrix& X, int K, const CounterRng& rng, const KMeansOptions& options) {
  require_nonempty(X, "k-means input");
  require_finite(X, "k-means input");
  if (K < 1 || K > X.rows()) {
    throw ConfigError("k-means needs 1 <= K <= n (got K=" + std::to_string(K) + ")");
  }
  if (options.restarts < 1 || options.max_iters < 1) {
    throw ConfigError("k-means needs restarts >= 1 and max_iters >= 1");
  }
  Clustering best;
  for (int restart = 0; restart < options.restarts; ++restart) {
    CounterRng stream = rng.split(static_cast<std::uint64_t>(restart));
    Clustering run = lloyd(X, K, stream, options.max_iters);
    if (restart == 0 || run.loss < best.loss) best = std::move(run);
  }
  return best;
}

AssumptionReport check_cluster_assumption(const Matrix& X, const Labels& labels, double epsilon,
                                          const AssumptionThresholds& thresholds) {
  require_nonempty(X, "cluster data");
  require_finite(X, "cluster data");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw ConfigError("label count does not match the number of rows");
  }
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  const int K = *std::max_element(labels.begin(), labels.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0) {
    throw ConfigError("labels must be non-negative");
  }
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(K), 0);
  for (int label : labels) ++counts[static_cast<std::size_t>(label)];
  if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
    throw ConfigError("labels must use every value in [0, K)");
  }
  const Matrix centers = cluster_means(X, labels, K, Matrix::Zero(K, X.cols()));

  AssumptionReport out;
  out.clusters = K;
  out.epsilon = epsilon;
  out.observed_min_frac = static_cast<double>(*std::min_element(counts.begin(), counts.end())) /
                          static_cast<double>(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.observed_max_radius = std::max(
        out.observed_max_radius, (X.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).norm());
  }
  const double delta = out.observed_max_radius;
  out.required_gap =
      2.0 * (delta + epsilon +
             2.0 * std::sqrt(2.0 * (delta * delta + epsilon * epsilon) / out.observed_min_frac));
  out.c0_ok = out.observed_min_frac >= thresholds.c0;
  out.delta_ok = delta <= thresholds.delta;
  out.defined = K >= 2;
  if (!out.defined) {
    out.observed_min_center_gap = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double gap = std::numeric_limits<double>::infinity();
  for (int j = 0; j < K; ++j) {
    for (int k = j + 1; k < K; ++k) gap = std::min(gap, (centers.row(j) - centers.row(k)).norm());
  }
  out.observed_min_center_gap = gap;
  out.cm_ok = gap >= thresholds.cm;
  out.margin_ok = gap > out.required_gap;
  return out;
}

LaplacianResult normalized_laplacian(const Matrix& X, double bandwidth, std::size_t threads) {
  require_nonempty(X, "Laplacian input");
  require_finite(X, "Laplacian input");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ConfigError("kernel bandwidth must be positive");
  }
  const Eigen::Index n = X.rows();
  if (n < 2) throw ConfigError("Laplacian needs at least two points");

  const Vector sq = X.rowwise().squaredNorm();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Matrix A(n, n);
  const auto blocks = static_cast<std::size_t>((n + kKernelBlock - 1) / kKernelBlock);
  parallel_for(blocks, threads, [&](std::size_t block) {
    const Eigen::Index start = static_cast<Eigen::Index>(block) * kKernelBlock;
    const Eigen::Index rows = std::min(kKernelBlock, n - start);
    const Matrix gram = X.middleRows(start, rows) * X.bottomRows(n - start).transpose();
    for (Eigen::Index a = 0; a < rows; ++a) {
      const Eigen::Index i = start + a;
      A(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dist = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(a, j - start));
        A(i, j) = std::exp(scale * dist);
      }
    }
  });
  A.triangularView<Eigen::StrictlyLower>() = A.transpose();

  LaplacianResult out;
  out.degrees = A.rowwise().sum();
  const Vector inv_sqrt = out.degrees.cwiseSqrt().cwiseInverse();
  out.L.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out.L(i, j) = (i == j ? 1.0 : 0.0) - A(i, j) * (inv_sqrt(i) * inv_sqrt(j));
    }
  }
  // D^{1/2} 1 spans the null space of L exactly. Lifting it to eigenvalue 3
  // (the spectrum of L lies in [0, 2]) makes the Fiedler vector the smallest
  // eigenvector of the deflated matrix even when the graph is numerically
  // disconnected and the two smallest eigenvalues of L are both ~1e-16.
  const Vector trivial = out.degrees.cwiseSqrt().normalized();
  Matrix deflated = out.L;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) deflated(i, j) += 3.0 * (trivial(i) * trivial(j));
  }
  const EigPairs pairs = sym_eig_smallest(deflated, 1);
  out.smallest_value = trivial.dot(out.L * trivial);
  out.fiedler_value = pairs.eigenvalues(0);
  out.fiedler_vector = pairs.eigenvectors.col(0);
  return out;
}

double laplacian_inf_distance(const Matrix& L1, const Matrix& L2) {
  if (L1.rows() != L2.rows() || L1.cols() != L2.cols()) {
    throw ConfigError("Laplacians have different shapes");
  }
  return inf_operator_norm(L1 - L2);
}

Labels sign_cluster(const Vector& v) {
  Labels out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i) >= 0.0 ? 1 : 0;
  return out;
}

Vector align_sign(const Vector& v, const Vector& reference) {
  if (v.size() != reference.size()) throw ConfigError("vectors have different lengths");
  return v.dot(reference) < 0.0 ? Vector(-v) : v;
}

double adjusted_rand_index(const Labels& a, const Labels& b) {
  if (a.size() != b.size()) throw ConfigError("labelings have different lengths");
  if (a.size() < 2) throw ConfigError("ARI needs at least two points");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double m) { return 0.5 * m * (m - 1.0); };
  double index = 0.0;
  for (const auto& [key, count] : table) index += pairs(count);
  double sum_rows = 0.0;
  for (const auto& [key, count] : rows) sum_rows += pairs(count);
  double sum_cols = 0.0;
  for (const auto& [key, count] : cols) sum_cols += pairs(count);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(a.size()));
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

double binary_clustering_accuracy(const Labels& a, const Labels& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ConfigError("labelings must be non-empty and of equal length");
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1)) {
      throw ConfigError("binary accuracy needs labels in {0, 1}");
    }
    agree += a[i] == b[i] ? 1 : 0;
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(a.size());
  return std::max(frac, 1.0 - frac);
}

AverageErrorMatrix make_average_error_matrix(const Matrix& X, const Matrix& Z, const Matrix& Xhat,
                                             double fraction, CounterRng& rng) {
  if (X.rows() != Z.rows() || X.cols() != Z.cols() || X.rows() != Xhat.rows() ||
      X.cols() != Xhat.cols()) {
    throw ConfigError("X, Z and Xhat must have the same shape");
  }
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("fraction must lie in (0, 1)");
  require_nonempty(X, "clean matrix");
  const Eigen::Index n = X.rows();
  const auto count = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9)), 1, n);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto j = k + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(j)]);
  }
  AverageErrorMatrix out;
  out.corrupted.assign(order.begin(), order.begin() + count);
  std::sort(out.corrupted.begin(), out.corrupted.end());

  const double target = (X - Xhat).squaredNorm();
  double available = 0.0;
  for (auto i : out.corrupted) available += (Z.row(i) - X.row(i)).squaredNorm();

  if (available == 0.0) {
    if (target != 0.0) {
      throw NumericalError("corrupted rows carry no noise, so the target error is unreachable");
    }
    out.alpha = 1.0;
  } else if (target > available) {
    out.alpha = 0.0;
    out.clamped = true;
  } else {
    out.alpha = 1.0 - std::sqrt(target / available);
  }
  out.Xtilde = X;
  for (auto i : out.corrupted) {
    out.Xtilde.row(i) = out.alpha * X.row(i) + (1.0 - out.alpha) * Z.row(i);
  }
  return out;
}

ErmGap erm_gap_check(const Matrix& X, const Matrix& Xhat, const Vector& y) {
  require_nonempty(X, "ERM design");
  require_finite(X, "ERM design");
  require_finite(Xhat, "ERM denoised design");
  if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols()) {
    throw ConfigError("X and Xhat must have the same shape");
  }
  if (y.size() != X.rows()) throw ConfigError("response length does not match the rows");

  auto fit = [&](const Matrix& design) {
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < design.cols()) {
      throw NumericalError("least-squares design is rank deficient");
    }
    return Vector(qr.solve(y));
  };
  auto risk = [&](const Vector& theta) {
    return 0.5 * (X * theta - y).squaredNorm() / static_cast<double>(X.rows());
  };

  ErmGap out;
  out.theta_clean = fit(X);
  out.theta_denoised = fit(Xhat);
  out.gap = std::abs(risk(out.theta_denoised) - risk(out.theta_clean));
  out.epsilon = two_inf_norm(Xhat - X);
  for (const Vector* theta : {&out.theta_clean, &out.theta_denoised}) {
    const double norm = theta->norm();
    for (const Matrix* design : {&X, &Xhat}) {
      const double worst = ((*design) * (*theta) - y).cwiseAbs().maxCoeff();
      out.lipschitz = std::max(out.lipschitz, worst * norm);
    }
  }
  out.bound = 2.0 * out.lipschitz * out.epsilon;
  return out;
}

}  // namespace udn
