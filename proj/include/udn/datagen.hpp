#pragma once

#include "udn/matrix.hpp"
#include "udn/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace udn {

/// A piecewise-linear path t -> x(t) in R^r, t in [0, 1].
///
/// Segment j runs over [t_j, t_{j+1}] with unit direction v_j. The raw path
/// starts at `anchor` and is then mapped as
///   x(t) = scale * (raw(t) - mean_offset) + shift,
/// where `mean_offset` is the mean of the raw path under t ~ U[0, 1]. For a
/// standalone curve `shift` is zero, so x has zero mean, and `scale` is
/// chosen so that the largest point norm equals one.
struct ZigzagCurve {
  std::vector<double> breakpoints;  // R + 1 values, 0 = t_1 < ... < t_{R+1} = 1
  Matrix directions;                // r x R, unit-norm columns
  Vector anchor;
  Vector mean_offset;
  double scale = 1.0;
  Vector shift;
  double min_segment = 0.0;  // rho

  [[nodiscard]] int segments() const noexcept { return static_cast<int>(directions.cols()); }
  [[nodiscard]] int intrinsic_dim() const noexcept { return static_cast<int>(directions.rows()); }
  /// The R + 1 points x(t_j), one per column.
  [[nodiscard]] Matrix corners() const;
};

/// Builds a centered, unit-ball-rescaled curve from explicit breakpoints and
/// directions. Directions are normalized; breakpoints must start at 0, end
/// at 1, and be strictly increasing.
ZigzagCurve make_zigzag(std::vector<double> breakpoints, Matrix directions, double min_segment);

/// Random zigzag curve with `segments` pieces in R^intrinsic_dim, every
/// segment at least `min_segment` long in t, and directions spanning the
/// whole intrinsic space.
ZigzagCurve generate_zigzag(int segments, int intrinsic_dim, double min_segment, CounterRng& rng);

/// x(t); throws ConfigError for t outside [0, 1].
Vector sample_curve(const ZigzagCurve& curve, double t);

struct CurveCovariance {
  Matrix covariance;         // cov(x(t)), t ~ U[0, 1], closed form
  double lambda_r = 0.0;     // r-th largest eigenvalue of `covariance`
  double lambda_r_unit_speed = 0.0;  // same, before the scale factor is applied
  double analytic_floor = 0.0;       // rho^3 / 3 - rho^4 / 4
  double segment_floor = 0.0;        // rho^3 / 12, exact per-segment variance floor
  double direction_factor = 0.0;     // squared r-th singular value of the direction matrix
};

/// Closed-form covariance of a curve point under uniform t, together with
/// the eigenvalue floors used to argue that lambda_r(X) grows like sqrt(n).
CurveCovariance curve_covariance_bound(const ZigzagCurve& curve);

/// Two classes of zigzag curves embedded in R^d.
///
/// Class 0 lives in the slab {x_1 <= -separation / 2} and class 1 in
/// {x_1 >= +separation / 2} of the intrinsic space; both lie in the unit
/// ball. `embedding` is d x r with orthonormal columns.
struct TwoClassZigzagModel {
  ZigzagCurve curve0;
  ZigzagCurve curve1;
  double separation = 0.2;
  Matrix embedding;
  std::uint64_t embedding_seed = 0;

  [[nodiscard]] Eigen::Index ambient_dim() const noexcept { return embedding.rows(); }
  [[nodiscard]] int intrinsic_dim() const noexcept { return curve0.intrinsic_dim(); }
  [[nodiscard]] const ZigzagCurve& curve(int label) const noexcept {
    return label == 0 ? curve0 : curve1;
  }
};

struct ZigzagParams {
  int segments = 10;
  int intrinsic_dim = 3;
  double min_segment = 0.05;
  double separation = 0.2;
  // Upper bound on each curve's radius around its own mean; 1 lets the
  // curves fill as much of the unit ball as the slabs allow.
  double curve_radius = 1.0;
};

/// Random d x r matrix with orthonormal columns, Haar distributed: the Q
/// factor of a Gaussian matrix with the signs of R's diagonal made positive.
Matrix orthonormal_embedding(Eigen::Index d, Eigen::Index r, CounterRng& rng);

/// Two fresh curves drawn from `curve_rng` plus an embedding drawn from
/// `embedding_seed`. Keeping the seeds separate lets experiments hold the
/// curves fixed while varying d.
TwoClassZigzagModel make_two_class_model(const ZigzagParams& params, Eigen::Index ambient_dim,
                                         CounterRng& curve_rng, std::uint64_t embedding_seed);

/// Same curves, new embedding dimension.
TwoClassZigzagModel reembed(const TwoClassZigzagModel& model, Eigen::Index ambient_dim);

struct LabeledSample {
  Matrix X;          // n x d clean data
  Matrix intrinsic;  // n x r, X = intrinsic * embedding^T
  Labels labels;     // 0 or 1
  std::vector<double> times;
};

/// n draws of label ~ Bernoulli(1/2), t ~ U[0, 1], X_i = Omega x_label(t).
/// Each row consumes exactly two outputs of `rng`: the label, then t.
LabeledSample sample_two_class(const TwoClassZigzagModel& model, Eigen::Index n, CounterRng& rng);

enum class NoiseFamily { kGaussian, kRademacher, kUniform };

NoiseFamily parse_noise_family(std::string_view name);
std::string_view to_string(NoiseFamily family) noexcept;

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::kGaussian;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Z = X + E with E i.i.d. mean 0, variance sigma^2, filled row by row.
/// sigma = 0 returns X unchanged.
Matrix add_noise(const Matrix& X, const NoiseSpec& spec);

// JSON round trip. The embedding is written only when `include_embedding`
// is set; otherwise it is regenerated from embedding_seed and the stored
// ambient dimension.
nlohmann::json to_json(const ZigzagCurve& curve);
ZigzagCurve curve_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TwoClassZigzagModel& model, bool include_embedding);
TwoClassZigzagModel model_from_json(const nlohmann::json& j);

}  // namespace udn
