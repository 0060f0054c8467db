#include "udn/datagen.hpp"

#include "udn/error.hpp"
#include "udn/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace udn {
namespace {

// Raw corner positions (anchor at the first breakpoint) and the mean of the
// raw path under uniform t.
struct RawPath {
  Matrix corners;  // r x (R + 1)
  Vector mean;
};

RawPath raw_path(const std::vector<double>& breakpoints, const Matrix& directions,
                 const Vector& anchor) {
  const auto segments = directions.cols();
  RawPath out{Matrix(directions.rows(), segments + 1), Vector::Zero(directions.rows())};
  out.corners.col(0) = anchor;
  for (Eigen::Index j = 0; j < segments; ++j) {
    const double len = breakpoints[j + 1] - breakpoints[j];
    out.corners.col(j + 1) = out.corners.col(j) + len * directions.col(j);
    out.mean += len * out.corners.col(j) + 0.5 * len * len * directions.col(j);
  }
  return out;
}

Eigen::Index segment_of(const std::vector<double>& breakpoints, double t) {
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  auto idx = static_cast<Eigen::Index>(it - breakpoints.begin()) - 1;
  const auto last = static_cast<Eigen::Index>(breakpoints.size()) - 2;
  return std::clamp<Eigen::Index>(idx, 0, last);
}

Matrix json_to_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) {
      throw ConfigError("ragged matrix in JSON");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  auto j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(std::move(row));
  }
  return j;
}

Vector json_to_vector(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

nlohmann::json vector_to_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

// Scales and translates `curve` along the first intrinsic axis so that it
// lies in {x_1 >= separation / 2} (side = +1) or {x_1 <= -separation / 2}
// (side = -1), touching the slab boundary, with the largest scale that keeps
// every point inside the unit ball.
void place_in_slab(ZigzagCurve& curve, int side, double separation, double radius) {
  const Matrix corners = curve.corners();
  const double half = 0.5 * separation;
  const double edge = side > 0 ? corners.row(0).minCoeff() : corners.row(0).maxCoeff();
  double kappa = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < corners.cols(); ++c) {
    Vector q = corners.col(c);
    q(0) -= edge;
    const double qq = q.squaredNorm();
    if (qq == 0.0) continue;
    // ||kappa q + side * half e_1||^2 <= 1, with side * q_1 >= 0.
    const double b = separation * std::abs(q(0));
    const double c0 = half * half - 1.0;
    kappa = std::min(kappa, (-b + std::sqrt(b * b - 4.0 * qq * c0)) / (2.0 * qq));
  }
  if (!std::isfinite(kappa)) kappa = 1.0;
  // make_zigzag normalized the centered curve to radius one.
  kappa = std::min(kappa, radius);
  curve.scale *= kappa;
  curve.shift = Vector::Zero(curve.intrinsic_dim());
  curve.shift(0) = side * half - kappa * edge;
}

}  // namespace

Matrix ZigzagCurve::corners() const {
  const RawPath raw = raw_path(breakpoints, directions, anchor);
  Matrix out = scale * (raw.corners.colwise() - mean_offset);
  out.colwise() += shift;
  return out;
}

ZigzagCurve make_zigzag(std::vector<double> breakpoints, Matrix directions, double min_segment) {
  const auto segments = directions.cols();
  if (segments < 1 || directions.rows() < 1) {
    throw ConfigError("zigzag curve needs at least one segment and one dimension");
  }
  if (static_cast<Eigen::Index>(breakpoints.size()) != segments + 1) {
    throw ConfigError("zigzag curve needs R + 1 breakpoints");
  }
  if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0) {
    throw ConfigError("zigzag breakpoints must start at 0 and end at 1");
  }
  for (std::size_t j = 0; j + 1 < breakpoints.size(); ++j) {
    const double gap = breakpoints[j + 1] - breakpoints[j];
    if (!(gap > 0.0) || gap < min_segment - 1e-12) {
      throw ConfigError("zigzag segment " + std::to_string(j) + " is shorter than rho");
    }
  }
  for (Eigen::Index j = 0; j < segments; ++j) {
    const double norm = directions.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ConfigError("zero zigzag direction");
    directions.col(j) /= norm;
  }

  ZigzagCurve curve;
  curve.breakpoints = std::move(breakpoints);
  curve.directions = std::move(directions);
  curve.anchor = Vector::Zero(curve.directions.rows());
  curve.shift = Vector::Zero(curve.directions.rows());
  curve.min_segment = min_segment;

  const RawPath raw = raw_path(curve.breakpoints, curve.directions, curve.anchor);
  curve.mean_offset = raw.mean;
  // The path is piecewise linear, so its norm peaks at a corner.
  const double peak = (raw.corners.colwise() - raw.mean).colwise().norm().maxCoeff();
  curve.scale = peak > 0.0 ? 1.0 / peak : 1.0;
  return curve;
}

ZigzagCurve generate_zigzag(int segments, int intrinsic_dim, double min_segment,
                            CounterRng& rng) {
  if (segments < 1 || intrinsic_dim < 1) {
    throw ConfigError("zigzag needs segments >= 1 and intrinsic_dim >= 1");
  }
  if (intrinsic_dim > segments) {
    throw ConfigError("zigzag intrinsic_dim cannot exceed the number of segments");
  }
  if (!(min_segment > 0.0) || segments * min_segment > 1.0 + 1e-12) {
    throw ConfigError("infeasible zigzag: segments * rho must be at most 1");
  }

  // Uniform spacings conditioned on all gaps >= rho: rho plus a scaled
  // uniform spacing of the remaining length.
  std::vector<double> cuts(static_cast<std::size_t>(segments - 1));
  for (double& c : cuts) c = rng.uniform();
  std::sort(cuts.begin(), cuts.end());
  const double slack = std::max(0.0, 1.0 - segments * min_segment);
  std::vector<double> breakpoints(static_cast<std::size_t>(segments + 1), 0.0);
  double prev_cut = 0.0;
  for (int j = 0; j < segments; ++j) {
    const double cut = j + 1 < segments ? cuts[static_cast<std::size_t>(j)] : 1.0;
    breakpoints[static_cast<std::size_t>(j + 1)] =
        breakpoints[static_cast<std::size_t>(j)] + min_segment + slack * (cut - prev_cut);
    prev_cut = cut;
  }
  breakpoints.back() = 1.0;

  auto random_direction = [&] {
    Vector v(intrinsic_dim);
    do {
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    } while (v.norm() == 0.0);
    return Vector(v / v.norm());
  };

  Matrix directions(intrinsic_dim, segments);
  do {
    for (int j = 0; j < intrinsic_dim; ++j) directions.col(j) = random_direction();
  } while ((directions.leftCols(intrinsic_dim).transpose() * directions.leftCols(intrinsic_dim))
               .determinant() < tol::kMinDirectionGramDet);
  for (int j = intrinsic_dim; j < segments; ++j) directions.col(j) = random_direction();

  return make_zigzag(std::move(breakpoints), std::move(directions), min_segment);
}

Vector sample_curve(const ZigzagCurve& curve, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ConfigError("curve parameter t=" + std::to_string(t) + " outside [0, 1]");
  }
  const auto j = segment_of(curve.breakpoints, t);
  Vector raw = curve.anchor;
  for (Eigen::Index k = 0; k < j; ++k) {
    raw += (curve.breakpoints[k + 1] - curve.breakpoints[k]) * curve.directions.col(k);
  }
  raw += (t - curve.breakpoints[j]) * curve.directions.col(j);
  return curve.scale * (raw - curve.mean_offset) + curve.shift;
}

CurveCovariance curve_covariance_bound(const ZigzagCurve& curve) {
  const Matrix corners = curve.corners();
  const auto r = curve.intrinsic_dim();
  Matrix second = Matrix::Zero(r, r);
  Vector mean = Vector::Zero(r);
  for (int j = 0; j < curve.segments(); ++j) {
    const double len = curve.breakpoints[j + 1] - curve.breakpoints[j];
    const Vector a = corners.col(j);
    const Vector w = curve.scale * curve.directions.col(j);
    // Integral over s in [0, len] of (a + s w)(a + s w)^T.
    second += len * a * a.transpose() + 0.5 * len * len * (a * w.transpose() + w * a.transpose()) +
              (len * len * len / 3.0) * w * w.transpose();
    mean += len * a + 0.5 * len * len * w;
  }
  CurveCovariance out;
  out.covariance = second - mean * mean.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.covariance, Eigen::EigenvaluesOnly);
  out.lambda_r = eig.eigenvalues()(0);
  out.lambda_r_unit_speed = out.lambda_r / (curve.scale * curve.scale);
  const double rho = curve.min_segment;
  out.analytic_floor = rho * rho * rho / 3.0 - rho * rho * rho * rho / 4.0;
  out.segment_floor = rho * rho * rho / 12.0;
  Eigen::JacobiSVD<Matrix> svd(curve.directions);
  const double sr = r <= svd.singularValues().size() ? svd.singularValues()(r - 1) : 0.0;
  out.direction_factor = sr * sr;
  return out;
}

Matrix orthonormal_embedding(Eigen::Index d, Eigen::Index r, CounterRng& rng) {
  if (r < 1 || d < r) {
    throw ConfigError("embedding needs 1 <= r <= d (got d=" + std::to_string(d) +
                      ", r=" + std::to_string(r) + ")");
  }
  Matrix g(d, r);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, r);
  const Matrix upper = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (upper(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

TwoClassZigzagModel make_two_class_model(const ZigzagParams& params, Eigen::Index ambient_dim,
                                         CounterRng& curve_rng, std::uint64_t embedding_seed) {
  if (params.separation < 0.0 || params.separation >= 2.0) {
    throw ConfigError("class separation must lie in [0, 2)");
  }
  if (!(params.curve_radius > 0.0)) throw ConfigError("curve radius must be positive");
  TwoClassZigzagModel model;
  // split() ignores the counter, so key the children on a fresh draw to make
  // repeated calls give new curves.
  const CounterRng base(curve_rng());
  auto rng0 = base.split("curve0");
  auto rng1 = base.split("curve1");
  model.curve0 =
      generate_zigzag(params.segments, params.intrinsic_dim, params.min_segment, rng0);
  model.curve1 =
      generate_zigzag(params.segments, params.intrinsic_dim, params.min_segment, rng1);
  place_in_slab(model.curve0, -1, params.separation, params.curve_radius);
  place_in_slab(model.curve1, +1, params.separation, params.curve_radius);
  model.separation = params.separation;
  model.embedding_seed = embedding_seed;
  CounterRng embed_rng(embedding_seed);
  model.embedding = orthonormal_embedding(ambient_dim, params.intrinsic_dim, embed_rng);
  return model;
}

TwoClassZigzagModel reembed(const TwoClassZigzagModel& model, Eigen::Index ambient_dim) {
  TwoClassZigzagModel out = model;
  CounterRng embed_rng(model.embedding_seed);
  out.embedding = orthonormal_embedding(ambient_dim, model.intrinsic_dim(), embed_rng);
  return out;
}

LabeledSample sample_two_class(const TwoClassZigzagModel& model, Eigen::Index n,
                               CounterRng& rng) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  LabeledSample out;
  out.intrinsic.resize(n, model.intrinsic_dim());
  out.labels.resize(static_cast<std::size_t>(n));
  out.times.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = rng.bernoulli_half() ? 1 : 0;
    const double t = rng.uniform();
    out.labels[static_cast<std::size_t>(i)] = label;
    out.times[static_cast<std::size_t>(i)] = t;
    out.intrinsic.row(i) = sample_curve(model.curve(label), t).transpose();
  }
  out.X = out.intrinsic * model.embedding.transpose();
  return out;
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::kGaussian;
  if (name == "rademacher") return NoiseFamily::kRademacher;
  if (name == "uniform") return NoiseFamily::kUniform;
  throw ConfigError("unknown noise family '" + std::string(name) + "'");
}

std::string_view to_string(NoiseFamily family) noexcept {
  switch (family) {
    case NoiseFamily::kGaussian: return "gaussian";
    case NoiseFamily::kRademacher: return "rademacher";
    case NoiseFamily::kUniform: return "uniform";
  }
  return "unknown";
}

Matrix add_noise(const Matrix& X, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw ConfigError("noise sigma must be finite and non-negative");
  }
  if (spec.sigma == 0.0) return X;
  CounterRng rng(spec.seed);
  const double half_width = spec.sigma * std::sqrt(3.0);
  Matrix Z = X;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      double e = 0.0;
      switch (spec.family) {
        case NoiseFamily::kGaussian: e = spec.sigma * rng.normal(); break;
        case NoiseFamily::kRademacher: e = rng.bernoulli_half() ? spec.sigma : -spec.sigma; break;
        case NoiseFamily::kUniform: e = half_width * (2.0 * rng.uniform() - 1.0); break;
      }
      Z(i, j) += e;
    }
  }
  return Z;
}

nlohmann::json to_json(const ZigzagCurve& curve) {
  return {{"breakpoints", curve.breakpoints},
          {"directions", matrix_to_json(curve.directions.transpose())},
          {"anchor", vector_to_json(curve.anchor)},
          {"mean_offset", vector_to_json(curve.mean_offset)},
          {"scale", curve.scale},
          {"shift", vector_to_json(curve.shift)},
          {"min_segment", curve.min_segment}};
}

ZigzagCurve curve_from_json(const nlohmann::json& j) {
  ZigzagCurve curve;
  curve.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  curve.directions = json_to_matrix(j.at("directions")).transpose();
  curve.anchor = json_to_vector(j.at("anchor"));
  curve.mean_offset = json_to_vector(j.at("mean_offset"));
  curve.scale = j.at("scale").get<double>();
  curve.shift = json_to_vector(j.at("shift"));
  curve.min_segment = j.at("min_segment").get<double>();
  const auto r = curve.directions.rows();
  if (static_cast<Eigen::Index>(curve.breakpoints.size()) != curve.directions.cols() + 1 ||
      curve.anchor.size() != r || curve.mean_offset.size() != r || curve.shift.size() != r) {
    throw ConfigError("inconsistent zigzag curve JSON");
  }
  return curve;
}

nlohmann::json to_json(const TwoClassZigzagModel& model, bool include_embedding) {
  nlohmann::json j{{"curve0", to_json(model.curve0)},
                   {"curve1", to_json(model.curve1)},
                   {"separation", model.separation},
                   {"ambient_dim", model.ambient_dim()},
                   {"embedding_seed", model.embedding_seed}};
  if (include_embedding) j["embedding"] = matrix_to_json(model.embedding);
  return j;
}

TwoClassZigzagModel model_from_json(const nlohmann::json& j) {
  TwoClassZigzagModel model;
  model.curve0 = curve_from_json(j.at("curve0"));
  model.curve1 = curve_from_json(j.at("curve1"));
  model.separation = j.at("separation").get<double>();
  model.embedding_seed = j.at("embedding_seed").get<std::uint64_t>();
  const auto d = j.at("ambient_dim").get<Eigen::Index>();
  if (j.contains("embedding")) {
    model.embedding = json_to_matrix(j.at("embedding"));
    if (model.embedding.rows() != d || model.embedding.cols() != model.curve0.intrinsic_dim()) {
      throw ConfigError("embedding shape does not match the model");
    }
  } else {
    CounterRng rng(model.embedding_seed);
    model.embedding = orthonormal_embedding(d, model.curve0.intrinsic_dim(), rng);
  }
  return model;
}

}  // namespace udn
