#include "oracles.hpp"

#include "udn/datagen.hpp"
#include "udn/error.hpp"
#include "udn/linalg.hpp"

#include <doctest.h>

using namespace udn;

namespace {

Matrix monte_carlo_points(const ZigzagCurve& curve, int count, CounterRng& rng) {
  Matrix pts(count, curve.intrinsic_dim());
  for (int i = 0; i < count; ++i) pts.row(i) = sample_curve(curve, rng.uniform()).transpose();
  return pts;
}

}  // namespace

TEST_CASE("single segment curve") {
  CounterRng rng(1);
  const auto curve = generate_zigzag(1, 1, 1.0, rng);
  CHECK(curve.segments() == 1);
  const double a = sample_curve(curve, 0.0)(0);
  const double b = sample_curve(curve, 1.0)(0);
  CHECK(std::abs(a + b) < 1e-12);  // centered
  CHECK(std::max(std::abs(a), std::abs(b)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sample_curve(curve, 0.5).norm() < 1e-12);
}

TEST_CASE("default zigzag satisfies the curve invariants") {
  CounterRng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto curve = generate_zigzag(10, 3, 0.05, rng);
    REQUIRE(curve.breakpoints.size() == 11);
    CHECK(curve.breakpoints.front() == 0.0);
    CHECK(curve.breakpoints.back() == 1.0);
    for (std::size_t j = 0; j + 1 < curve.breakpoints.size(); ++j) {
      CHECK(curve.breakpoints[j + 1] - curve.breakpoints[j] >= 0.05 - 1e-15);
    }
    for (int j = 0; j < 10; ++j) CHECK(std::abs(curve.directions.col(j).norm() - 1.0) <= 1e-12);
    CHECK(singular_values(curve.directions)(2) > 1e-6);
    // The max norm is attained at a corner of a piecewise-linear path.
    CHECK(curve.corners().colwise().norm().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("infeasible zigzag requests are rejected") {
  CounterRng rng(3);
  CHECK_THROWS_AS(generate_zigzag(10, 3, 0.2, rng), ConfigError);
  CHECK_THROWS_AS(generate_zigzag(2, 3, 0.1, rng), ConfigError);
}

TEST_CASE("sample_curve") {
  std::vector<double> bp = {0.0, 0.3, 1.0};
  Matrix dirs(2, 2);
  dirs << 1, 0, 0, 1;
  const auto curve = make_zigzag(bp, dirs, 0.3);
  const Matrix corners = curve.corners();
  for (std::size_t j = 0; j < bp.size(); ++j) {
    CHECK((sample_curve(curve, bp[j]) - corners.col(static_cast<Eigen::Index>(j))).norm() < 1e-14);
  }
  const Vector mid = sample_curve(curve, 0.65);
  CHECK((mid - 0.5 * (corners.col(1) + corners.col(2))).norm() < 1e-14);
  // Unit speed before the rescaling by `scale`.
  CHECK((sample_curve(curve, 0.3 - 1e-6) - sample_curve(curve, 0.3 + 1e-6)).norm() <= 2e-6 * curve.scale);
  CHECK_THROWS_AS(sample_curve(curve, -0.1), ConfigError);
  CHECK_THROWS_AS(sample_curve(curve, 1.1), ConfigError);
}

TEST_CASE("curve mean and covariance match Monte Carlo") {
  CounterRng rng(4);
  const auto curve = generate_zigzag(10, 3, 0.05, rng);
  auto mc = rng.split("mc");
  const Matrix pts = monte_carlo_points(curve, 1000000, mc);
  const Vector mean = pts.colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-2);
  const Matrix centered = pts.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(pts.rows());
  const auto bound = curve_covariance_bound(curve);
  CHECK((cov - bound.covariance).norm() <= 0.01 * bound.covariance.norm());
  Vector values;
  Matrix vectors;
  oracle::jacobi_eigen(cov, values, vectors);
  CHECK(values(0) == doctest::Approx(bound.lambda_r).epsilon(0.01));
  CHECK(bound.lambda_r > 0.0);
  // Unit-speed floor from the within-segment variance.
  CHECK(bound.lambda_r_unit_speed >= bound.segment_floor * bound.direction_factor * (1 - 1e-12));
}

TEST_CASE("curve covariance closed forms") {
  Matrix e1(1, 1);
  e1 << 1;
  const auto line = make_zigzag({0.0, 1.0}, e1, 1.0);
  const auto b = curve_covariance_bound(line);
  CHECK(b.lambda_r_unit_speed == doctest::Approx(1.0 / 12.0).epsilon(1e-12));

  // Three directions in a plane: rank two, so the third eigenvalue vanishes.
  Matrix planar(3, 3);
  planar << 1, 0, 1, 0, 1, 1, 0, 0, 0;
  const auto flat = make_zigzag({0.0, 0.3, 0.6, 1.0}, planar, 0.3);
  CHECK(std::abs(curve_covariance_bound(flat).lambda_r) < 1e-10);
}

TEST_CASE("two-class model and sampling") {
  CounterRng curve_rng(5);
  const auto model = make_two_class_model({}, 50, curve_rng, 77);
  CHECK(orthonormality_defect(model.embedding) <= 1e-10);
  CounterRng rng(6);
  const auto s = sample_two_class(model, 10000, rng);
  CHECK(s.X.rows() == 10000);
  CHECK(s.X.rowwise().norm().maxCoeff() <= 1.0 + 1e-12);
  double ones = 0;
  double min0 = 1e9;
  double min1 = 1e9;
  for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
    const int label = s.labels[static_cast<std::size_t>(i)];
    ones += label;
    const double x1 = s.intrinsic(i, 0);
    if (label == 0) min0 = std::min(min0, -x1);
    if (label == 1) min1 = std::min(min1, x1);
  }
  CHECK(std::abs(ones / 10000.0 - 0.5) < 0.02);
  CHECK(min0 + min1 >= model.separation - 1e-12);
  CHECK((s.X - s.intrinsic * model.embedding.transpose()).cwiseAbs().maxCoeff() < 1e-15);

  CounterRng again(6);
  const auto s2 = sample_two_class(model, 4, again);
  CounterRng again2(6);
  const auto s3 = sample_two_class(model, 4, again2);
  CHECK(s2.X == s3.X);
  CHECK(s2.labels == s3.labels);
  CHECK(s2.times == s3.times);
}

TEST_CASE("fresh curves on every model draw") {
  CounterRng curve_rng(9);
  const auto a = make_two_class_model({}, 10, curve_rng, 1);
  const auto b = make_two_class_model({}, 10, curve_rng, 1);
  CHECK((a.curve0.directions - b.curve0.directions).norm() > 1e-3);
  CHECK(a.embedding == b.embedding);
}

TEST_CASE("orthonormal embedding") {
  CounterRng rng(7);
  const Matrix big = orthonormal_embedding(5000, 3, rng);
  CHECK(orthonormality_defect(big) <= 1e-10);
  const Matrix square = orthonormal_embedding(4, 4, rng);
  CHECK((square * square.transpose() - Matrix::Identity(4, 4)).norm() <= 1e-10);
  CHECK_THROWS_AS(orthonormal_embedding(2, 3, rng), ConfigError);

  const Matrix x = oracle::gaussian_matrix(30, 3, rng);
  const Matrix omega = orthonormal_embedding(40, 3, rng);
  CHECK((singular_values(x) - singular_values(x * omega.transpose()).head(3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("reembed keeps the curves") {
  CounterRng curve_rng(10);
  const auto m = make_two_class_model({}, 20, curve_rng, 3);
  const auto r = reembed(m, 200);
  CHECK(r.ambient_dim() == 200);
  CHECK(r.curve0.directions == m.curve0.directions);
  CHECK(orthonormality_defect(r.embedding) <= 1e-10);
}

TEST_CASE("noise families") {
  const Matrix x = Matrix::Zero(200, 5000);
  const Matrix g = add_noise(x, {NoiseFamily::kGaussian, 0.05, 11});
  const double var = g.squaredNorm() / static_cast<double>(g.size());
  CHECK(std::abs(var / (0.05 * 0.05) - 1.0) < 0.02);
  CHECK(std::abs(g.mean()) < 1e-3 * 0.05 * 10);

  const Matrix r = add_noise(Matrix::Zero(50, 50), {NoiseFamily::kRademacher, 0.3, 12});
  CHECK((r.array().abs() == 0.3).all());

  const Matrix u = add_noise(x, {NoiseFamily::kUniform, 0.05, 13});
  CHECK(u.cwiseAbs().maxCoeff() <= 0.05 * std::sqrt(3.0));
  CHECK(std::abs(u.squaredNorm() / static_cast<double>(u.size()) / (0.05 * 0.05) - 1.0) < 0.02);

  CounterRng rng(1);
  const Matrix y = oracle::gaussian_matrix(4, 4, rng);
  CHECK(add_noise(y, {NoiseFamily::kGaussian, 0.0, 1}) == y);
  CHECK(add_noise(y, {NoiseFamily::kGaussian, 0.1, 1}) == add_noise(y, {NoiseFamily::kGaussian, 0.1, 1}));
  CHECK_THROWS_AS(parse_noise_family("cauchy"), ConfigError);
  CHECK(parse_noise_family("rademacher") == NoiseFamily::kRademacher);
}

TEST_CASE("uniform noise grows like sqrt(d)") {
  const Matrix small = add_noise(Matrix::Zero(100, 250), {NoiseFamily::kGaussian, 1.0, 21});
  const Matrix large = add_noise(Matrix::Zero(100, 4000), {NoiseFamily::kGaussian, 1.0, 22});
  const double ratio = two_inf_norm(large) / two_inf_norm(small);
  CHECK(ratio >= 3.2);
  CHECK(ratio <= 4.8);
}

TEST_CASE("model json round trip") {
  CounterRng curve_rng(12);
  const auto m = make_two_class_model({}, 30, curve_rng, 99);
  const auto with = model_from_json(to_json(m, true));
  CHECK(with.embedding == m.embedding);
  const auto regen = model_from_json(to_json(m, false));
  CHECK((regen.embedding - m.embedding).norm() == 0.0);
  CHECK(regen.curve1.breakpoints == m.curve1.breakpoints);
  for (double t : {0.0, 0.37, 1.0}) CHECK((sample_curve(regen.curve1, t) - sample_curve(m.curve1, t)).norm() == 0.0);
  const auto c = curve_from_json(to_json(m.curve0));
  CHECK(c.directions == m.curve0.directions);
}
