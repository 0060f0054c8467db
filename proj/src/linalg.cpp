#include "udn/linalg.hpp"

#include "udn/error.hpp"
#include "udn/rng.hpp"
#include "udn/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace udn {
namespace {

void normalize_signs(Matrix& left, Matrix& right) {
  for (Eigen::Index j = 0; j < right.cols(); ++j) {
    Eigen::Index idx = 0;
    right.col(j).cwiseAbs().maxCoeff(&idx);
    if (right(idx, j) < 0.0) {
      right.col(j) *= -1.0;
      left.col(j) *= -1.0;
    }
  }
}

SvdResult dense_svd(const Matrix& a, Eigen::Index k) {
  Eigen::BDCSVD<Matrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("dense SVD failed to converge");
  }
  SvdResult out{solver.matrixU().leftCols(k), solver.singularValues().head(k),
                solver.matrixV().leftCols(k), solver.singularValues()};
  normalize_signs(out.left, out.right);
  return out;
}

Matrix orthonormalize(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

// Subspace iteration on A^T A with a block of k + oversampling vectors.
// The start block is Gaussian from a fixed seed so results depend only on A.
SvdResult randomized_svd(const Matrix& a, Eigen::Index k) {
  const Eigen::Index min_dim = std::min(a.rows(), a.cols());
  const Eigen::Index block =
      std::min<Eigen::Index>(min_dim, k + static_cast<Eigen::Index>(tol::kRandomizedOversampling));

  CounterRng rng(0x5EEDC0DEULL ^ static_cast<std::uint64_t>(a.rows() * 131 + a.cols()));
  Matrix omega(a.cols(), block);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) omega(i, j) = rng.normal();
  }
  Matrix q = orthonormalize(a * omega);

  constexpr int kMaxIterations = 400;
  SvdResult out;
  for (int iter = 1; iter <= kMaxIterations; ++iter) {
    Matrix w = orthonormalize(a.transpose() * q);
    q = orthonormalize(a * w);
    if (iter < tol::kRandomizedPowerIterations) continue;

    // Rayleigh-Ritz on the current range basis.
    Matrix b = q.transpose() * a;
    Eigen::JacobiSVD<Matrix> small(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.left = q * small.matrixU().leftCols(k);
    out.singular_values = small.singularValues().head(k);
    out.right = small.matrixV().leftCols(k);
    out.spectrum = small.singularValues();

    const double top = out.singular_values(0);
    if (top == 0.0) break;
    const Matrix residual =
        a.transpose() * out.left - out.right * out.singular_values.asDiagonal();
    const double worst = residual.colwise().norm().maxCoeff();
    if (worst <= tol::kLinalgResidual * top) {
      normalize_signs(out.left, out.right);
      return out;
    }
  }
  if (out.singular_values.size() > 0 && out.singular_values(0) == 0.0) {
    normalize_signs(out.left, out.right);
    return out;
  }
  throw NumericalError("randomized SVD did not converge within " +
                       std::to_string(kMaxIterations) + " iterations");
}

}  // namespace

SvdResult svd(const Matrix& a, Eigen::Index k) {
  require_nonempty(a, "svd input");
  require_finite(a, "svd input");
  const Eigen::Index min_dim = std::min(a.rows(), a.cols());
  if (k < 1 || k > min_dim) {
    throw ConfigError("svd rank k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(min_dim) + "]");
  }
  const bool dense = static_cast<std::size_t>(min_dim) <= tol::kDenseSvdLimit ||
                     4 * (k + static_cast<Eigen::Index>(tol::kRandomizedOversampling)) > min_dim;
  return dense ? dense_svd(a, k) : randomized_svd(a, k);
}

Vector singular_values(const Matrix& a) {
  require_nonempty(a, "svd input");
  require_finite(a, "svd input");
  Eigen::BDCSVD<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("dense SVD failed to converge");
  }
  return solver.singularValues();
}

double two_inf_norm(const Matrix& a) {
  require_finite(a);
  if (a.size() == 0) return 0.0;
  return a.rowwise().norm().maxCoeff();
}

double frobenius_norm(const Matrix& a) {
  require_finite(a);
  return a.norm();
}

double spectral_norm(const Matrix& a) {
  require_finite(a);
  if (a.size() == 0) return 0.0;
  if (static_cast<std::size_t>(std::min(a.rows(), a.cols())) <= tol::kDenseSvdLimit) {
    return singular_values(a)(0);
  }
  return svd(a, 1).singular_values(0);
}

double inf_operator_norm(const Matrix& a) {
  require_finite(a);
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

double orthonormality_defect(const Matrix& q) {
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).norm();
}

Matrix project_rows(const Matrix& a, const Matrix& basis) {
  require_finite(a, "projection input");
  if (basis.rows() != a.cols()) {
    throw ConfigError("projection basis has " + std::to_string(basis.rows()) +
                      " rows but the matrix has " + std::to_string(a.cols()) + " columns");
  }
  const double allowed =
      tol::kOrthonormality * std::max<double>(1.0, static_cast<double>(basis.cols()));
  if (orthonormality_defect(basis) > allowed) {
    throw ConfigError("projection basis does not have orthonormal columns");
  }
  return (a * basis) * basis.transpose();
}

EigPairs sym_eig_smallest(const Matrix& s, Eigen::Index k) {
  require_nonempty(s, "eigen input");
  require_finite(s, "eigen input");
  if (s.rows() != s.cols()) throw ConfigError("eigen input must be square");
  if (k < 1 || k > s.rows()) {
    throw ConfigError("eigenpair count k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(s.rows()) + "]");
  }
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol::kSymmetry * scale) {
    throw ConfigError("eigen input is not symmetric");
  }
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed to converge");
  }
  EigPairs out{solver.eigenvalues().head(k), solver.eigenvectors().leftCols(k)};
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Index idx = 0;
    out.eigenvectors.col(j).cwiseAbs().maxCoeff(&idx);
    if (out.eigenvectors(idx, j) < 0.0) out.eigenvectors.col(j) *= -1.0;
  }
  return out;
}

}  // namespace udn
