#pragma once

#include "udn/matrix.hpp"

namespace udn {

/// Top-k singular triplets: A ~= left * diag(singular_values) * right^T.
struct SvdResult {
  Matrix left;             // n x k, orthonormal columns
  Vector singular_values;  // k values, non-increasing, >= 0
  Matrix right;            // d x k, orthonormal columns
  Vector spectrum;         // every singular value the chosen path computed
};

/// k smallest eigenpairs of a symmetric matrix, ascending.
struct EigPairs {
  Vector eigenvalues;
  Matrix eigenvectors;  // n x k, orthonormal columns
};

/// Top-k singular triplets of `a`, 1 <= k <= min(n, d).
///
/// Uses a dense divide-and-conquer SVD when min(n, d) is at most
/// tol::kDenseSvdLimit (or when k is a large fraction of min(n, d)), and a
/// randomized subspace iteration with Rayleigh-Ritz extraction otherwise. The
/// iterative path runs until every returned triplet satisfies
/// ||A^T u - s v|| <= tol::kLinalgResidual * s_1 and throws NumericalError if it
/// does not get there.
///
/// Column signs are normalized so that the largest-magnitude entry of each
/// right singular vector is positive.
SvdResult svd(const Matrix& a, Eigen::Index k);

/// All min(n, d) singular values, non-increasing.
Vector singular_values(const Matrix& a);

/// Max over rows of the row l2 norm.
double two_inf_norm(const Matrix& a);
double frobenius_norm(const Matrix& a);
/// Largest singular value.
double spectral_norm(const Matrix& a);
/// Max over rows of the row l1 norm.
double inf_operator_norm(const Matrix& a);

/// Returns a * basis * basis^T. `basis` must be d x r with orthonormal
/// columns (checked to tol::kOrthonormality scaled by r).
Matrix project_rows(const Matrix& a, const Matrix& basis);

/// k smallest eigenpairs of symmetric `s`. Asymmetry above tol::kSymmetry
/// (relative to max(1, max |s_ij|)) is rejected; smaller asymmetry is
/// removed by symmetrizing.
EigPairs sym_eig_smallest(const Matrix& s, Eigen::Index k);

/// Frobenius deviation of q^T q from the identity.
double orthonormality_defect(const Matrix& q);

}  // namespace udn
