#pragma once

#include <cstddef>

// Central table of numerical tolerances and algorithm thresholds.
namespace udn::tol {

inline constexpr double kLinalgResidual = 1e-8;
inline constexpr double kIdempotence = 1e-12;
inline constexpr double kOrthonormality = 1e-10;
inline constexpr double kEigOrthogonality = 1e-8;
inline constexpr double kEigResidual = 1e-6;
inline constexpr double kSymmetry = 1e-8;
inline constexpr double kUnitNorm = 1e-12;

// Dense SVD is used up to this min(n, d); above it the randomized
// subspace iteration takes over.
inline constexpr std::size_t kDenseSvdLimit = 512;
inline constexpr std::size_t kRandomizedOversampling = 10;
inline constexpr int kRandomizedPowerIterations = 6;

// Relative cutoff below which two singular values are reported as tied.
inline constexpr double kSingularTie = 1e-12;

// Heuristic multiplier on sigma (sqrt(n) + sqrt(d)) used by rank selection.
inline constexpr double kRankThresholdFactor = 1.5;

// Minimum Gram determinant of the first r zigzag directions.
inline constexpr double kMinDirectionGramDet = 1e-3;

}  // namespace udn::tol
