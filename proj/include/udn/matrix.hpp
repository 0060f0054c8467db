#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace udn {

/// Dense real matrix. Rows are samples, columns are features.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Labels = std::vector<int>;

/// Throws NumericalError naming `what` if any entry of `a` is NaN or Inf.
void require_finite(const Matrix& a, std::string_view what = "matrix");

/// Throws ConfigError if `a` has no rows or no columns.
void require_nonempty(const Matrix& a, std::string_view what = "matrix");

/// A validated n x d data matrix: finite entries, n >= 1, d >= 1.
class DataMatrix {
 public:
  explicit DataMatrix(Matrix values);

  [[nodiscard]] const Matrix& values() const noexcept { return values_; }
  [[nodiscard]] Eigen::Index rows() const noexcept { return values_.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values_.cols(); }

  operator const Matrix&() const noexcept { return values_; }  // NOLINT

 private:
  Matrix values_;
};

namespace io {

enum class MatrixFormat { kCsv, kBinary };

/// Picks the binary format for `.udmx` / `.bin` extensions, CSV otherwise.
MatrixFormat format_for(const std::filesystem::path& path);

// CSV: one row per line, comma separated, no header. Values are written
// with 17 significant digits so that a round trip is exact.
Matrix read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Matrix& a);

// Binary: 16-byte header ("UDMX", u32 n, u32 d, u32 reserved = 0, all
// little-endian) followed by n*d little-endian f64 values in row-major order.
Matrix read_binary(const std::filesystem::path& path);
void write_binary(const std::filesystem::path& path, const Matrix& a);

Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& a);

// Labels sidecar: one integer per line, no header.
Labels read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const Labels& labels);

}  // namespace io
}  // namespace udn
