#include "udn/matrix.hpp"

#include "udn/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>

namespace udn {

void require_finite(const Matrix& a, std::string_view what) {
  if (!a.allFinite()) {
    throw NumericalError(std::string(what) + " contains NaN or Inf entries");
  }
}

void require_nonempty(const Matrix& a, std::string_view what) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw ConfigError(std::string(what) + " must have at least one row and one column");
  }
}

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
  require_nonempty(values_, "data matrix");
  require_finite(values_, "data matrix");
}

namespace io {
namespace {

constexpr std::array<char, 4> kMagic = {'U', 'D', 'M', 'X'};

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  out.write(b.data(), b.size());
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view field, const std::filesystem::path& path, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": cannot parse '" +
                  std::string(field) + "' as a number");
  }
  return value;
}

}  // namespace

MatrixFormat format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".udmx" || ext == ".bin") return MatrixFormat::kBinary;
  return MatrixFormat::kCsv;
}

Matrix read_csv(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    std::size_t count = 0;
    while (true) {
      const auto comma = view.find(',');
      values.push_back(parse_double(view.substr(0, comma), path, lineno));
      ++count;
      if (comma == std::string_view::npos) break;
      view.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw IoError("'" + path.string() + "' contains no rows");
  Matrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
    }
  }
  return a;
}

void write_csv(const std::filesystem::path& path, const Matrix& a) {
  auto out = open_out(path, std::ios::out | std::ios::trunc);
  std::array<char, 32> buf{};
  std::string line;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j > 0) line.push_back(',');
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), a(i, j),
                                     std::chars_format::general, 17);
      line.append(buf.data(), ptr);
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Matrix read_binary(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::array<unsigned char, 16> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw IoError("'" + path.string() + "' is too short for a UDMX header");
  }
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw IoError("'" + path.string() + "' does not start with the UDMX magic");
  }
  const auto n = get_u32(header.data() + 4);
  const auto d = get_u32(header.data() + 8);
  if (get_u32(header.data() + 12) != 0) {
    throw IoError("'" + path.string() + "' has a non-zero reserved header field");
  }
  const std::size_t count = static_cast<std::size_t>(n) * d;
  std::vector<unsigned char> payload(count * 8);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload.size()))) {
    throw IoError("'" + path.string() + "' is truncated");
  }
  Matrix a(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      a(i, j) = get_f64(payload.data() + 8 * (static_cast<std::size_t>(i) * d + j));
    }
  }
  return a;
}

void write_binary(const std::filesystem::path& path, const Matrix& a) {
  constexpr auto kMax = static_cast<Eigen::Index>(std::numeric_limits<std::uint32_t>::max());
  if (a.rows() > kMax || a.cols() > kMax) {
    throw ConfigError("matrix too large for the UDMX format");
  }
  auto out = open_out(path, std::ios::out | std::ios::binary | std::ios::trunc);
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(a.rows()));
  put_u32(out, static_cast<std::uint32_t>(a.cols()));
  put_u32(out, 0);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) put_f64(out, a(i, j));
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Matrix read_matrix(const std::filesystem::path& path) {
  return format_for(path) == MatrixFormat::kBinary ? read_binary(path) : read_csv(path);
}

void write_matrix(const std::filesystem::path& path, const Matrix& a) {
  if (format_for(path) == MatrixFormat::kBinary) {
    write_binary(path, a);
  } else {
    write_csv(path, a);
  }
}

Labels read_labels(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in);
  Labels labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim(line);
    if (view.empty()) continue;
    int value = 0;
    auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
    if (ec != std::errc() || ptr != view.data() + view.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad label '" +
                    std::string(view) + "'");
    }
    labels.push_back(value);
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, const Labels& labels) {
  auto out = open_out(path, std::ios::out | std::ios::trunc);
  for (int label : labels) out << label << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace io
}  // namespace udn
