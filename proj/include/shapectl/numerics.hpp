#pragma once

// Dense linear-algebra kernel: row-major matrices, vectors, norms, and a
// Cholesky factorization for symmetric positive definite systems.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapectl {

using Vector = std::vector<double>;

/// Raised when a computation produces or meets a numerically invalid state
/// (non-positive pivot, non-finite iterate). `index()` locates the failure.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major `data`; throws if the size is wrong or an
  /// entry is not finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  Matrix scaled(double factor) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class NormKind { l1, l2, linf };

Vector matvec(const Matrix& a, std::span<const double> x);
/// Computes A' x without forming the transpose.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
/// A A'
Matrix gram_rows(const Matrix& a);
/// A' A
Matrix gram_cols(const Matrix& a);
Matrix hstack(const Matrix& left, const Matrix& right);
Matrix select_columns(const Matrix& a, std::span<const std::size_t> columns);

double norm(std::span<const double> x, NormKind kind);
namespace detail {
// Four independent partial sums; keeps the loop off the add-latency chain.
inline double dot_unchecked(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}
}  // namespace detail

double dot(std::span<const double> x, std::span<const double> y);
double matrix_max_abs(const Matrix& a);
/// Largest absolute column sum, max_j sum_i |a_ij|.
double matrix_max_col_l1(const Matrix& a);
bool all_finite(std::span<const double> x);

/// Lower-triangular Cholesky factor L with M = L L'.
class SpdFactorization {
 public:
  /// Throws std::invalid_argument for non-square or asymmetric input and
  /// NumericalError (carrying the pivot index) when a pivot is not positive.
  static SpdFactorization factorize(const Matrix& m);

  std::size_t dimension() const noexcept { return lower_.rows(); }
  Vector solve(std::span<const double> rhs) const;
  void solve_in_place(std::span<double> rhs) const;

 private:
  explicit SpdFactorization(Matrix lower) : lower_(std::move(lower)), upper_(lower_.transpose()) {}
  Matrix lower_;
  Matrix upper_;  // lower_ transposed; columns of lower_ as contiguous rows
};

// CSV: first line "rows,cols", then one matrix row per line. Vectors are
// stored as a single column.
void write_csv(std::ostream& out, const Matrix& m);
/// Writes through `path`.tmp and renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);
Matrix read_csv(std::istream& in);
void save_csv(const std::filesystem::path& path, const Matrix& m);
void save_csv(const std::filesystem::path& path, std::span<const double> v);
Matrix load_matrix_csv(const std::filesystem::path& path);
Vector load_vector_csv(const std::filesystem::path& path);
std::string format_double(double value);

}  // namespace shapectl
