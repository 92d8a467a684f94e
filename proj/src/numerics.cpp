#include "shapectl/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace shapectl {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require(std::isfinite(fill), "Matrix: fill value must be finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, "Matrix: entry count must equal rows*cols");
  require(all_finite(data_), "Matrix: entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, "Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::scaled(double factor) const {
  Matrix out = *this;
  for (double& v : out.data_) v *= factor;
  return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), "matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    y[i] = detail::dot_unchecked(a.row(i).data(), x.data(), x.size());
  }
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  require(a.rows() == x.size(), "matvec_transposed: dimension mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < r.size(); ++j) y[j] += r[j] * xi;
  }
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix gram_rows(const Matrix& a) {
  Matrix g(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = dot(a.row(i), a.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

Matrix gram_cols(const Matrix& a) {
  Matrix g(a.cols(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double ri = row[i];
      if (ri == 0.0) continue;
      for (std::size_t j = 0; j <= i; ++j) g(i, j) += ri * row[j];
    }
  }
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) g(j, i) = g(i, j);
  return g;
}

Matrix hstack(const Matrix& left, const Matrix& right) {
  require(left.rows() == right.rows(), "hstack: row count mismatch");
  Matrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t i = 0; i < left.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(left.row(i).begin(), left.row(i).end(), dst.begin());
    std::copy(right.row(i).begin(), right.row(i).end(), dst.begin() + left.cols());
  }
  return out;
}

Matrix select_columns(const Matrix& a, std::span<const std::size_t> columns) {
  Matrix out(a.rows(), columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k)
    require(columns[k] < a.cols(), "select_columns: index out of range");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < columns.size(); ++k) out(i, k) = a(i, columns[k]);
  return out;
}

double norm(std::span<const double> x, NormKind kind) {
  require(!x.empty(), "norm: empty vector");
  switch (kind) {
    case NormKind::l1: {
      double s = 0.0;
      for (double v : x) s += std::abs(v);
      return s;
    }
    case NormKind::l2: {
      // scaled accumulation avoids overflow for the large L_N-scaled vectors
      double scale = 0.0;
      for (double v : x) scale = std::max(scale, std::abs(v));
      if (scale == 0.0) return 0.0;
      const double inv = 1.0 / scale;
      double s[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t i = 0;
      for (; i + 4 <= x.size(); i += 4)
        for (std::size_t k = 0; k < 4; ++k) {
          const double r = x[i + k] * inv;
          s[k] += r * r;
        }
      for (; i < x.size(); ++i) {
        const double r = x[i] * inv;
        s[0] += r * r;
      }
      return scale * std::sqrt((s[0] + s[1]) + (s[2] + s[3]));
    }
    case NormKind::linf: {
      double m = 0.0;
      for (double v : x) m = std::max(m, std::abs(v));
      return m;
    }
  }
  return 0.0;
}

double dot(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "dot: dimension mismatch");
  return detail::dot_unchecked(x.data(), y.data(), x.size());
}

double matrix_max_abs(const Matrix& a) {
  require(!a.empty(), "matrix_max_abs: empty matrix");
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double matrix_max_col_l1(const Matrix& a) {
  require(!a.empty(), "matrix_max_col_l1: empty matrix");
  Vector sums(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) sums[j] += std::abs(r[j]);
  }
  return *std::max_element(sums.begin(), sums.end());
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

SpdFactorization SpdFactorization::factorize(const Matrix& m) {
  require(m.rows() == m.cols() && !m.empty(), "spd_factorize: matrix must be square and nonempty");
  const std::size_t n = m.rows();
  const double scale = matrix_max_abs(m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      require(std::abs(m(i, j) - m(j, i)) <= 1e-12 * scale, "spd_factorize: matrix is not symmetric");

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    const auto lj = l.row(j);
    for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
    if (!(d > 0.0))
      throw NumericalError("spd_factorize: non-positive pivot at index " + std::to_string(j), j);
    const double djj = std::sqrt(d);
    l(j, j) = djj;
    for (std::size_t i = j + 1; i < n; ++i) {
      const auto li = l.row(i);
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s / djj;
    }
  }
  return SpdFactorization(std::move(l));
}

Vector SpdFactorization::solve(std::span<const double> rhs) const {
  Vector x(rhs.begin(), rhs.end());
  solve_in_place(x);
  return x;
}

void SpdFactorization::solve_in_place(std::span<double> x) const {
  const std::size_t n = lower_.rows();
  require(x.size() == n, "spd_solve: dimension mismatch");
  // Column-oriented substitutions: each step is an axpy over a contiguous row.
  double* xs = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* col = upper_.row(i).data();
    const double xi = xs[i] / col[i];
    xs[i] = xi;
    for (std::size_t k = i + 1; k < n; ++k) xs[k] -= col[k] * xi;
  }
  for (std::size_t i = n; i-- > 0;) {
    const double* col = lower_.row(i).data();
    const double xi = xs[i] / col[i];
    xs[i] = xi;
    for (std::size_t k = 0; k < i; ++k) xs[k] -= col[k] * xi;
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const Matrix& m) {
  out << m.rows() << ',' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out << ',';
      out << format_double(r[j]);
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r' || field.back() == '\t'))
    field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw std::invalid_argument("csv: cannot parse number '" + std::string(field) + "'");
  return value;
}

}  // namespace

Matrix read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: missing header");
  const auto header = split_commas(line);
  if (header.size() != 2) throw std::invalid_argument("csv: header must be 'rows,cols'");
  const auto rows = parse_number<std::size_t>(header[0]);
  const auto cols = parse_number<std::size_t>(header[1]);
  std::vector<double> data;
  data.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw std::invalid_argument("csv: fewer rows than declared");
    const auto fields = split_commas(line);
    if (fields.size() != cols) throw std::invalid_argument("csv: row " + std::to_string(i) + " has wrong column count");
    for (const auto f : fields) data.push_back(parse_number<double>(f));
  }
  return Matrix(rows, cols, std::move(data));
}

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot rename into " + path.string());
  }
}

void save_csv(const std::filesystem::path& path, const Matrix& m) {
  write_file_atomic(path, [&](std::ostream& out) { write_csv(out, m); });
}

void save_csv(const std::filesystem::path& path, std::span<const double> v) {
  save_csv(path, Matrix(v.size(), 1, Vector(v.begin(), v.end())));
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in);
}

Vector load_vector_csv(const std::filesystem::path& path) {
  const Matrix m = load_matrix_csv(path);
  if (m.cols() != 1) throw std::invalid_argument(path.string() + ": vector file must have one column");
  return Vector(m.data().begin(), m.data().end());
}

}  // namespace shapectl
