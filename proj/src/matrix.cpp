#include "capstext/matrix.hpp"

#include <cmath>

#include "capstext/error.hpp"

namespace capstext::numcore {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix: dimensions must be positive, got " + shape_string());
  }
  if (!std::isfinite(fill)) {
    throw InputError("matrix: non-finite fill value");
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix: dimensions must be positive, got " + shape_string());
  }
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix: " + std::to_string(data_.size()) +
                     " values do not fill " + shape_string());
  }
  require_finite(*this, "matrix");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("matrix: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(rows.size(), cols, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column_vector(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool all_finite(const Matrix& m) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Matrix& m, const char* op) {
  if (!all_finite(m)) {
    throw InputError(std::string(op) + ": non-finite value in " + m.shape_string() +
                     " matrix");
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.empty() || b.empty()) throw ShapeError("matmul: empty operand");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + a.shape_string() + " * " +
                     b.shape_string());
  }
  Matrix out(a.rows(), b.cols(), 0.0);
  const std::size_t m = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = out.row_ptr(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < n; ++j) {
        out_row[j] += aik * b_row[j];
      }
    }
  }
  require_finite(out, "matmul");
  return out;
}

Matrix transpose(const Matrix& a) {
  if (a.empty()) throw ShapeError("transpose: empty operand");
  Matrix out(a.cols(), a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(j, i) = a(i, j);
    }
  }
  return out;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  require_finite(out, "add");
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= b.values()[i];
  require_finite(out, "sub");
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
  require_finite(out, "hadamard");
  return out;
}

Matrix scale(const Matrix& a, double c) {
  if (!std::isfinite(c)) throw InputError("scale: non-finite factor");
  Matrix out = a;
  for (double& v : out.values()) v *= c;
  require_finite(out, "scale");
  return out;
}

double sum_all(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

void softmax_inplace(std::span<double> x) {
  if (x.empty()) throw ShapeError("softmax: empty input");
  double max_v = x[0];
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("softmax: non-finite input");
    if (v > max_v) max_v = v;
  }
  double total = 0.0;
  for (double& v : x) {
    v = std::exp(v - max_v);
    total += v;
  }
  for (double& v : x) v /= total;
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  softmax_inplace(out);
  return out;
}

double sigmoid(double x) {
  if (!std::isfinite(x)) throw InputError("sigmoid: non-finite input");
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace capstext::numcore
