#include "i2drnn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace i2drnn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

void Matrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix add: shape mismatch");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

Matrix operator*(double s, Matrix m) {
  m *= s;
  return m;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  Vector out(m.rows(), 0.0);
  matvec_acc(m, v, out);
  return out;
}

void matvec_acc(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (m.cols() != v.size() || m.rows() != out.size()) {
    throw DimensionError("matvec: matrix " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", vector " + std::to_string(v.size()));
  }
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
    out[r] += acc;
  }
}

void matvec_t_acc(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (m.rows() != v.size() || m.cols() != out.size()) {
    throw DimensionError("matvec_t: shape mismatch");
  }
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r);
    const double vr = v[r];
    if (vr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * vr;
  }
}

void outer_acc(Matrix& m, std::span<const double> u, std::span<const double> v) {
  if (m.rows() != u.size() || m.cols() != v.size()) throw DimensionError("outer: shape mismatch");
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    double* row = m.row(r);
    for (std::size_t c = 0; c < cols; ++c) row[c] += ur * v[c];
  }
}

Vector tanh_vec(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::tanh(x); });
  return out;
}

Vector tanh_deriv(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  });
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

EigenResult largest_eigenvalue(const Matrix& m, double rel_tol, int max_iter) {
  const std::size_t n = m.rows();
  if (n != m.cols()) throw DimensionError("largest_eigenvalue: matrix is not square");
  if (n == 0) throw DimensionError("largest_eigenvalue: empty matrix");
  double scale = 0.0;
  for (double x : m.values()) scale = std::max(scale, std::abs(x));
  const double sym_tol = 1e-9 * std::max(1.0, scale);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > sym_tol)
        throw DimensionError("largest_eigenvalue: matrix is not symmetric");
  if (scale == 0.0) return {0.0, 0};

  // Deterministic, non-uniform start so it is unlikely to be orthogonal to
  // the dominant eigenvector.
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * std::sin(1.0 + static_cast<double>(i));
  double nv = norm2(v);
  for (double& x : v) x /= nv;

  double lambda = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = matvec(m, v);
    const double next = dot(v, w);  // Rayleigh quotient
    const double nw = norm2(w);
    if (nw == 0.0) return {0.0, it};
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    if (it > 1 && std::abs(next - lambda) <= rel_tol * std::abs(next)) return {next, it};
    lambda = next;
  }
  std::ostringstream msg;
  msg << "largest_eigenvalue: power iteration did not converge after " << max_iter
      << " iterations (last estimate " << lambda << ")";
  throw NumericError(msg.str());
}

double gram_largest_eigenvalue(const Matrix& m) {
  return largest_eigenvalue(m.transpose() * m).value;
}

ScaledMatrix spectral_radius_scale(const Matrix& m, double target) {
  if (!(target > 0.0 && target <= 1.0)) {
    throw ConfigError("spectral_radius_scale: target must lie in (0, 1]");
  }
  const double top = gram_largest_eigenvalue(m);
  if (top == 0.0) return {m, true};
  Matrix out = m;
  out *= target / std::sqrt(top);
  return {std::move(out), false};
}

Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw DimensionError("cholesky: matrix is not square");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NumericError("cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

double log_det_spd(const Matrix& a) {
  const Matrix l = cholesky(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

Vector solve_spd(const Matrix& a, std::span<const double> b) {
  const Matrix l = cholesky(a);
  const std::size_t n = l.rows();
  if (b.size() != n) throw DimensionError("solve_spd: rhs length mismatch");
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

}  // namespace i2drnn
