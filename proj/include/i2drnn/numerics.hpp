#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace i2drnn {

// Error categories map onto CLI exit codes (config 2, numeric 3, I/O 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : ConfigError {
  using ConfigError::ConfigError;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diag(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }

  Matrix transpose() const;
  Matrix& operator*=(double s);
  void set_zero();

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix m);

Vector matvec(const Matrix& m, std::span<const double> v);
// out += m * v
void matvec_acc(const Matrix& m, std::span<const double> v, std::span<double> out);
// out += m^T * v
void matvec_t_acc(const Matrix& m, std::span<const double> v, std::span<double> out);
// m += u * v^T
void outer_acc(Matrix& m, std::span<const double> u, std::span<const double> v);

Vector tanh_vec(std::span<const double> v);
Vector tanh_deriv(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
bool all_finite(std::span<const double> v);

struct EigenResult {
  double value = 0.0;
  int iterations = 0;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration
/// (relative convergence 1e-10, at most 10000 iterations).
EigenResult largest_eigenvalue(const Matrix& m, double rel_tol = 1e-10, int max_iter = 10000);

/// Largest eigenvalue of m^T m, i.e. the squared largest singular value.
double gram_largest_eigenvalue(const Matrix& m);

struct ScaledMatrix {
  Matrix matrix;
  bool was_zero = false;
};

/// Rescales m so that its largest singular value equals target.
ScaledMatrix spectral_radius_scale(const Matrix& m, double target);

/// Cholesky factor L (lower) with a = L L^T; throws NumericError when a is not PD.
Matrix cholesky(const Matrix& a);
double log_det_spd(const Matrix& a);
/// Solves a x = b for symmetric positive-definite a.
Vector solve_spd(const Matrix& a, std::span<const double> b);

}  // namespace i2drnn
