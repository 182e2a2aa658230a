#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "i2drnn/numerics.hpp"
#include "i2drnn/rng.hpp"

using namespace i2drnn;

TEST(Matvec, IdentityAndZero) {
  EXPECT_EQ(matvec(Matrix::identity(3), Vector{1, 2, 3}), (Vector{1, 2, 3}));
  EXPECT_EQ(matvec(Matrix(2, 3), Vector{1, 1, 1}), (Vector{0, 0}));
}

TEST(Matvec, HandArithmetic) {
  Matrix m(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(matvec(m, Vector{1, 1}), (Vector{3, 7}));
}

TEST(Matvec, DimensionMismatchThrows) {
  EXPECT_THROW(matvec(Matrix(2, 3), Vector{1, 1}), DimensionError);
}

TEST(Matvec, DistributesOverAddition) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.uniform_int(0, 5), c = 1 + rng.uniform_int(0, 5);
    Matrix m(r, c);
    for (double& x : m.values()) x = rng.uniform(-2, 2);
    Vector a(c), b(c), s(c);
    for (std::size_t i = 0; i < c; ++i) {
      a[i] = rng.uniform(-1, 1);
      b[i] = rng.uniform(-1, 1);
      s[i] = a[i] + b[i];
    }
    const Vector ms = matvec(m, s), ma = matvec(m, a), mb = matvec(m, b);
    for (std::size_t i = 0; i < r; ++i) EXPECT_NEAR(ms[i], ma[i] + mb[i], 1e-12);
  }
}

TEST(Tanh, Values) {
  EXPECT_EQ(tanh_vec(Vector{0})[0], 0.0);
  EXPECT_EQ(tanh_deriv(Vector{0})[0], 1.0);
  EXPECT_NEAR(tanh_vec(Vector{1})[0], 0.76159415595576488812, 1e-15);
  EXPECT_NEAR(tanh_deriv(Vector{1})[0], 1.0 - 0.76159415595576488812 * 0.76159415595576488812, 1e-15);
}

TEST(Eigen, IdentityAndDiag) {
  EXPECT_NEAR(largest_eigenvalue(Matrix::identity(4)).value, 1.0, 1e-12);
  EXPECT_NEAR(largest_eigenvalue(Matrix::diag(Vector{2, 1})).value, 2.0, 1e-9);
}

// Largest root of det(A - x I) for symmetric 3x3, by the trigonometric cubic formula.
static double sym3_largest(const Matrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Matrix b(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = (a(i, j) - (i == j ? q : 0.0)) / p;
  const double detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                      b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                      b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double r = std::clamp(detb / 2.0, -1.0, 1.0);
  return q + 2 * p * std::cos(std::acos(r) / 3.0);
}

TEST(Eigen, MatchesCubicRoot) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(3, 3);
    for (double& x : m.values()) x = rng.uniform(-1, 1);
    const Matrix a = m.transpose() * m;  // PSD, so the top eigenvalue dominates in magnitude
    EXPECT_NEAR(largest_eigenvalue(a).value, sym3_largest(a), 1e-8);
  }
}

TEST(Eigen, RejectsNonSquareAndAsymmetric) {
  EXPECT_THROW(largest_eigenvalue(Matrix(2, 3)), DimensionError);
  EXPECT_THROW(largest_eigenvalue(Matrix(2, 2, {1, 2, 0, 1})), ConfigError);
}

TEST(Eigen, GramEqualsSquaredSingularValue) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(2, 2);
    for (double& x : m.values()) x = rng.uniform(-3, 3);
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    const double s = a * a + b * b + c * c + d * d;
    const double det = a * d - b * c;
    const double sigma_max_sq = 0.5 * (s + std::sqrt(s * s - 4 * det * det));
    const double g = gram_largest_eigenvalue(m);
    EXPECT_GE(g, 0.0);
    EXPECT_NEAR(g, sigma_max_sq, 1e-8 * std::max(1.0, sigma_max_sq));
  }
}

TEST(SpectralScale, Examples) {
  const auto a = spectral_radius_scale(Matrix::identity(2), 0.5);
  EXPECT_FALSE(a.was_zero);
  EXPECT_NEAR(a.matrix(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(a.matrix(1, 1), 0.5, 1e-9);
  EXPECT_NEAR(a.matrix(0, 1), 0.0, 1e-12);

  const auto b = spectral_radius_scale(Matrix::diag(Vector{4, 1}), 0.9);
  // largest singular value 4 is mapped to 0.9
  EXPECT_NEAR(b.matrix(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(b.matrix(1, 1), 0.225, 1e-6);

  const auto z = spectral_radius_scale(Matrix(2, 2), 0.7);
  EXPECT_TRUE(z.was_zero);
  EXPECT_EQ(z.matrix, Matrix(2, 2));
  EXPECT_THROW(spectral_radius_scale(Matrix::identity(2), 1.5), ConfigError);
}

TEST(SpectralScale, HitsTarget) {
  Rng rng(3);
  Matrix m(5, 5);
  for (double& x : m.values()) x = rng.uniform(-1, 1);
  const auto s = spectral_radius_scale(m, 0.9);
  EXPECT_NEAR(std::sqrt(gram_largest_eigenvalue(s.matrix)), 0.9, 1e-6);
}

TEST(Cholesky, LogDetAndSolve) {
  Matrix a(2, 2, {4, 2, 2, 3});
  EXPECT_NEAR(log_det_spd(a), std::log(8.0), 1e-12);
  const Vector x = solve_spd(a, Vector{2, 1});
  EXPECT_NEAR(4 * x[0] + 2 * x[1], 2, 1e-12);
  EXPECT_NEAR(2 * x[0] + 3 * x[1], 1, 1e-12);
  EXPECT_THROW(cholesky(Matrix(2, 2, {1, 2, 2, 1})), NumericError);
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c = Rng(42).split("x"), d = Rng(42).split("x"), e = Rng(42).split("y");
  EXPECT_EQ(c.next_u64(), d.next_u64());
  EXPECT_NE(Rng(42).split("x").next_u64(), e.next_u64());
}

TEST(Rng, SubstreamsPassChiSquare) {
  // 20 bins, 19 dof; the 1% critical value is 36.191.
  for (const char* label : {"feed_1", "rec_1_1", "copy_sample", "farima_series"}) {
    Rng r = Rng(2024).split(label);
    std::vector<double> counts(20, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(r.uniform() * 20)] += 1.0;
    double chi2 = 0.0;
    const double expct = n / 20.0;
    for (double c : counts) chi2 += (c - expct) * (c - expct) / expct;
    EXPECT_LT(chi2, 36.191) << label;
  }
}

TEST(Rng, UniformIntRangeAndNormalMoments) {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.uniform_int(1, 8);
    ASSERT_GE(v, 1);
    ASSERT_LE(v, 8);
  }
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}
