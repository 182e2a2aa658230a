#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "i2drnn/numerics.hpp"

namespace i2drnn {

enum class MiPairing {
  AllPairs,  // proxy sums MI over every (x_i, y_j) coordinate pair
  Matched,   // proxy sums MI over (x_i, y_i); needs equal dims
};

struct MiOptions {
  std::size_t bins = 30;
  MiPairing pairing = MiPairing::AllPairs;
  /// Miller-Madow correction of each plug-in entropy.
  bool bias_correction = false;
  /// Joint histograms with more cells than this fall back to the pairwise proxy.
  double max_joint_cells = 1e6;
};

struct MiEstimate {
  double value = 0.0;  // nats
  bool proxy = false;
  bool clamped = false;
};

MiEstimate binned_mi(std::span<const Vector> xs, std::span<const Vector> ys, const MiOptions& opts = {});
/// Scalar convenience overload.
double binned_mi(std::span<const double> x, std::span<const double> y, std::size_t bins = 30);

/// Closed-form Gaussian MI, 1/2 (log|S + W^T W| - log|S|), in nats.
double gaussian_linear_mi(const Matrix& w, const Matrix& sigma);

struct MiCurve {
  std::vector<long> lags;
  std::vector<double> mi;
  std::vector<std::string> flags;  // per entry: "", "proxy", "clamped", "proxy+clamped"
  bool normalized = false;
  std::size_t clamped_count = 0;

  bool any_proxy() const;
};

/// Entry tau is MI over aligned pairs (source_{t-tau}, target_t).
MiCurve lagged_mi_curve(std::span<const Vector> source, std::span<const Vector> target,
                        std::size_t max_lag, const MiOptions& opts = {}, bool normalize = false);
/// Pooled over several sequences; pairs never cross a sequence boundary.
MiCurve lagged_mi_curve(const std::vector<std::vector<Vector>>& sources,
                        const std::vector<std::vector<Vector>>& targets, std::size_t max_lag,
                        const MiOptions& opts = {}, bool normalize = false);

struct ExpFit {
  double a = 0.0;
  double k = 0.0;
  double residual = 0.0;  // sum of squared log residuals
  std::size_t points = 0;
  bool k_clamped = false;
};

ExpFit fit_exponential(const MiCurve& curve, double floor = 1e-6);

struct RateParams {
  std::size_t dim_h = 1;
  double lambda = 0.5;  // top eigenvalue of W^T W
  double eta = 1.0;     // top eigenvalue of U^T U
  double hx = 0.0;      // per-dimension conditional entropy of the input, nats
};

double unit_gaussian_hx();  // 1/2 ln(2 pi e)

double input_rate(const RateParams& rp);
double recurrent_rate(const RateParams& rp, double tau);

struct Rates {
  double dx = 0.0;
  MiCurve dr;  // lags 1..tau_max
};
Rates analytic_rates(const RateParams& rp, std::size_t tau_max);

/// exp(slope) of ln(curve) over lags >= tail_start.
double decay_rate(const MiCurve& curve, long tail_start);

/// Mean over dimensions of 1/2 ln(2 pi e s^2), s^2 the AR(5) residual variance.
double estimate_Hx(std::span<const Vector> series);

void write_curve_csv(const std::filesystem::path& path, const MiCurve& curve);
std::string fit_to_json(const ExpFit& fit);

}  // namespace i2drnn
