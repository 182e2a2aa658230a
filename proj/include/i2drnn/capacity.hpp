#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "i2drnn/infotheory.hpp"

namespace i2drnn {

/// lambda*_1 = (2 - sqrt(4 - 4k)) / (2k); k in (0, 1).
double lambda1(double k);

struct Lambda2Result {
  double value = 0.0;
  bool fallback = false;  // quadratic root unusable, numeric solution returned
};

/// Terms of the second-layer objective used by the numeric fallback.
/// a = h1 by default (a ~ h1).
struct Lambda2Options {
  double a = 1.0;
  double h1 = 1.0;
  double eta = 1.0;
  double hx = 0.5 * 2.8378770664093453;  // 1/2 ln(2 pi e)
  std::size_t horizon = 500;
};

/// Smaller root of 1 - 2x + (k + q + kq) x^2, or the numeric optimum when k + q + kq >= 1.
Lambda2Result lambda2(double k, double q, const Lambda2Options& opts = {});
/// The fallback on its own: maximizer of the exact finite-horizon second-layer objective.
double lambda2_numeric(double k, double q, const Lambda2Options& opts = {});

/// 1 - 2x + (k + l2) x^2 - k l2 x^3
double lambda3_polynomial(double x, double k, double l2);
/// Root of lambda3_polynomial in (0, 1) by bisection (tolerance 1e-10).
double lambda3(double k, double l2);

enum class LambdaObjectiveKind {
  Exact,      // log form at every lag, finite horizon
  LongRange,  // leading order in lambda^tau, the form the closed forms are derived from
};

/// f(lambda) = sum_{tau=1..horizon} term(lambda, tau) * (a k^tau - prev_h prev_q^tau).
struct LambdaObjective {
  LambdaObjectiveKind kind = LambdaObjectiveKind::Exact;
  double a = 1.0;
  double k = 0.5;
  double eta = 1.0;
  double hx = 0.0;
  double prev_h = 0.0;  // 0 for the first layer
  double prev_q = 0.0;

  double operator()(double lambda, std::size_t horizon) const;
};

struct LambdaSolve {
  double lambda = 0.5;
  double objective = 0.0;
  bool flat = false;
};

/// Grid scan then golden-section refinement over (lo, hi).
LambdaSolve maximize_on_interval(const std::function<double(double)>& f, double lo = 1e-4,
                                 double hi = 1.0 - 1e-4);
LambdaSolve solve_lambda_numeric(const LambdaObjective& obj, std::size_t horizon);

/// Lags 0..tau_max: D^X at lag 0, D^R(tau) after.
MiCurve layer_info_curve(double lambda, std::size_t dim, double eta, double hx, std::size_t tau_max);

double overall_capacity(const std::vector<MiCurve>& curves);

/// Smallest tau whose cumulative share of sum_tau a k^tau reaches 99%, capped at 500.
std::size_t coverage_tau_max(double k, double coverage = 0.99, std::size_t cap = 500);

struct CapacityEstimate {
  std::vector<double> lambdas;
  std::vector<MiCurve> curves;
  double capacity = 0.0;  // C
  double icap = 0.0;
  double total_info = 0.0;  // sum_tau g(tau) over the lag grid
  double alpha = 0.0;
  bool short_horizon = false;
};

CapacityEstimate icap_estimate(const ExpFit& g, const std::vector<MiCurve>& curves, std::size_t tau_max);

struct LayerPlan {
  std::size_t num_layers = 2;
  /// Equal split of a total size; earlier layers take the remainder.
  std::vector<std::size_t> split(std::size_t total) const;
};

struct CapacityOptions {
  double eta = 1.0;
  double hx = 0.0;
  std::size_t tau_max = 0;  // 0 picks coverage_tau_max(k)
  double tol = 0.01;
  /// Closed-form lambdas are compared with this long-horizon solve; disagreement is flagged.
  std::size_t check_horizon = 2000;
};

struct ConfigCurve {
  std::vector<std::size_t> grid;
  std::vector<double> icap;
  std::vector<double> capacity;
  std::vector<double> d1, d2;  // first and second differences, NaN where undefined
  std::vector<double> lambdas;
  double total_info = 0.0;
  std::size_t tau_max = 0;
  std::size_t necessary = 0;   // I_n
  std::size_t sufficient = 0;  // I_s
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const;
};

/// The closed-form lambda chain for a plan with the given number of layers.
std::vector<double> lambda_chain(double k, std::size_t layers, std::vector<std::string>* flags = nullptr,
                                 const CapacityOptions& opts = {});

ConfigCurve config_curve(const ExpFit& g, const LayerPlan& plan, const std::vector<std::size_t>& grid,
                         const CapacityOptions& opts = {});

struct SizeChoice {
  std::size_t size = 0;
  std::vector<std::string> flags;
};

SizeChoice necessary_config(const std::vector<std::size_t>& grid, const std::vector<double>& icap);
SizeChoice sufficient_config(const std::vector<std::size_t>& grid, const std::vector<double>& icap,
                             double total_info, double tol = 0.01);

void write_config_csv(const std::filesystem::path& path, const ConfigCurve& c);
std::string config_summary_json(const ConfigCurve& c);

}  // namespace i2drnn
