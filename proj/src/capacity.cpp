#include "i2drnn/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

#include "json.hpp"

namespace i2drnn {

namespace {

constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

void require_unit(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(what) + " must lie in (0, 1), got " + std::to_string(v));
}

}  // namespace

double lambda1(double k) {
  require_unit(k, "lambda1: k");
  // (2 - sqrt(4 - 4k)) / (2k), rationalized to avoid cancellation as k -> 0.
  return 1.0 / (1.0 + std::sqrt(1.0 - k));
}

double LambdaObjective::operator()(double lambda, std::size_t horizon) const {
  const double scale = std::exp(2.0 * hx);
  double f = 0.0;
  double lt = 1.0, kt = 1.0, qt = 1.0;
  for (std::size_t tau = 1; tau <= horizon; ++tau) {
    lt *= lambda;
    kt *= k;
    qt *= prev_q;
    const double w = a * kt - prev_h * qt;
    double term;
    if (kind == LambdaObjectiveKind::Exact) {
      const double num = kTwoPiE * (1.0 - lambda) * eta * lt;
      const double den = kTwoPiE * lt * lambda * (1.0 - lambda) + eta * scale * (1.0 - lt);
      term = std::log1p(num / den);
    } else {
      term = kTwoPiE * (1.0 - lambda) * lt / scale;
    }
    f += term * w;
  }
  return f;
}

LambdaSolve maximize_on_interval(const std::function<double(double)>& f, double lo, double hi) {
  constexpr int kGrid = 400;
  std::vector<double> xs(kGrid + 1), fs(kGrid + 1);
  std::size_t best = 0;
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  for (int i = 0; i <= kGrid; ++i) {
    xs[i] = lo + (hi - lo) * i / kGrid;
    fs[i] = f(xs[i]);
    if (fs[i] > fs[best]) best = static_cast<std::size_t>(i);
    fmin = std::min(fmin, fs[i]);
    fmax = std::max(fmax, fs[i]);
  }
  LambdaSolve r;
  if (!(fmax - fmin > 1e-14 * std::max(1.0, std::abs(fmax)))) {
    r.lambda = 0.5 * (lo + hi);
    r.objective = f(r.lambda);
    r.flat = true;
    return r;
  }
  double a = xs[best == 0 ? 0 : best - 1];
  double b = xs[std::min<std::size_t>(best + 1, kGrid)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-10) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  r.lambda = 0.5 * (a + b);
  r.objective = f(r.lambda);
  // The optimum may sit on the interval edge, where golden section cannot go.
  if (fs[best] > r.objective) {
    r.lambda = xs[best];
    r.objective = fs[best];
  }
  return r;
}

LambdaSolve solve_lambda_numeric(const LambdaObjective& obj, std::size_t horizon) {
  if (horizon < 10) throw ConfigError("solve_lambda_numeric: horizon must be >= 10");
  return maximize_on_interval([&](double l) { return obj(l, horizon); });
}

double lambda2_numeric(double k, double q, const Lambda2Options& opts) {
  LambdaObjective obj;
  obj.kind = LambdaObjectiveKind::Exact;
  obj.a = opts.a;
  obj.k = k;
  obj.eta = opts.eta;
  obj.hx = opts.hx;
  obj.prev_h = opts.h1;
  obj.prev_q = q;
  return solve_lambda_numeric(obj, opts.horizon).lambda;
}

Lambda2Result lambda2(double k, double q, const Lambda2Options& opts) {
  require_unit(k, "lambda2: k");
  require_unit(q, "lambda2: q");
  const double s = k + q + k * q;
  Lambda2Result r;
  if (s < 1.0) {
    r.value = 1.0 / (1.0 + std::sqrt(1.0 - s));  // (1 - sqrt(1 - s)) / s
    return r;
  }
  r.value = lambda2_numeric(k, q, opts);
  r.fallback = true;
  return r;
}

double lambda3_polynomial(double x, double k, double l2) {
  return 1.0 - 2.0 * x + (k + l2) * x * x - k * l2 * x * x * x;
}

double lambda3(double k, double l2) {
  require_unit(k, "lambda3: k");
  require_unit(l2, "lambda3: lambda2");
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (lambda3_polynomial(mid, k, l2) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MiCurve layer_info_curve(double lambda, std::size_t dim, double eta, double hx, std::size_t tau_max) {
  if (tau_max == 0) throw ConfigError("layer_info_curve: tau_max must be >= 1");
  RateParams rp{dim, lambda, eta, hx};
  const Rates r = analytic_rates(rp, tau_max);
  MiCurve c;
  c.lags.push_back(0);
  c.mi.push_back(r.dx);
  c.flags.emplace_back();
  c.lags.insert(c.lags.end(), r.dr.lags.begin(), r.dr.lags.end());
  c.mi.insert(c.mi.end(), r.dr.mi.begin(), r.dr.mi.end());
  c.flags.insert(c.flags.end(), r.dr.flags.begin(), r.dr.flags.end());
  return c;
}

namespace {

std::vector<double> pointwise_max(const std::vector<MiCurve>& curves) {
  if (curves.empty()) throw ConfigError("capacity: no layer curves");
  std::vector<double> m = curves[0].mi;
  for (const auto& c : curves) {
    if (c.lags != curves[0].lags) throw DimensionError("capacity: layer curves use different lag grids");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::max(m[i], c.mi[i]);
  }
  return m;
}

}  // namespace

double overall_capacity(const std::vector<MiCurve>& curves) {
  const auto m = pointwise_max(curves);
  double s = 0.0;
  for (double v : m) s += v;
  return s;
}

std::size_t coverage_tau_max(double k, double coverage, std::size_t cap) {
  require_unit(k, "coverage_tau_max: k");
  // Share of lags 0..tau in the infinite sum is 1 - k^{tau+1}.
  for (std::size_t tau = 0; tau < cap; ++tau)
    if (1.0 - std::pow(k, static_cast<double>(tau + 1)) >= coverage) return std::max<std::size_t>(tau, 1);
  return cap;
}

CapacityEstimate icap_estimate(const ExpFit& g, const std::vector<MiCurve>& curves, std::size_t tau_max) {
  const auto m = pointwise_max(curves);
  if (m.size() != tau_max + 1) throw DimensionError("icap_estimate: curves must cover lags 0..tau_max");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (curves[0].lags[i] != static_cast<long>(i)) throw DimensionError("icap_estimate: lag grid must be 0..tau_max");
  CapacityEstimate e;
  e.curves = curves;
  double gt = g.a;
  for (std::size_t tau = 0; tau <= tau_max; ++tau) {
    e.icap += std::min(gt, m[tau]);
    e.total_info += gt;
    e.capacity += m[tau];
    gt *= g.k;
  }
  e.alpha = e.total_info > 0.0 ? e.icap / e.total_info : 0.0;
  if (g.k > 0.0 && g.k < 1.0) e.short_horizon = 1.0 - std::pow(g.k, static_cast<double>(tau_max + 1)) < 0.99;
  return e;
}

std::vector<std::size_t> LayerPlan::split(std::size_t total) const {
  if (num_layers < 1 || num_layers > 3) throw ConfigError("layer plan: 1 to 3 layers supported");
  if (total < num_layers) throw ConfigError("layer plan: total size below the layer count");
  std::vector<std::size_t> sizes(num_layers, total / num_layers);
  for (std::size_t i = 0; i < total % num_layers; ++i) ++sizes[i];
  return sizes;
}

bool ConfigCurve::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

std::vector<double> lambda_chain(double k, std::size_t layers, std::vector<std::string>* flags,
                                 const CapacityOptions& opts) {
  std::vector<double> l;
  l.push_back(lambda1(k));
  if (flags) {
    LambdaObjective obj;
    obj.kind = LambdaObjectiveKind::LongRange;
    obj.k = k;
    obj.eta = opts.eta;
    obj.hx = opts.hx;
    const double num = solve_lambda_numeric(obj, opts.check_horizon).lambda;
    if (std::abs(num - l[0]) > 0.05) flags->push_back("lambda1_numeric_disagrees");
  }
  if (layers >= 2) {
    Lambda2Options o2;
    o2.eta = opts.eta;
    o2.hx = opts.hx;
    const auto r2 = lambda2(k, l[0], o2);
    if (r2.fallback && flags) flags->push_back("lambda2_fallback");
    l.push_back(r2.value);
  }
  if (layers >= 3) l.push_back(lambda3(k, l[1]));
  return l;
}

ConfigCurve config_curve(const ExpFit& g, const LayerPlan& plan, const std::vector<std::size_t>& grid,
                         const CapacityOptions& opts) {
  if (grid.size() < 5) throw ConfigError("config_curve: need at least 5 grid points");
  const std::size_t step = grid[1] - grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1] || grid[i] - grid[i - 1] != step) {
      throw ConfigError("config_curve: grid must be strictly increasing with uniform spacing");
    }
  require_unit(g.k, "config_curve: fitted k");
  if (!(g.a > 0.0)) throw ConfigError("config_curve: fitted a must be > 0");

  ConfigCurve c;
  c.grid = grid;
  c.tau_max = opts.tau_max > 0 ? opts.tau_max : coverage_tau_max(g.k);
  c.lambdas = lambda_chain(g.k, plan.num_layers, &c.flags, opts);
  for (std::size_t total : grid) {
    const auto sizes = plan.split(total);
    std::vector<MiCurve> curves;
    for (std::size_t l = 0; l < sizes.size(); ++l)
      curves.push_back(layer_info_curve(c.lambdas[l], sizes[l], opts.eta, opts.hx, c.tau_max));
    const CapacityEstimate e = icap_estimate(g, curves, c.tau_max);
    c.icap.push_back(e.icap);
    c.capacity.push_back(e.capacity);
    c.total_info = e.total_info;
    if (e.short_horizon && !c.has_flag("short_horizon")) c.flags.push_back("short_horizon");
  }
  for (std::size_t i = 1; i < c.icap.size(); ++i)
    if (c.icap[i] < c.icap[i - 1] - 1e-12 * std::abs(c.icap[i - 1])) {
      c.flags.push_back("icap_not_monotone");
      break;
    }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double h = static_cast<double>(step);
  c.d1.assign(grid.size(), nan);
  c.d2.assign(grid.size(), nan);
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    c.d1[i] = (c.icap[i + 1] - c.icap[i - 1]) / (2 * h);
    c.d2[i] = (c.icap[i + 1] - 2 * c.icap[i] + c.icap[i - 1]) / (h * h);
  }
  const SizeChoice n = necessary_config(grid, c.icap);
  const SizeChoice s = sufficient_config(grid, c.icap, c.total_info, opts.tol);
  c.necessary = n.size;
  c.sufficient = s.size;
  c.flags.insert(c.flags.end(), n.flags.begin(), n.flags.end());
  c.flags.insert(c.flags.end(), s.flags.begin(), s.flags.end());
  return c;
}

SizeChoice necessary_config(const std::vector<std::size_t>& grid, const std::vector<double>& icap) {
  if (grid.size() < 5 || icap.size() != grid.size()) {
    throw ConfigError("necessary_config: need >= 5 points with one value per grid size");
  }
  const double h = static_cast<double>(grid[1] - grid[0]);
  double scale = 0.0;
  for (double v : icap) scale = std::max(scale, std::abs(v));
  const double eps = 1e-12 * std::max(scale, 1e-300) / (h * h);
  SizeChoice out;
  std::size_t best = 1;
  double best_d2 = std::numeric_limits<double>::infinity();
  bool any_negative = false, any_positive = false;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double d2 = (icap[i + 1] - 2 * icap[i] + icap[i - 1]) / (h * h);
    any_negative |= d2 < -eps;
    any_positive |= d2 > eps;
    if (d2 < best_d2 - eps) {  // strict, so ties keep the smaller size
      best_d2 = d2;
      best = i;
    }
  }
  if (!any_negative && !any_positive) {
    out.size = grid[1];
    out.flags.push_back("no_curvature");
    return out;
  }
  if (!any_negative) out.flags.push_back("convex");
  out.size = grid[best];
  return out;
}

SizeChoice sufficient_config(const std::vector<std::size_t>& grid, const std::vector<double>& icap,
                             double total_info, double tol) {
  if (!(total_info > 0.0)) throw ConfigError("sufficient_config: total information must be > 0");
  if (!(tol > 0.0 && tol <= 0.1)) throw ConfigError("sufficient_config: tol must lie in (0, 0.1]");
  if (grid.empty() || icap.size() != grid.size()) throw ConfigError("sufficient_config: grid/value mismatch");
  SizeChoice out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (icap[i] >= (1.0 - tol) * total_info) {
      out.size = grid[i];
      return out;
    }
  out.size = grid.back();
  out.flags.push_back("unsaturated");
  return out;
}

void write_config_csv(const std::filesystem::path& path, const ConfigCurve& c) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "size,icap,d1,d2\n" << std::setprecision(17);
  auto put = [&](double v) {
    if (std::isnan(v)) {
      f << "";
    } else {
      f << v;
    }
  };
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    f << c.grid[i] << ',' << c.icap[i] << ',';
    put(c.d1[i]);
    f << ',';
    put(c.d2[i]);
    f << '\n';
  }
}

std::string config_summary_json(const ConfigCurve& c) {
  nlohmann::json j{{"I_n", c.necessary},          {"I_s", c.sufficient}, {"total_info", c.total_info},
                   {"tau_max", c.tau_max},        {"lambdas", c.lambdas}, {"flags", c.flags},
                   {"grid", c.grid},              {"icap", c.icap}};
  return j.dump(2);
}

}  // namespace i2drnn
