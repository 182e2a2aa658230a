#include "i2drnn/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "json.hpp"

namespace i2drnn {

namespace {

// Equal-width bin index per sample for one coordinate; a zero-range column is one bin.
std::vector<std::uint32_t> bin_column(std::span<const Vector> v, std::size_t coord, std::size_t bins) {
  double lo = v[0][coord], hi = v[0][coord];
  for (const Vector& s : v) {
    lo = std::min(lo, s[coord]);
    hi = std::max(hi, s[coord]);
  }
  std::vector<std::uint32_t> out(v.size(), 0);
  if (!(hi > lo)) return out;
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto b = static_cast<std::size_t>((v[i][coord] - lo) * scale);
    out[i] = static_cast<std::uint32_t>(std::min(b, bins - 1));
  }
  return out;
}

struct Entropy {
  double h = 0.0;
  std::size_t occupied = 0;
};

Entropy entropy_of_codes(std::vector<std::uint64_t> codes) {
  std::sort(codes.begin(), codes.end());
  const double n = static_cast<double>(codes.size());
  Entropy e;
  for (std::size_t i = 0; i < codes.size();) {
    std::size_t j = i;
    while (j < codes.size() && codes[j] == codes[i]) ++j;
    const double p = static_cast<double>(j - i) / n;
    e.h -= p * std::log(p);
    ++e.occupied;
    i = j;
  }
  return e;
}

double corrected(const Entropy& e, std::size_t n, bool mm) {
  return mm ? e.h + static_cast<double>(e.occupied - 1) / (2.0 * static_cast<double>(n)) : e.h;
}

MiEstimate mi_from_codes(const std::vector<std::uint64_t>& cx, const std::vector<std::uint64_t>& cy,
                         std::uint64_t y_span, bool mm) {
  std::vector<std::uint64_t> joint(cx.size());
  for (std::size_t i = 0; i < cx.size(); ++i) joint[i] = cx[i] * y_span + cy[i];
  const std::size_t n = cx.size();
  const double v = corrected(entropy_of_codes(cx), n, mm) + corrected(entropy_of_codes(cy), n, mm) -
                   corrected(entropy_of_codes(std::move(joint)), n, mm);
  MiEstimate r;
  r.value = v;
  if (v < 0.0) {
    r.value = 0.0;
    r.clamped = true;
  }
  return r;
}

std::vector<std::uint64_t> joint_codes(const std::vector<std::vector<std::uint32_t>>& cols,
                                       std::size_t bins) {
  std::vector<std::uint64_t> codes(cols.empty() ? 0 : cols[0].size(), 0);
  for (const auto& col : cols)
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = codes[i] * bins + col[i];
  return codes;
}

std::vector<std::uint64_t> widen(const std::vector<std::uint32_t>& c) {
  return std::vector<std::uint64_t>(c.begin(), c.end());
}

}  // namespace

MiEstimate binned_mi(std::span<const Vector> xs, std::span<const Vector> ys, const MiOptions& opts) {
  const std::size_t B = opts.bins;
  if (B < 2) throw ConfigError("binned_mi: need at least 2 bins");
  if (xs.empty() || ys.empty()) throw DimensionError("binned_mi: empty input");
  if (xs.size() != ys.size()) throw DimensionError("binned_mi: sample counts differ");
  if (xs.size() < B) throw ConfigError("binned_mi: fewer samples than bins");
  const std::size_t dx = xs[0].size(), dy = ys[0].size();
  if (dx == 0 || dy == 0) throw DimensionError("binned_mi: zero-dimensional samples");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i].size() != dx || ys[i].size() != dy) throw DimensionError("binned_mi: ragged samples");

  std::vector<std::vector<std::uint32_t>> bx(dx), by(dy);
  for (std::size_t c = 0; c < dx; ++c) bx[c] = bin_column(xs, c, B);
  for (std::size_t c = 0; c < dy; ++c) by[c] = bin_column(ys, c, B);

  const double cells = std::pow(static_cast<double>(B), static_cast<double>(dx + dy));
  if (cells <= opts.max_joint_cells) {
    const auto cy = joint_codes(by, B);
    const auto y_span = static_cast<std::uint64_t>(std::llround(std::pow(static_cast<double>(B), static_cast<double>(dy))));
    return mi_from_codes(joint_codes(bx, B), cy, y_span, opts.bias_correction);
  }

  MiEstimate total;
  total.proxy = true;
  auto add_pair = [&](std::size_t i, std::size_t j) {
    const MiEstimate e = mi_from_codes(widen(bx[i]), widen(by[j]), B, opts.bias_correction);
    total.value += e.value;
    total.clamped |= e.clamped;
  };
  if (opts.pairing == MiPairing::Matched) {
    if (dx != dy) throw DimensionError("binned_mi: matched pairing needs equal dimensions");
    for (std::size_t i = 0; i < dx; ++i) add_pair(i, i);
  } else {
    for (std::size_t i = 0; i < dx; ++i)
      for (std::size_t j = 0; j < dy; ++j) add_pair(i, j);
  }
  return total;
}

double binned_mi(std::span<const double> x, std::span<const double> y, std::size_t bins) {
  std::vector<Vector> xs, ys;
  xs.reserve(x.size());
  ys.reserve(y.size());
  for (double v : x) xs.push_back({v});
  for (double v : y) ys.push_back({v});
  return binned_mi(xs, ys, MiOptions{bins}).value;
}

double gaussian_linear_mi(const Matrix& w, const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw DimensionError("gaussian_linear_mi: sigma is not square");
  if (w.cols() != sigma.rows()) throw DimensionError("gaussian_linear_mi: W and sigma shapes differ");
  const Matrix sum = sigma + w.transpose() * w;
  try {
    return 0.5 * (log_det_spd(sum) - log_det_spd(sigma));
  } catch (const NumericError&) {
    throw NumericError("gaussian_linear_mi: sigma is singular or not positive definite");
  }
}

bool MiCurve::any_proxy() const {
  return std::any_of(flags.begin(), flags.end(),
                     [](const std::string& f) { return f.find("proxy") != std::string::npos; });
}

namespace {

void push_entry(MiCurve& curve, std::size_t tau, const MiEstimate& e) {
  curve.lags.push_back(static_cast<long>(tau));
  curve.mi.push_back(e.value);
  std::string flag = e.proxy ? "proxy" : "";
  if (e.clamped) {
    flag += flag.empty() ? "clamped" : "+clamped";
    ++curve.clamped_count;
  }
  curve.flags.push_back(flag);
}

void normalize_curve(MiCurve& curve) {
  const double base = curve.mi[0];
  if (!(base > 0.0)) throw NumericError("lagged_mi_curve: cannot normalize by a zero lag-0 entry");
  for (double& v : curve.mi) v /= base;
  curve.normalized = true;
}

}  // namespace

MiCurve lagged_mi_curve(std::span<const Vector> source, std::span<const Vector> target,
                        std::size_t max_lag, const MiOptions& opts, bool normalize) {
  if (source.size() != target.size()) throw DimensionError("lagged_mi_curve: series lengths differ");
  if (max_lag >= source.size()) throw ConfigError("lagged_mi_curve: max_lag must be below the series length");
  MiCurve curve;
  for (std::size_t tau = 0; tau <= max_lag; ++tau)
    push_entry(curve, tau, binned_mi(source.subspan(0, source.size() - tau), target.subspan(tau), opts));
  if (normalize) normalize_curve(curve);
  return curve;
}

MiCurve lagged_mi_curve(const std::vector<std::vector<Vector>>& sources,
                        const std::vector<std::vector<Vector>>& targets, std::size_t max_lag,
                        const MiOptions& opts, bool normalize) {
  if (sources.size() != targets.size()) throw DimensionError("lagged_mi_curve: sequence counts differ");
  MiCurve curve;
  for (std::size_t tau = 0; tau <= max_lag; ++tau) {
    std::vector<Vector> xs, ys;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (sources[s].size() != targets[s].size()) throw DimensionError("lagged_mi_curve: series lengths differ");
      for (std::size_t t = tau; t < sources[s].size(); ++t) {
        xs.push_back(sources[s][t - tau]);
        ys.push_back(targets[s][t]);
      }
    }
    if (xs.empty()) throw ConfigError("lagged_mi_curve: max_lag must be below the sequence lengths");
    push_entry(curve, tau, binned_mi(xs, ys, opts));
  }
  if (normalize) normalize_curve(curve);
  return curve;
}

namespace {

struct LineFit {
  double intercept = 0, slope = 0, sse = 0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.sse += r * r;
  }
  return f;
}

}  // namespace

ExpFit fit_exponential(const MiCurve& curve, double floor) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < curve.mi.size(); ++i)
    if (curve.mi[i] > floor) {
      x.push_back(static_cast<double>(curve.lags[i]));
      y.push_back(std::log(curve.mi[i]));
    }
  if (x.size() < 3) throw NumericError("fit_exponential: fewer than 3 entries above the positivity floor");
  const LineFit lf = least_squares(x, y);
  ExpFit fit;
  fit.a = std::exp(lf.intercept);
  fit.k = std::exp(lf.slope);
  fit.residual = lf.sse;
  fit.points = x.size();
  const double lo = 1e-6, hi = 1.0 - 1e-6;
  if (!(fit.k > lo && fit.k < hi)) {
    fit.k = std::clamp(fit.k, lo, hi);
    fit.k_clamped = true;
  }
  return fit;
}

double unit_gaussian_hx() { return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e); }

double input_rate(const RateParams& rp) {
  if (rp.dim_h < 1) throw ConfigError("rates: dim_h must be >= 1");
  if (!(rp.lambda > 0.0)) throw ConfigError("rates: the input rate needs lambda > 0");
  if (!(rp.eta > 0.0)) throw ConfigError("rates: eta must be > 0");
  return 0.5 * static_cast<double>(rp.dim_h) * std::log1p(rp.eta / rp.lambda);
}

double recurrent_rate(const RateParams& rp, double tau) {
  if (rp.dim_h < 1) throw ConfigError("rates: dim_h must be >= 1");
  if (!(rp.lambda > 0.0 && rp.lambda < 1.0)) {
    throw ConfigError("rates: the recurrent rate needs lambda in (0, 1), got " + std::to_string(rp.lambda));
  }
  if (!(rp.eta > 0.0)) throw ConfigError("rates: eta must be > 0");
  if (!(tau > 0.0)) throw ConfigError("rates: tau must be positive");
  const double lt = std::pow(rp.lambda, tau);
  const double z = 2.0 * std::numbers::pi * std::numbers::e * (1.0 - rp.lambda) * lt /
                   (-std::expm1(tau * std::log(rp.lambda)) * rp.eta * std::exp(2.0 * rp.hx));
  return 0.5 * static_cast<double>(rp.dim_h) * std::log1p(z);
}

Rates analytic_rates(const RateParams& rp, std::size_t tau_max) {
  Rates r;
  r.dx = input_rate(rp);
  for (std::size_t tau = 1; tau <= tau_max; ++tau) {
    r.dr.lags.push_back(static_cast<long>(tau));
    r.dr.mi.push_back(recurrent_rate(rp, static_cast<double>(tau)));
    r.dr.flags.emplace_back();
  }
  return r;
}

double decay_rate(const MiCurve& curve, long tail_start) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < curve.mi.size(); ++i) {
    if (curve.lags[i] < tail_start) continue;
    if (!(curve.mi[i] > 0.0)) throw NumericError("decay_rate: non-positive entry in the tail at lag " + std::to_string(curve.lags[i]));
    x.push_back(static_cast<double>(curve.lags[i]));
    y.push_back(std::log(curve.mi[i]));
  }
  if (x.size() < 2) throw NumericError("decay_rate: need at least 2 tail entries");
  return std::exp(least_squares(x, y).slope);
}

double estimate_Hx(std::span<const Vector> series) {
  constexpr std::size_t p = 5;
  if (series.size() < 50) throw ConfigError("estimate_Hx: need at least 50 steps");
  const std::size_t D = series[0].size();
  if (D == 0) throw DimensionError("estimate_Hx: empty samples");
  double total = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> x(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
      if (series[t].size() != D) throw DimensionError("estimate_Hx: ragged series");
      x[t] = series[t][d];
    }
    // Regressors: 1, x_{t-1}, ..., x_{t-p}
    Matrix xtx(p + 1, p + 1);
    Vector xty(p + 1, 0.0);
    Vector row(p + 1);
    double var = 0.0, mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    if (!(var > 0.0)) throw NumericError("estimate_Hx: dimension " + std::to_string(d) + " is constant");
    for (std::size_t t = p; t < x.size(); ++t) {
      row[0] = 1.0;
      for (std::size_t k = 1; k <= p; ++k) row[k] = x[t - k];
      outer_acc(xtx, row, row);
      for (std::size_t k = 0; k <= p; ++k) xty[k] += row[k] * x[t];
    }
    Vector beta;
    try {
      beta = solve_spd(xtx, xty);
    } catch (const NumericError&) {
      throw NumericError("estimate_Hx: dimension " + std::to_string(d) + " is degenerate (singular AR design)");
    }
    double rss = 0.0;
    for (std::size_t t = p; t < x.size(); ++t) {
      double pred = beta[0];
      for (std::size_t k = 1; k <= p; ++k) pred += beta[k] * x[t - k];
      rss += (x[t] - pred) * (x[t] - pred);
    }
    const double s2 = rss / static_cast<double>(x.size() - p - (p + 1));
    if (!(s2 > 1e-12 * var)) {
      throw NumericError("estimate_Hx: dimension " + std::to_string(d) +
                         " is deterministic (zero residual variance)");
    }
    total += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * s2);
  }
  return total / static_cast<double>(D);
}

void write_curve_csv(const std::filesystem::path& path, const MiCurve& curve) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "lag,mi,flag\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.mi.size(); ++i)
    f << curve.lags[i] << ',' << curve.mi[i] << ',' << (i < curve.flags.size() ? curve.flags[i] : "") << '\n';
}

std::string fit_to_json(const ExpFit& fit) {
  nlohmann::json j{{"a", fit.a},           {"k", fit.k},
                   {"residual", fit.residual}, {"points", fit.points},
                   {"flags", fit.k_clamped ? std::vector<std::string>{"k_clamped"} : std::vector<std::string>{}}};
  return j.dump(2);
}

}  // namespace i2drnn
