#include "i2drnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace i2drnn {

bool LayerMiProfile::any_proxy() const {
  return std::any_of(layers.begin(), layers.end(), [](const MiCurve& c) { return c.any_proxy(); });
}

LayerMiProfile layer_mi_profile(const ModelParams& params, std::span<const Sample* const> samples,
                                const std::vector<long>& lags, const MiOptions& opts) {
  if (samples.empty()) throw ConfigError("layer_mi_profile: no sequences");
  if (lags.empty()) throw ConfigError("layer_mi_profile: no lags requested");
  const std::size_t L = params.config.num_layers;
  std::vector<ForwardResult> runs;
  runs.reserve(samples.size());
  for (const Sample* s : samples) runs.push_back(forward_sequence(params, s->inputs));

  LayerMiProfile prof;
  prof.layers.resize(L);
  for (long lag : lags) {
    if (lag < 0) throw ConfigError("layer_mi_profile: negative lag");
    std::vector<Vector> xs;
    std::vector<std::vector<Vector>> hs(L);
    for (const auto& run : runs) {
      const auto T = static_cast<long>(run.trace.size());
      for (long t = lag; t < T; ++t) {
        xs.push_back(run.trace[static_cast<std::size_t>(t - lag)].x);
        for (std::size_t l = 0; l < L; ++l) hs[l].push_back(run.trace[static_cast<std::size_t>(t)].h[l]);
      }
    }
    if (xs.size() < opts.bins) {
      throw ConfigError("layer_mi_profile: sequences too short for lag " + std::to_string(lag));
    }
    for (std::size_t l = 0; l < L; ++l) {
      const MiEstimate e = binned_mi(hs[l], xs, opts);
      MiCurve& c = prof.layers[l];
      c.lags.push_back(lag);
      c.mi.push_back(e.value);
      std::string flag = e.proxy ? "proxy" : "";
      if (e.clamped) {
        flag += flag.empty() ? "clamped" : "+clamped";
        ++c.clamped_count;
      }
      c.flags.push_back(flag);
    }
  }
  return prof;
}

LayerMiProfile layer_mi_profile(const ModelParams& params, std::span<const Sample* const> samples,
                                std::size_t max_lag, const MiOptions& opts) {
  std::vector<long> lags(max_lag + 1);
  std::iota(lags.begin(), lags.end(), 0L);
  return layer_mi_profile(params, samples, lags, opts);
}

std::vector<Vector> input_series(const ModelParams& params, std::span<const Sample* const> samples) {
  std::vector<Vector> out;
  for (const Sample* s : samples) {
    const auto run = forward_sequence(params, s->inputs);
    for (const auto& st : run.trace) out.push_back(st.x);
  }
  return out;
}

EmpiricalRates empirical_rates(const ModelParams& params, std::size_t layer,
                               std::span<const Vector> series, std::size_t tau_max) {
  const auto& cfg = params.config;
  if (layer >= cfg.num_layers) throw ConfigError("empirical_rates: no layer " + std::to_string(layer));
  EmpiricalRates r;
  r.layer = layer;
  r.rp.dim_h = cfg.layer_dims[layer];
  r.rp.lambda = gram_largest_eigenvalue(params.rec[layer][layer]);
  r.rp.eta = gram_largest_eigenvalue(params.feed[layer]);
  if (!(r.rp.eta > 0.0)) throw ConfigError("empirical_rates: feed matrix of layer " + std::to_string(layer) + " is zero");
  r.rp.hx = estimate_Hx(series);
  if (!(r.rp.lambda > 0.0)) {
    r.note = "recurrent matrix is zero";
    return r;
  }
  if (r.rp.lambda >= 1.0) {
    r.note = "lambda >= 1, rates undefined";
    return r;
  }
  r.rates = analytic_rates(r.rp, tau_max);
  return r;
}

ScaleCorrelation scale_correlation(const ModelParams& params, std::size_t level) {
  const auto& cfg = params.config;
  if (level >= cfg.num_layers || !cfg.has_out(level)) {
    throw ConfigError("scale_correlation: layer " + std::to_string(level) + " has no output weights");
  }
  const Matrix& v = params.out[level];
  ScaleCorrelation sc;
  sc.level = level;
  sc.cov = Matrix(v.rows(), v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = i; j < v.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < v.cols(); ++c) s += v(i, c) * v(j, c);
      sc.cov(i, j) = s;
      sc.cov(j, i) = s;
    }
  return sc;
}

std::vector<ScaleCorrelation> scale_correlations(const ModelParams& params) {
  if (params.config.arch != Arch::I2DRNN) {
    throw ConfigError("scale_correlations: the stacked RNN only has output weights on its top layer");
  }
  std::vector<ScaleCorrelation> out;
  for (std::size_t l = 0; l < params.config.num_layers; ++l) out.push_back(scale_correlation(params, l));
  return out;
}

Ranking top_correlated(const Matrix& cov, std::size_t index, std::size_t k) {
  const std::size_t n = cov.rows();
  if (cov.cols() != n) throw DimensionError("top_correlated: matrix must be square");
  if (index >= n) throw ConfigError("top_correlated: index out of range");
  if (k >= n) throw ConfigError("top_correlated: k must be below the matrix size");
  if (!(cov(index, index) > 0.0)) throw NumericError("top_correlated: row " + std::to_string(index) + " has zero variance");
  Ranking r;
  std::vector<std::pair<double, std::size_t>> cand;
  bool skipped = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == index) continue;
    if (!(cov(j, j) > 0.0)) {
      skipped = true;
      continue;
    }
    cand.emplace_back(cov(index, j) / std::sqrt(cov(index, index) * cov(j, j)), j);
  }
  if (skipped) r.flags.push_back("zero_variance_excluded");
  if (std::all_of(cand.begin(), cand.end(), [](const auto& c) { return c.first == 0.0; })) {
    r.flags.push_back("no_correlation");
    return r;
  }
  std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i < std::min(k, cand.size()); ++i) {
    r.indices.push_back(cand[i].second);
    r.correlations.push_back(cand[i].first);
  }
  if (k < cand.size() && cand[k - 1].first == cand[k].first) r.flags.push_back("tie_at_cutoff");
  return r;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != m.cols()) throw DimensionError("write_matrix_csv: label count mismatch");
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << std::setprecision(17);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    if (j) f << ',';
    f << (labels.empty() ? "r" + std::to_string(j) : labels[j]);
  }
  f << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << m(i, j);
    }
    f << '\n';
  }
}

void write_profile_csv(const std::filesystem::path& path, const LayerMiProfile& p) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "layer,lag,mi,estimator_flag\n" << std::setprecision(17);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& c = p.layers[l];
    for (std::size_t i = 0; i < c.mi.size(); ++i)
      f << l + 1 << ',' << c.lags[i] << ',' << c.mi[i] << ',' << (c.flags[i].empty() ? "joint" : c.flags[i]) << '\n';
  }
}

}  // namespace i2drnn
