#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "i2drnn/datagen.hpp"
#include "i2drnn/infotheory.hpp"
#include "i2drnn/model.hpp"

namespace i2drnn {

struct LayerMiProfile {
  std::vector<MiCurve> layers;  // I(h^l_t; x_{t-lag}), one curve per layer
  bool any_proxy() const;
};

/// Lagged MI between each layer's activations and the assembled input, pooled over
/// sequences (pairs never cross a sequence boundary).
LayerMiProfile layer_mi_profile(const ModelParams& params, std::span<const Sample* const> samples,
                                const std::vector<long>& lags, const MiOptions& opts = {});
LayerMiProfile layer_mi_profile(const ModelParams& params, std::span<const Sample* const> samples,
                                std::size_t max_lag, const MiOptions& opts = {});

struct EmpiricalRates {
  std::size_t layer = 0;
  RateParams rp;
  std::optional<Rates> rates;  // empty when lambda >= 1
  std::string note;
};

/// lambda and eta from the layer's own W^{l->l} and U^{l-1->l}; H_x from `input_series`.
EmpiricalRates empirical_rates(const ModelParams& params, std::size_t layer,
                               std::span<const Vector> input_series, std::size_t tau_max);
/// Assembled inputs x_t of every sample, concatenated.
std::vector<Vector> input_series(const ModelParams& params, std::span<const Sample* const> samples);

struct ScaleCorrelation {
  std::size_t level = 0;  // 0-based layer
  Matrix cov;             // V V^T, output x output
};

ScaleCorrelation scale_correlation(const ModelParams& params, std::size_t level);
/// One matrix per layer; the stacked RNN has output weights only on its top layer.
std::vector<ScaleCorrelation> scale_correlations(const ModelParams& params);

struct Ranking {
  std::vector<std::size_t> indices;
  std::vector<double> correlations;
  std::vector<std::string> flags;
};

/// k partners of `index` with the largest normalized correlation cov_ij / sqrt(cov_ii cov_jj).
Ranking top_correlated(const Matrix& cov, std::size_t index, std::size_t k);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& labels = {});
/// Long format: layer, lag, mi, estimator_flag.
void write_profile_csv(const std::filesystem::path& path, const LayerMiProfile& p);

}  // namespace i2drnn
