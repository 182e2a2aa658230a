#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "i2drnn/datagen.hpp"
#include "i2drnn/model.hpp"

namespace i2drnn {

enum class UpdateMode {
  PerSample,  // one Adam step per training sequence, seeded visiting order
  FullEpoch,  // gradients summed over the epoch in index order, one step per epoch
};

struct Hyper {
  double step_size = 0.001;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  std::uint64_t seed = 0;
  double rec_radius = 0.9;
  UpdateMode mode = UpdateMode::PerSample;

  void validate() const;
};

struct AdamState {
  ModelParams m, v;
  std::size_t step = 0;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  static AdamState for_params(const ModelParams& p);
};

struct TrainReport {
  std::vector<double> train_loss;  // mean per-step loss over the training split
  std::vector<double> val_loss;    // v^l, mean per-step loss over the validation split
  std::size_t best_epoch = 0;      // 1-based
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
  bool early_stopped = false;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Sum over steps of the squared error.
double mse_loss(std::span<const Vector> pred, std::span<const Vector> target);

/// Exact gradient of the summed squared loss for one sequence.
ModelParams bptt_gradients(const ModelParams& params, const ForwardResult& fwd,
                           const InputSequence& inputs, std::span<const Vector> targets);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grads;
};
LossAndGrad loss_and_gradients(const ModelParams& params, const Sample& sample);

void add_to(ModelParams& acc, const ModelParams& g, double scale = 1.0);
double global_norm(const ModelParams& g);

/// Bias-corrected Adam update in place; returns the pre-clip gradient norm.
double adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                 const Hyper& hyper);

TrainResult train(const ModelConfig& cfg, const SequenceDataset& ds, const Hyper& hyper);
TrainResult train(ModelParams init, std::span<const Sample* const> train_set,
                  std::span<const Sample* const> val_set, const Hyper& hyper);

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> adjusted_mse;
  double sum_sq = 0.0;
  std::size_t count = 0;  // entries: output dims x steps
};

Metrics evaluate(const ModelParams& params, std::span<const Sample* const> samples,
                 const CopyTaskMeta* copy = nullptr, bool require_adjusted = false);
Metrics evaluate(const ModelParams& params, const SequenceDataset& ds,
                 const std::vector<std::size_t>& split, bool require_adjusted = false);

double adjusted_mse(double sum_sq, std::size_t count, const CopyTaskMeta& copy);

/// Mean per-step loss over a set of sequences.
double mean_step_loss(const ModelParams& params, std::span<const Sample* const> samples);

/// Wall time is left out by default so reports of identical runs are byte-identical.
std::string report_to_json(const TrainReport& r, bool wall_time = false);
void write_report(const std::filesystem::path& path, const TrainReport& r, bool wall_time = false);
/// Two columns: epoch, loss.
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses,
                    std::size_t first_epoch = 1);

}  // namespace i2drnn
