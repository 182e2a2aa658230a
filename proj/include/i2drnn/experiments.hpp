#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "i2drnn/capacity.hpp"
#include "i2drnn/datagen.hpp"
#include "i2drnn/infotheory.hpp"
#include "i2drnn/training.hpp"

namespace i2drnn {

/// Runs f(0..n-1) on up to `threads` workers; results keep index order.
template <typename F>
auto parallel_map(std::size_t n, std::size_t threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const std::size_t k = std::max<std::size_t>(1, std::min(threads, n));
  if (k == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

/// 70/30 train/test by sample, last 20% of train carved off as validation.
SequenceDataset copy_dataset(const CopyTaskSpec& spec, std::size_t samples, std::uint64_t seed);
/// Chronological 64/16/20 split; the training segment is cut into windows.
SequenceDataset farima_dataset(const FarimaSpec& spec, std::uint64_t seed, std::size_t train_window);

struct RunResult {
  std::uint64_t seed = 0;
  Metrics test;
  TrainReport report;
  ModelParams params;
};

RunResult train_and_test(const SequenceDataset& ds, const std::vector<std::size_t>& layers, Arch arch, Hyper hyper);

enum class Metric { Rmse, AdjustedMse };

/// One cell of a comparison: a task setting, a model, and the metric to compare on.
struct ConditionSpec {
  std::string sweep;  // "", "N", "S1", "Ts", "two-scale", ...
  std::string value;
  std::string label;  // e.g. I2DRNN, StackedRNN, H30,30
  CopyTaskSpec task;
  std::size_t samples = 200;
  std::vector<std::size_t> layers{10, 10};
  Arch arch = Arch::I2DRNN;
  Metric metric = Metric::Rmse;
};

struct Condition {
  ConditionSpec spec;
  std::vector<RunResult> runs;  // one per seed
  double mean = 0.0, sd = 0.0;  // of the spec's metric over seeds
};

struct ExperimentOptions {
  std::size_t seeds = 5;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;
  Hyper hyper;
  bool keep_params = false;
  std::function<void(const std::string&)> progress;
};

std::vector<ConditionSpec> fig4b_specs();
std::vector<ConditionSpec> fig4cde_specs();
std::vector<ConditionSpec> fig4fg_specs();

/// Seed s of every condition with the same task shares the dataset of seed base_seed + s.
std::vector<Condition> run_conditions(const std::vector<ConditionSpec>& specs, const ExperimentOptions& opts);

double metric_value(const Metrics& m, Metric which);
std::string to_string(Metric m);

/// Per-run rows: sweep, value, label, seed, rmse, mae, adjusted_mse, best_epoch, epochs_run.
void write_runs_csv(const std::filesystem::path& path, const std::vector<Condition>& conds);
/// Per-condition rows: sweep, value, label, metric, mean, sd, n.
void write_summary_csv(const std::filesystem::path& path, const std::vector<Condition>& conds);
std::string summary_table(const std::vector<Condition>& conds);

struct FarimaConfigOptions {
  FarimaSpec spec;
  std::size_t train_window = 100;
  std::size_t mi_max_lag = 30;
  MiOptions mi{30, MiPairing::Matched, true, 1e6};
  LayerPlan plan{2};
  std::vector<std::size_t> grid;  // default 20, 40, ..., 300
  CapacityOptions capacity;       // hx is replaced by the estimate from the data
  bool grid_search = true;
  std::size_t search_seeds = 3;
};

struct GridPoint {
  std::size_t size = 0;
  std::vector<double> val_loss;  // best validation loss per seed
  double mean_val = 0.0;
  double mean_test_rmse = 0.0;
};

struct FarimaConfigResult {
  std::size_t series = 0;
  MiCurve curve;
  ExpFit fit;
  double hx = 0.0;
  ConfigCurve config;
  std::vector<GridPoint> search;
  std::size_t best_size = 0;  // 0 when the grid search was skipped
};

FarimaConfigResult farima_config(const FarimaConfigOptions& fo, const ExperimentOptions& opts);
std::string farima_summary_json(const std::vector<FarimaConfigResult>& rs);
void write_search_csv(const std::filesystem::path& path, const FarimaConfigResult& r);

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);

}  // namespace i2drnn
