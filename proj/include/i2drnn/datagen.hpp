#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "i2drnn/model.hpp"
#include "i2drnn/rng.hpp"

namespace i2drnn {

struct Sample {
  InputSequence inputs;
  std::vector<Vector> targets;
};

struct CopyTaskSpec {
  int scales = 2;
  std::size_t channels = 1;  // N
  std::size_t s1 = 10, s2 = 10, s3 = 10;
  std::size_t t1 = 15, t2 = 15, t3 = 15;

  void validate() const;
  std::size_t sequence_length() const;
  /// Lag between the first payload and its recall (the long-range dependency).
  std::size_t long_recall_lag() const;
  /// Lag between the third-scale payload and its recall (three-scale only).
  std::size_t extreme_recall_lag() const;
};

/// Segment metadata needed by the adjusted MSE.
struct CopyTaskMeta {
  CopyTaskSpec spec;
  double s1 = 0, s2 = 0, ts = 0;
};

struct FarimaSpec {
  double ar = 0.9;       // p
  double d = 0.1;        // fractional order
  std::size_t ma = 0;    // q
  std::size_t series = 20;  // D
  std::size_t length = 3000;
  std::size_t burn_in = 1000;
  std::size_t truncation = 1000;  // M

  void validate() const;
};

/// psi_0..psi_M of (1-B)^{-d}.
std::vector<double> fractional_weights(double d, std::size_t truncation);

struct ScaleMeta {
  std::size_t coarse_ratio = 1;
  std::size_t fine_ratio = 1;
};

struct Range {
  Vector min, max;
  std::vector<bool> constant;
};

struct Normalization {
  bool fitted = false;
  Range same, coarse, fine, target;
  std::size_t spillover = 0;  // val/test entries outside [0, 1]
  std::vector<std::string> warnings;
};

struct Splits {
  std::vector<std::size_t> train, val, test;
};

struct SequenceDataset {
  std::string kind;  // copy2, copy3, farima, csv
  std::vector<Sample> samples;
  std::size_t same_dim = 0, coarse_dim = 0, fine_dim = 0, target_dim = 0;
  ScaleMeta scale;
  std::optional<CopyTaskMeta> copy;
  bool single_sequence = false;
  Normalization norm;
  Splits split;

  /// Model input layout implied by the data (encoder_dim chosen by the caller).
  ModelConfig model_config(std::vector<std::size_t> layer_dims, Arch arch,
                           std::size_t encoder_dim = 0) const;
  std::vector<const Sample*> split_samples(const std::vector<std::size_t>& idx) const;
};

/// Raw symbol streams of one copy-task channel (before normalization).
struct CopyChannel {
  std::vector<double> input, output;
};

/// Builds one channel from explicit payload draws (p1: S1 values, p2: S2, p3: S3).
CopyChannel copy_channel(const CopyTaskSpec& spec, const std::vector<int>& p1,
                         const std::vector<int>& p2, const std::vector<int>& p3 = {});

SequenceDataset gen_copy_task(const CopyTaskSpec& spec, std::size_t n_samples, const Rng& rng);
SequenceDataset gen_farima(const FarimaSpec& spec, const Rng& rng);

struct CsvSeriesSpec {
  std::filesystem::path target;
  std::optional<std::filesystem::path> same, coarse, fine;
  std::size_t coarse_ratio = 1;
  std::size_t fine_ratio = 1;
  /// Feed y_{t-1} as part of x^S_t (zero at t = 0).
  bool target_history = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

SequenceDataset load_csv_series(const CsvSeriesSpec& spec);

struct SplitRatios {
  double train = 0.7, val = 0.0, test = 0.3;
};

struct SplitOptions {
  /// Fraction of the training portion moved (from its end) into validation.
  double val_carve = 0.0;
  /// For single-sequence data: cut the training segment into windows of this length (0 = none).
  std::size_t train_window = 0;
};

/// Splits (chronologically for single-sequence data, by sample order otherwise) and
/// min-max scales every dimension with statistics from the training portion.
SequenceDataset normalize_split(SequenceDataset ds, const SplitRatios& ratios,
                                const SplitOptions& opts = {});

double denormalize_target(const Normalization& norm, std::size_t dim, double value);
Vector denormalize_target(const Normalization& norm, const Vector& v);

/// Writes inputs/targets CSVs per sample plus manifest.json; returns the files written.
std::vector<std::filesystem::path> export_dataset(const SequenceDataset& ds,
                                                  const std::filesystem::path& dir,
                                                  const std::string& manifest_extra_json = "{}");

}  // namespace i2drnn
