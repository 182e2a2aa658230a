#include "i2drnn/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace i2drnn {

void CopyTaskSpec::validate() const {
  if (scales != 2 && scales != 3) throw ConfigError("copy task: scales must be 2 or 3");
  if (channels < 1) throw ConfigError("copy task: N must be >= 1");
  if (s1 < 1 || s2 < 1 || t1 < 1 || t2 < 1) throw ConfigError("copy task: all lengths must be >= 1");
  if (scales == 3 && (s3 < 1 || t3 < 1)) throw ConfigError("copy task: S3/T3 must be >= 1");
}

std::size_t CopyTaskSpec::sequence_length() const {
  const std::size_t two = 2 * s1 + t1 + 2 * s2 + t2;
  return scales == 2 ? two : two + 2 * s3 + 2 * t3;
}

std::size_t CopyTaskSpec::long_recall_lag() const { return s1 + t1 + 2 * s2 + t2; }

std::size_t CopyTaskSpec::extreme_recall_lag() const {
  return scales == 3 ? s3 + t3 + (2 * s1 + t1 + 2 * s2 + t2) + t3 : 0;
}

CopyChannel copy_channel(const CopyTaskSpec& spec, const std::vector<int>& p1,
                         const std::vector<int>& p2, const std::vector<int>& p3) {
  spec.validate();
  if (p1.size() != spec.s1 || p2.size() != spec.s2) {
    throw DimensionError("copy_channel: payload lengths do not match S1/S2");
  }
  if (spec.scales == 3 && p3.size() != spec.s3) {
    throw DimensionError("copy_channel: payload length does not match S3");
  }
  CopyChannel ch;
  auto push = [](std::vector<double>& v, std::size_t n, double value) { v.insert(v.end(), n, value); };
  auto push_seq = [](std::vector<double>& v, const std::vector<int>& p) {
    for (int x : p) v.push_back(x);
  };
  if (spec.scales == 3) {
    push_seq(ch.input, p3);
    push(ch.input, spec.t3, 0);
    push(ch.output, spec.s3 + spec.t3, 0);
  }
  push_seq(ch.input, p1);
  push(ch.input, spec.t1, 0);
  push_seq(ch.input, p2);
  push(ch.input, spec.s2, 19);
  push(ch.input, spec.t2, 0);
  push(ch.input, spec.s1, 9);

  push(ch.output, spec.s1 + spec.t1 + spec.s2, 0);
  push_seq(ch.output, p2);
  push(ch.output, spec.t2, 0);
  push_seq(ch.output, p1);
  if (spec.scales == 3) {
    // Delimiter run, then the recall marker during which the third payload is copied.
    push(ch.input, spec.t3, 29);
    push(ch.input, spec.s3, 20);
    push(ch.output, spec.t3, 0);
    push_seq(ch.output, p3);
  }
  return ch;
}

SequenceDataset gen_copy_task(const CopyTaskSpec& spec, std::size_t n_samples, const Rng& rng) {
  spec.validate();
  SequenceDataset ds;
  ds.kind = spec.scales == 2 ? "copy2" : "copy3";
  ds.same_dim = spec.channels;
  ds.target_dim = spec.channels;
  CopyTaskMeta meta;
  meta.spec = spec;
  meta.s1 = static_cast<double>(spec.s1);
  meta.s2 = static_cast<double>(spec.s2);
  meta.ts = 0.5 * static_cast<double>(spec.t1 + spec.t2);
  ds.copy = meta;
  const std::size_t T = spec.sequence_length();
  ds.samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Rng srng = rng.split("copy_sample").split(s);
    Sample sample;
    sample.inputs.resize(T);
    sample.targets.assign(T, Vector(spec.channels, 0.0));
    for (auto& step : sample.inputs) step.same.assign(spec.channels, 0.0);
    for (std::size_t c = 0; c < spec.channels; ++c) {
      std::vector<int> p1(spec.s1), p2(spec.s2), p3(spec.scales == 3 ? spec.s3 : 0);
      for (int& v : p1) v = static_cast<int>(srng.uniform_int(1, 8));
      for (int& v : p2) v = static_cast<int>(srng.uniform_int(11, 18));
      for (int& v : p3) v = static_cast<int>(srng.uniform_int(21, 28));
      const CopyChannel ch = copy_channel(spec, p1, p2, p3);
      for (std::size_t t = 0; t < T; ++t) {
        sample.inputs[t].same[c] = ch.input[t];
        sample.targets[t][c] = ch.output[t];
      }
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

void FarimaSpec::validate() const {
  if (!(std::abs(ar) < 1.0)) throw ConfigError("farima: |p| must be < 1");
  if (!(d > -0.5 && d < 0.5)) throw ConfigError("farima: d must lie in (-0.5, 0.5)");
  if (ma != 0) throw ConfigError("farima: only q = 0 is supported");
  if (series < 1 || length < 2) throw ConfigError("farima: need D >= 1 and T >= 2");
}

std::vector<double> fractional_weights(double d, std::size_t truncation) {
  std::vector<double> psi(truncation + 1);
  psi[0] = 1.0;
  for (std::size_t j = 1; j <= truncation; ++j)
    psi[j] = psi[j - 1] * (static_cast<double>(j) - 1.0 + d) / static_cast<double>(j);
  return psi;
}

SequenceDataset gen_farima(const FarimaSpec& spec, const Rng& rng) {
  spec.validate();
  const std::vector<double> psi = fractional_weights(spec.d, spec.truncation);
  const std::size_t M = spec.truncation;
  const std::size_t total = spec.burn_in + spec.length + 1;  // one extra point for y_t = x_{t+1}
  std::vector<std::vector<double>> xs(spec.series);
  for (std::size_t k = 0; k < spec.series; ++k) {
    Rng srng = rng.split("farima_series").split(k);
    std::vector<double> eps(total + M);
    for (double& e : eps) e = srng.normal();
    std::vector<double>& x = xs[k];
    x.resize(total);
    double prev = 0.0;
    for (std::size_t t = 0; t < total; ++t) {
      // eps index of time t is t + M
      double u = 0.0;
      for (std::size_t j = 0; j <= M; ++j) u += psi[j] * eps[t + M - j];
      prev = spec.ar * prev + u;
      x[t] = prev;
    }
  }
  SequenceDataset ds;
  ds.kind = "farima";
  ds.single_sequence = true;
  ds.same_dim = spec.series;
  ds.target_dim = spec.series;
  Sample sample;
  sample.inputs.resize(spec.length);
  sample.targets.resize(spec.length);
  for (std::size_t t = 0; t < spec.length; ++t) {
    Vector in(spec.series), tg(spec.series);
    for (std::size_t k = 0; k < spec.series; ++k) {
      in[k] = xs[k][spec.burn_in + t];
      tg[k] = xs[k][spec.burn_in + t + 1];
    }
    sample.inputs[t].same = std::move(in);
    sample.targets[t] = std::move(tg);
  }
  ds.samples.push_back(std::move(sample));
  return ds;
}

ModelConfig SequenceDataset::model_config(std::vector<std::size_t> layer_dims, Arch arch,
                                          std::size_t encoder_dim) const {
  ModelConfig cfg;
  cfg.num_layers = layer_dims.size();
  cfg.layer_dims = std::move(layer_dims);
  cfg.encoder_dim = fine_dim > 0 ? encoder_dim : 0;
  cfg.fine_dim = fine_dim > 0 ? fine_dim : 0;
  if (fine_dim > 0 && encoder_dim == 0) {
    throw ConfigError("dataset has fine-scale features; an encoder_dim >= 1 is required");
  }
  cfg.input_dim = cfg.encoder_dim + coarse_dim + same_dim;
  cfg.output_dim = target_dim;
  cfg.arch = arch;
  cfg.validate();
  return cfg;
}

std::vector<const Sample*> SequenceDataset::split_samples(const std::vector<std::size_t>& idx) const {
  std::vector<const Sample*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&samples.at(i));
  return out;
}

namespace {

std::string trim(std::string s) {
  auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read CSV " + path.string());
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_commas(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": ragged row (" +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(table.header.size()) + ")");
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                          c + "'");
      }
      row[i] = v;
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ConfigError(path.string() + ": missing header row");
  return table;
}

SequenceDataset load_csv_series(const CsvSeriesSpec& spec) {
  const CsvTable target = read_csv(spec.target);
  const std::size_t T = target.rows.size();
  if (T == 0) throw ConfigError(spec.target.string() + ": no data rows");
  const std::size_t N = target.header.size();

  std::optional<CsvTable> same, coarse, fine;
  if (spec.same) {
    same = read_csv(*spec.same);
    if (same->rows.size() != T) {
      throw ConfigError("same-scale file has " + std::to_string(same->rows.size()) +
                        " rows, target has " + std::to_string(T));
    }
  }
  if (spec.coarse) {
    if (spec.coarse_ratio < 1) throw ConfigError("coarse ratio must be >= 1");
    coarse = read_csv(*spec.coarse);
    if (T % spec.coarse_ratio != 0 || coarse->rows.size() * spec.coarse_ratio != T) {
      throw ConfigError("coarse file: " + std::to_string(coarse->rows.size()) + " rows x ratio " +
                        std::to_string(spec.coarse_ratio) + " does not cover " +
                        std::to_string(T) + " target rows");
    }
  }
  if (spec.fine) {
    if (spec.fine_ratio < 1) throw ConfigError("fine ratio must be >= 1");
    fine = read_csv(*spec.fine);
    if (fine->rows.size() % spec.fine_ratio != 0 || fine->rows.size() != T * spec.fine_ratio) {
      throw ConfigError("fine file: " + std::to_string(fine->rows.size()) +
                        " rows is not target rows x ratio " + std::to_string(spec.fine_ratio));
    }
  }

  SequenceDataset ds;
  ds.kind = "csv";
  ds.single_sequence = true;
  ds.target_dim = N;
  ds.same_dim = (spec.target_history ? N : 0) + (same ? same->header.size() : 0);
  ds.coarse_dim = coarse ? coarse->header.size() : 0;
  ds.fine_dim = fine ? fine->header.size() : 0;
  ds.scale.coarse_ratio = spec.coarse_ratio;
  ds.scale.fine_ratio = spec.fine_ratio;

  Sample sample;
  sample.inputs.resize(T);
  sample.targets.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    StepInput& in = sample.inputs[t];
    if (spec.target_history) {
      if (t == 0) {
        in.same.assign(N, 0.0);
      } else {
        in.same = target.rows[t - 1];
      }
    }
    if (same) in.same.insert(in.same.end(), same->rows[t].begin(), same->rows[t].end());
    if (coarse) in.coarse = coarse->rows[t / spec.coarse_ratio];
    if (fine) {
      for (std::size_t r = 0; r < spec.fine_ratio; ++r)
        in.fine.push_back(fine->rows[t * spec.fine_ratio + r]);
    }
    sample.targets[t] = target.rows[t];
  }
  ds.samples.push_back(std::move(sample));
  return ds;
}

namespace {

void range_init(Range& r, std::size_t dim) {
  r.min.assign(dim, std::numeric_limits<double>::infinity());
  r.max.assign(dim, -std::numeric_limits<double>::infinity());
  r.constant.assign(dim, false);
}

void range_observe(Range& r, const Vector& v) {
  if (v.size() != r.min.size()) throw DimensionError("normalize: inconsistent feature dim");
  for (std::size_t i = 0; i < v.size(); ++i) {
    r.min[i] = std::min(r.min[i], v[i]);
    r.max[i] = std::max(r.max[i], v[i]);
  }
}

void range_finish(Range& r, const std::string& group, std::vector<std::string>& warnings) {
  for (std::size_t i = 0; i < r.min.size(); ++i) {
    if (!(r.max[i] > r.min[i])) {
      r.constant[i] = true;
      if (!std::isfinite(r.min[i])) r.min[i] = r.max[i] = 0.0;
      warnings.push_back(group + " dimension " + std::to_string(i) +
                         " is constant on the training portion; scaled to 0");
    }
  }
}

double scale_value(const Range& r, std::size_t i, double v) {
  if (r.constant[i]) return 0.0;
  return (v - r.min[i]) / (r.max[i] - r.min[i]);
}

std::size_t apply_range(const Range& r, Vector& v) {
  std::size_t spill = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = scale_value(r, i, v[i]);
    if (v[i] < 0.0 || v[i] > 1.0) ++spill;
  }
  return spill;
}

Sample slice(const Sample& s, std::size_t begin, std::size_t end) {
  Sample out;
  out.inputs.assign(s.inputs.begin() + static_cast<std::ptrdiff_t>(begin),
                    s.inputs.begin() + static_cast<std::ptrdiff_t>(end));
  out.targets.assign(s.targets.begin() + static_cast<std::ptrdiff_t>(begin),
                     s.targets.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace

SequenceDataset normalize_split(SequenceDataset ds, const SplitRatios& ratios,
                                const SplitOptions& opts) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("normalize_split: ratios must be non-negative and sum to 1");
  }
  if (!(opts.val_carve >= 0.0 && opts.val_carve < 1.0)) {
    throw ConfigError("normalize_split: val_carve must lie in [0, 1)");
  }
  if (ds.samples.empty()) throw ConfigError("normalize_split: empty dataset");
  if (ds.norm.fitted) throw ConfigError("normalize_split: dataset is already normalized");

  Splits split;
  if (ds.single_sequence) {
    if (ds.samples.size() != 1) throw ConfigError("normalize_split: expected one sequence");
    const Sample whole = std::move(ds.samples.front());
    const std::size_t T = whole.inputs.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(T)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(T)));
    if (opts.val_carve > 0.0) {
      const auto carve =
          static_cast<std::size_t>(std::llround(opts.val_carve * static_cast<double>(n_train)));
      n_train -= carve;
      n_val += carve;
    }
    n_val = std::min(n_val, T - n_train);
    if (n_train == 0) throw ConfigError("normalize_split: empty training portion");
    ds.samples.clear();
    const std::size_t w = opts.train_window;
    if (w > 0 && w < n_train) {
      for (std::size_t b = 0; b < n_train; b += w) {
        split.train.push_back(ds.samples.size());
        ds.samples.push_back(slice(whole, b, std::min(b + w, n_train)));
      }
    } else {
      split.train.push_back(0);
      ds.samples.push_back(slice(whole, 0, n_train));
    }
    if (n_val > 0) {
      split.val.push_back(ds.samples.size());
      ds.samples.push_back(slice(whole, n_train, n_train + n_val));
    }
    if (n_train + n_val < T) {
      split.test.push_back(ds.samples.size());
      ds.samples.push_back(slice(whole, n_train + n_val, T));
    }
  } else {
    const std::size_t n = ds.samples.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(n)));
    n_val = std::min(n_val, n - n_train);
    std::size_t carve =
        static_cast<std::size_t>(std::llround(opts.val_carve * static_cast<double>(n_train)));
    if (n_train == 0 || carve >= n_train) throw ConfigError("normalize_split: empty training portion");
    for (std::size_t i = 0; i < n_train - carve; ++i) split.train.push_back(i);
    for (std::size_t i = n_train - carve; i < n_train; ++i) split.val.push_back(i);
    for (std::size_t i = n_train; i < n_train + n_val; ++i) split.val.push_back(i);
    for (std::size_t i = n_train + n_val; i < n; ++i) split.test.push_back(i);
  }

  Normalization& norm = ds.norm;
  range_init(norm.same, ds.same_dim);
  range_init(norm.coarse, ds.coarse_dim);
  range_init(norm.fine, ds.fine_dim);
  range_init(norm.target, ds.target_dim);
  for (std::size_t i : split.train) {
    const Sample& s = ds.samples[i];
    for (const auto& step : s.inputs) {
      if (ds.same_dim) range_observe(norm.same, step.same);
      if (ds.coarse_dim) range_observe(norm.coarse, step.coarse);
      for (const auto& row : step.fine) range_observe(norm.fine, row);
    }
    for (const auto& y : s.targets) range_observe(norm.target, y);
  }
  range_finish(norm.same, "same", norm.warnings);
  range_finish(norm.coarse, "coarse", norm.warnings);
  range_finish(norm.fine, "fine", norm.warnings);
  range_finish(norm.target, "target", norm.warnings);

  std::vector<bool> is_train(ds.samples.size(), false);
  for (std::size_t i : split.train) is_train[i] = true;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    Sample& s = ds.samples[i];
    std::size_t spill = 0;
    for (auto& step : s.inputs) {
      spill += apply_range(norm.same, step.same);
      spill += apply_range(norm.coarse, step.coarse);
      for (auto& row : step.fine) spill += apply_range(norm.fine, row);
    }
    for (auto& y : s.targets) spill += apply_range(norm.target, y);
    if (!is_train[i]) norm.spillover += spill;
  }
  if (norm.spillover > 0) {
    norm.warnings.push_back(std::to_string(norm.spillover) +
                            " validation/test entries fall outside [0, 1] after scaling");
  }
  norm.fitted = true;
  ds.split = std::move(split);
  return ds;
}

double denormalize_target(const Normalization& norm, std::size_t dim, double value) {
  const Range& r = norm.target;
  if (r.constant.at(dim)) return r.min[dim];
  return r.min[dim] + value * (r.max[dim] - r.min[dim]);
}

Vector denormalize_target(const Normalization& norm, const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = denormalize_target(norm, i, v[i]);
  return out;
}

namespace {

nlohmann::json range_json(const Range& r) {
  return nlohmann::json{{"min", r.min}, {"max", r.max}};
}

void write_rows(std::ofstream& f, const std::vector<Vector>& rows) {
  f << std::setprecision(17);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << '\n';
  }
}

}  // namespace

std::vector<std::filesystem::path> export_dataset(const SequenceDataset& ds,
                                                  const std::filesystem::path& dir,
                                                  const std::string& manifest_extra_json) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t s = 0; s < ds.samples.size(); ++s) {
    const Sample& sample = ds.samples[s];
    std::ostringstream stem;
    stem << "sample_" << std::setw(4) << std::setfill('0') << s;
    {
      const auto path = dir / (stem.str() + "_inputs.csv");
      std::ofstream f(path);
      if (!f) throw IoError("cannot write " + path.string());
      std::vector<std::string> header;
      for (std::size_t i = 0; i < ds.same_dim; ++i) header.push_back("same_" + std::to_string(i));
      for (std::size_t i = 0; i < ds.coarse_dim; ++i) header.push_back("coarse_" + std::to_string(i));
      for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
      f << '\n';
      std::vector<Vector> rows;
      for (const auto& step : sample.inputs) rows.push_back(assemble_input({}, step.coarse, step.same));
      write_rows(f, rows);
      written.push_back(path);
    }
    if (ds.fine_dim > 0) {
      const auto path = dir / (stem.str() + "_fine.csv");
      std::ofstream f(path);
      if (!f) throw IoError("cannot write " + path.string());
      f << "step";
      for (std::size_t i = 0; i < ds.fine_dim; ++i) f << ",fine_" << i;
      f << '\n' << std::setprecision(17);
      for (std::size_t t = 0; t < sample.inputs.size(); ++t)
        for (const auto& row : sample.inputs[t].fine) {
          f << t;
          for (double v : row) f << ',' << v;
          f << '\n';
        }
      written.push_back(path);
    }
    {
      const auto path = dir / (stem.str() + "_targets.csv");
      std::ofstream f(path);
      if (!f) throw IoError("cannot write " + path.string());
      for (std::size_t i = 0; i < ds.target_dim; ++i) f << (i ? "," : "") << "y_" << i;
      f << '\n';
      write_rows(f, sample.targets);
      written.push_back(path);
    }
  }
  nlohmann::json m;
  m["kind"] = ds.kind;
  m["samples"] = ds.samples.size();
  m["dims"] = {{"same", ds.same_dim}, {"coarse", ds.coarse_dim}, {"fine", ds.fine_dim},
               {"target", ds.target_dim}};
  m["scale"] = {{"coarse_ratio", ds.scale.coarse_ratio}, {"fine_ratio", ds.scale.fine_ratio}};
  m["single_sequence"] = ds.single_sequence;
  if (ds.copy) {
    const auto& c = ds.copy->spec;
    m["copy_task"] = {{"scales", c.scales}, {"N", c.channels}, {"S1", c.s1}, {"S2", c.s2},
                      {"S3", c.s3},         {"T1", c.t1},      {"T2", c.t2}, {"T3", c.t3},
                      {"Ts", ds.copy->ts}};
  }
  m["normalization"] = {{"fitted", ds.norm.fitted}, {"warnings", ds.norm.warnings}};
  if (ds.norm.fitted) {
    m["normalization"]["same"] = range_json(ds.norm.same);
    m["normalization"]["coarse"] = range_json(ds.norm.coarse);
    m["normalization"]["fine"] = range_json(ds.norm.fine);
    m["normalization"]["target"] = range_json(ds.norm.target);
  }
  m["splits"] = {{"train", ds.split.train}, {"val", ds.split.val}, {"test", ds.split.test}};
  m["generator"] = nlohmann::json::parse(manifest_extra_json);
  const auto path = dir / "manifest.json";
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << m.dump(2) << '\n';
  written.push_back(path);
  return written;
}

}  // namespace i2drnn
