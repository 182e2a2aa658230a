#include "i2drnn/experiments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

namespace i2drnn {

SequenceDataset copy_dataset(const CopyTaskSpec& spec, std::size_t samples, std::uint64_t seed) {
  SplitOptions so;
  so.val_carve = 0.2;
  return normalize_split(gen_copy_task(spec, samples, Rng(seed).split("data")), {0.7, 0.0, 0.3}, so);
}

SequenceDataset farima_dataset(const FarimaSpec& spec, std::uint64_t seed, std::size_t train_window) {
  SplitOptions so;
  so.train_window = train_window;
  return normalize_split(gen_farima(spec, Rng(seed).split("data")), {0.64, 0.16, 0.2}, so);
}

RunResult train_and_test(const SequenceDataset& ds, const std::vector<std::size_t>& layers, Arch arch, Hyper hyper) {
  const auto cfg = ds.model_config(layers, arch);
  TrainResult tr = train(cfg, ds, hyper);
  RunResult r;
  r.seed = hyper.seed;
  r.test = evaluate(tr.params, ds, ds.split.test);
  r.report = std::move(tr.report);
  r.params = std::move(tr.params);
  return r;
}

double metric_value(const Metrics& m, Metric which) {
  if (which == Metric::Rmse) return m.rmse;
  if (!m.adjusted_mse) throw ConfigError("adjusted MSE requested on data without copy-task metadata");
  return *m.adjusted_mse;
}

std::string to_string(Metric m) { return m == Metric::Rmse ? "rmse" : "adjusted_mse"; }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

CopyTaskSpec fig4_task() {
  CopyTaskSpec t;
  t.channels = 80;
  t.s1 = t.s2 = 10;
  t.t1 = t.t2 = 15;
  return t;
}

void add_pair(std::vector<ConditionSpec>& out, const std::string& sweep, const std::string& value,
              const CopyTaskSpec& task, Metric metric) {
  for (Arch a : {Arch::I2DRNN, Arch::StackedRNN}) {
    ConditionSpec c;
    c.sweep = sweep;
    c.value = value;
    c.label = to_string(a);
    c.task = task;
    c.arch = a;
    c.metric = metric;
    out.push_back(c);
  }
}

std::string layers_label(const std::vector<std::size_t>& l) {
  std::string s = "H";
  for (std::size_t i = 0; i < l.size(); ++i) s += (i ? "," : "") + std::to_string(l[i]);
  return s;
}

}  // namespace

std::vector<ConditionSpec> fig4b_specs() {
  std::vector<ConditionSpec> out;
  add_pair(out, "", "", fig4_task(), Metric::Rmse);
  return out;
}

std::vector<ConditionSpec> fig4cde_specs() {
  std::vector<ConditionSpec> out;
  for (std::size_t n : {10, 30, 50, 70, 90}) {
    auto t = fig4_task();
    t.channels = n;
    add_pair(out, "N", std::to_string(n), t, Metric::Rmse);
  }
  for (std::size_t s1 : {5, 10, 15, 20, 25, 30}) {
    auto t = fig4_task();
    t.s1 = s1;
    add_pair(out, "S1", std::to_string(s1), t, Metric::Rmse);
  }
  for (std::size_t ts : {5, 10, 15, 20, 25}) {
    auto t = fig4_task();
    t.t1 = t.t2 = ts;
    add_pair(out, "Ts", std::to_string(ts), t, Metric::AdjustedMse);
  }
  return out;
}

std::vector<ConditionSpec> fig4fg_specs() {
  std::vector<ConditionSpec> out;
  const std::vector<std::vector<std::size_t>> configs{{60}, {30, 30}, {20, 20, 20}};
  for (int scales : {2, 3}) {
    auto t = fig4_task();
    t.scales = scales;
    for (const auto& l : configs) {
      ConditionSpec c;
      c.sweep = scales == 2 ? "two-scale" : "three-scale";
      c.label = layers_label(l);
      c.task = t;
      c.layers = l;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<Condition> run_conditions(const std::vector<ConditionSpec>& specs, const ExperimentOptions& opts) {
  if (opts.seeds == 0) throw ConfigError("experiments: need at least one seed");
  const std::size_t jobs = specs.size() * opts.seeds;
  std::mutex mu;
  std::size_t done = 0;
  auto results = parallel_map(jobs, opts.threads, [&](std::size_t j) {
    const ConditionSpec& c = specs[j / opts.seeds];
    const std::uint64_t seed = opts.base_seed + j % opts.seeds;
    const auto ds = copy_dataset(c.task, c.samples, seed);
    Hyper h = opts.hyper;
    h.seed = seed;
    RunResult r = train_and_test(ds, c.layers, c.arch, h);
    if (!opts.keep_params) r.params = ModelParams{};
    if (opts.progress) {
      std::lock_guard lk(mu);
      std::ostringstream msg;
      msg << "[" << ++done << "/" << jobs << "] " << c.sweep << (c.value.empty() ? "" : "=" + c.value) << " "
          << c.label << " seed " << seed << " rmse " << r.test.rmse << " epochs " << r.report.epochs_run;
      opts.progress(msg.str());
    }
    return r;
  });
  std::vector<Condition> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Condition c;
    c.spec = specs[i];
    std::vector<double> vals;
    for (std::size_t s = 0; s < opts.seeds; ++s) {
      c.runs.push_back(std::move(results[i * opts.seeds + s]));
      vals.push_back(metric_value(c.runs.back().test, c.spec.metric));
    }
    c.mean = mean_of(vals);
    c.sd = sd_of(vals);
    out.push_back(std::move(c));
  }
  return out;
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<Condition>& conds) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "sweep,value,label,seed,rmse,mae,adjusted_mse,best_epoch,epochs_run\n" << std::setprecision(17);
  for (const auto& c : conds)
    for (const auto& r : c.runs) {
      f << c.spec.sweep << ',' << c.spec.value << ",\"" << c.spec.label << "\"," << r.seed << ',' << r.test.rmse
        << ',' << r.test.mae << ',';
      if (r.test.adjusted_mse) f << *r.test.adjusted_mse;
      f << ',' << r.report.best_epoch << ',' << r.report.epochs_run << '\n';
    }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<Condition>& conds) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "sweep,value,label,metric,mean,sd,n\n" << std::setprecision(17);
  for (const auto& c : conds)
    f << c.spec.sweep << ',' << c.spec.value << ",\"" << c.spec.label << "\"," << to_string(c.spec.metric) << ','
      << c.mean << ',' << c.sd << ',' << c.runs.size() << '\n';
}

std::string summary_table(const std::vector<Condition>& conds) {
  std::ostringstream o;
  o << std::left << std::setw(12) << "sweep" << std::setw(7) << "value" << std::setw(14) << "model" << std::setw(14)
    << "metric" << "mean +- sd (n)\n";
  o << std::setprecision(5);
  for (const auto& c : conds) {
    o << std::setw(12) << (c.spec.sweep.empty() ? "-" : c.spec.sweep) << std::setw(7)
      << (c.spec.value.empty() ? "-" : c.spec.value) << std::setw(14) << c.spec.label << std::setw(14)
      << to_string(c.spec.metric) << c.mean << " +- " << c.sd << " (" << c.runs.size() << ")\n";
  }
  return o.str();
}

FarimaConfigResult farima_config(const FarimaConfigOptions& fo, const ExperimentOptions& opts) {
  FarimaConfigResult r;
  r.series = fo.spec.series;
  const auto ds = farima_dataset(fo.spec, opts.base_seed, fo.train_window);

  // Data information curve I(y_t; x_{t-tau}) over the normalized training segment.
  std::vector<Vector> xs, ys;
  for (std::size_t i : ds.split.train) {
    const Sample& s = ds.samples[i];
    for (std::size_t t = 0; t < s.inputs.size(); ++t) {
      xs.push_back(s.inputs[t].same);
      ys.push_back(s.targets[t]);
    }
  }
  r.curve = lagged_mi_curve(xs, ys, fo.mi_max_lag, fo.mi);
  r.fit = fit_exponential(r.curve);
  r.hx = estimate_Hx(xs);

  std::vector<std::size_t> grid = fo.grid;
  if (grid.empty())
    for (std::size_t h = 20; h <= 300; h += 20) grid.push_back(h);
  CapacityOptions co = fo.capacity;
  co.hx = r.hx;
  r.config = config_curve(r.fit, fo.plan, grid, co);

  if (!fo.grid_search) return r;
  const std::size_t jobs = grid.size() * fo.search_seeds;
  std::mutex mu;
  std::size_t done = 0;
  auto runs = parallel_map(jobs, opts.threads, [&](std::size_t j) {
    const std::size_t total = grid[j / fo.search_seeds];
    Hyper h = opts.hyper;
    h.seed = opts.base_seed + j % fo.search_seeds;
    RunResult rr = train_and_test(ds, fo.plan.split(total), Arch::I2DRNN, h);
    rr.params = ModelParams{};
    if (opts.progress) {
      std::lock_guard lk(mu);
      std::ostringstream msg;
      msg << "[" << ++done << "/" << jobs << "] farima D=" << fo.spec.series << " size " << total << " seed " << h.seed
          << " val " << rr.report.best_val_loss << " epochs " << rr.report.epochs_run;
      opts.progress(msg.str());
    }
    return rr;
  });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    GridPoint p;
    p.size = grid[g];
    std::vector<double> rmse;
    for (std::size_t s = 0; s < fo.search_seeds; ++s) {
      const auto& rr = runs[g * fo.search_seeds + s];
      p.val_loss.push_back(rr.report.best_val_loss);
      rmse.push_back(rr.test.rmse);
    }
    p.mean_val = mean_of(p.val_loss);
    p.mean_test_rmse = mean_of(rmse);
    if (p.mean_val < best) {
      best = p.mean_val;
      r.best_size = p.size;
    }
    r.search.push_back(p);
  }
  return r;
}

std::string farima_summary_json(const std::vector<FarimaConfigResult>& rs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rs) {
    nlohmann::json j{{"D", r.series},
                     {"fit", {{"a", r.fit.a}, {"k", r.fit.k}, {"residual", r.fit.residual}, {"k_clamped", r.fit.k_clamped}}},
                     {"hx", r.hx},
                     {"I_n", r.config.necessary},
                     {"I_s", r.config.sufficient},
                     {"lambdas", r.config.lambdas},
                     {"total_info", r.config.total_info},
                     {"flags", r.config.flags}};
    if (r.best_size) j["best"] = r.best_size;
    arr.push_back(j);
  }
  return arr.dump(2);
}

void write_search_csv(const std::filesystem::path& path, const FarimaConfigResult& r) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "size,mean_val_loss,mean_test_rmse\n" << std::setprecision(17);
  for (const auto& p : r.search) f << p.size << ',' << p.mean_val << ',' << p.mean_test_rmse << '\n';
}

}  // namespace i2drnn
