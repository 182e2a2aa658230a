#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "i2drnn/capacity.hpp"
#include "i2drnn/config.hpp"
#include "i2drnn/diagnostics.hpp"
#include "i2drnn/experiments.hpp"
#include "i2drnn/manifest.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace i2drnn {

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<std::string> format;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key = value settings file");
  sub->add_option("--set", c.sets, "override one setting, key=value (repeatable)");
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--threads", c.threads, "worker threads for independent runs");
  sub->add_option("--format", c.format, "what to print on stdout")->check(CLI::IsMember({"json", "csv"}));
}

Config resolve(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : Config::load(c.config_path);
  for (const auto& s : c.sets) cfg.set_assignment(s);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  if (c.out) cfg.set("out", *c.out);
  if (c.threads) cfg.set("threads", std::to_string(*c.threads));
  if (c.format) cfg.set("format", *c.format);
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  f << s;
  if (!s.empty() && s.back() != '\n') f << '\n';
}

/// Output directory bookkeeping shared by every command.
class Run {
 public:
  Run(std::string command, Config cfg) : command_(std::move(command)), cfg_(std::move(cfg)) {
    dir_ = cfg_.get("out");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
    info_.started = utc_now();
    t0_ = std::chrono::steady_clock::now();
  }
  const Config& cfg() const { return cfg_; }
  const fs::path& dir() const { return dir_; }
  fs::path operator/(const std::string& name) const { return dir_ / name; }
  bool csv() const { return cfg_.get("format") == "csv"; }

  void finish() {
    cfg_.save(dir_ / "config.resolved");
    info_.command = command_;
    info_.config = cfg_.resolved();
    info_.seed = cfg_.get_u64("seed");
    info_.finished = utc_now();
    info_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    write_manifest(dir_, info_);
  }

 private:
  std::string command_;
  Config cfg_;
  fs::path dir_;
  RunInfo info_;
  std::chrono::steady_clock::time_point t0_;
};

json metrics_json(const Metrics& m) {
  json j{{"rmse", m.rmse}, {"mae", m.mae}, {"count", m.count}};
  if (m.adjusted_mse) j["adjusted_mse"] = *m.adjusted_mse;
  return j;
}

const std::vector<std::size_t>& split_indices(const SequenceDataset& ds, const std::string& which) {
  if (which == "train") return ds.split.train;
  if (which == "val") return ds.split.val;
  if (which == "test") return ds.split.test;
  throw ConfigError("eval.split must be train, val or test");
}

/// Raw features (same-scale then coarse) and targets per sequence of a split.
void split_series(const SequenceDataset& ds, const std::vector<std::size_t>& idx, std::vector<std::vector<Vector>>& xs,
                  std::vector<std::vector<Vector>>& ys) {
  for (std::size_t i : idx) {
    const Sample& s = ds.samples[i];
    std::vector<Vector> x;
    for (const auto& in : s.inputs) {
      Vector v = in.same;
      v.insert(v.end(), in.coarse.begin(), in.coarse.end());
      x.push_back(std::move(v));
    }
    xs.push_back(std::move(x));
    ys.push_back(s.targets);
  }
}

struct DataFit {
  MiCurve curve;
  ExpFit fit;
  double hx = 0.0;
  bool synthetic = false;
};

DataFit fit_from_config(const Config& cfg, bool need_curve) {
  DataFit d;
  if (!cfg.get("capacity.a").empty() || !cfg.get("capacity.k").empty()) {
    if (cfg.get("capacity.a").empty() || cfg.get("capacity.k").empty()) {
      throw ConfigError("capacity.a and capacity.k must be given together");
    }
    d.synthetic = true;
    d.fit.a = cfg.get_double("capacity.a");
    d.fit.k = cfg.get_double("capacity.k");
    d.hx = cfg.get("capacity.hx") == "auto" ? unit_gaussian_hx() : cfg.get_double("capacity.hx");
    if (!need_curve) return d;
  }
  const auto ds = build_dataset(cfg);
  std::vector<std::vector<Vector>> xs, ys;
  split_series(ds, ds.split.train, xs, ys);
  d.curve = lagged_mi_curve(xs, ys, cfg.get_size("mi.max_lag"), mi_options(cfg));
  if (d.synthetic) return d;
  d.fit = fit_exponential(d.curve);
  if (cfg.get("capacity.hx") == "auto") {
    std::vector<Vector> flat;
    for (const auto& x : xs) flat.insert(flat.end(), x.begin(), x.end());
    d.hx = estimate_Hx(flat);
  } else {
    d.hx = cfg.get_double("capacity.hx");
  }
  return d;
}

int cmd_gen(const Config& cfg, std::ostream& out) {
  Run run("gen", cfg);
  const auto ds = build_dataset(cfg);
  json extra{{"config", cfg.resolved()}, {"seed", cfg.get_u64("seed")}};
  const auto files = export_dataset(ds, run.dir(), extra.dump());
  run.finish();
  const auto dims = ds.model_config({1}, Arch::I2DRNN, 0);
  json j{{"kind", ds.kind}, {"samples", ds.samples.size()}, {"input_dim", dims.input_dim},
         {"output_dim", dims.output_dim}, {"files", files.size()},
         {"train", ds.split.train.size()}, {"val", ds.split.val.size()}, {"test", ds.split.test.size()}};
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_train(const Config& cfg, std::ostream& out) {
  Run run("train", cfg);
  const auto ds = build_dataset(cfg);
  const auto mcfg = model_config(cfg, ds);
  const Hyper h = hyper(cfg);
  CheckpointMeta meta;
  ModelParams init;
  if (!cfg.get("train.resume").empty()) {
    init = load_params(cfg.get("train.resume"), mcfg, &meta);
  } else {
    init = init_params(mcfg, Rng(h.seed).split("init"), h.rec_radius);
  }
  const std::size_t first = meta.epoch + 1;
  const auto tr = ds.split_samples(ds.split.train);
  const auto va = ds.split_samples(ds.split.val);
  TrainResult res = train(std::move(init), tr, va, h);
  meta.epoch += res.report.best_epoch;
  meta.seed = h.seed;
  save_params(run / "checkpoint.json", res.params, meta);
  write_report(run / "report.json", res.report);
  write_loss_csv(run / "train_loss.csv", res.report.train_loss, first);
  write_loss_csv(run / "val_loss.csv", res.report.val_loss, first);
  const Metrics m = evaluate(res.params, ds, ds.split.test);
  json mj = metrics_json(m);
  mj["split"] = "test";
  write_text(run / "metrics.json", mj.dump(2));
  run.finish();
  json j{{"arch", to_string(mcfg.arch)},   {"epochs_run", res.report.epochs_run},
         {"first_epoch", first},           {"best_epoch", first - 1 + res.report.best_epoch},
         {"best_val_loss", res.report.best_val_loss}, {"test", mj}};
  out << j.dump(2) << '\n';
  return 0;
}

ModelParams checkpoint_for(const Config& cfg, const SequenceDataset& ds) {
  const std::string& path = cfg.get("eval.checkpoint");
  if (path.empty()) throw ConfigError("a checkpoint is required (--checkpoint or eval.checkpoint)");
  ModelParams p = load_params(path);
  const auto want = ds.model_config(p.config.layer_dims, p.config.arch, p.config.encoder_dim);
  if (want.input_dim != p.config.input_dim || want.output_dim != p.config.output_dim) {
    throw DimensionError("checkpoint dimensions do not match the configured dataset");
  }
  return p;
}

int cmd_eval(const Config& cfg, std::ostream& out) {
  Run run("eval", cfg);
  const auto ds = build_dataset(cfg);
  const auto p = checkpoint_for(cfg, ds);
  const std::string& split = cfg.get("eval.split");
  json j = metrics_json(evaluate(p, ds, split_indices(ds, split)));
  j["split"] = split;
  write_text(run / "metrics.json", j.dump(2));
  run.finish();
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_micurve(const Config& cfg, std::ostream& out) {
  Run run("micurve", cfg);
  Config c = cfg;
  c.set("capacity.a", "");
  c.set("capacity.k", "");
  const DataFit d = fit_from_config(c, true);
  write_curve_csv(run / "curve.csv", d.curve);
  json fj = json::parse(fit_to_json(d.fit));
  fj["hx"] = d.hx;
  write_text(run / "fit.json", fj.dump(2));
  run.finish();
  if (run.csv()) {
    out << slurp(run / "curve.csv");
  } else {
    out << fj.dump(2) << '\n';
  }
  return 0;
}

int cmd_capacity(const Config& cfg, std::ostream& out) {
  Run run("capacity", cfg);
  const DataFit d = fit_from_config(cfg, false);
  CapacityOptions co = capacity_options(cfg);
  co.hx = d.hx;
  const auto sizes = cfg.get_sizes("model.layers");
  if (sizes.size() > 3) throw ConfigError("capacity: at most 3 layers");
  std::vector<std::string> flags;
  const auto lambdas = lambda_chain(d.fit.k, sizes.size(), &flags, co);
  const std::size_t tau_max = co.tau_max ? co.tau_max : coverage_tau_max(d.fit.k);
  std::vector<MiCurve> curves;
  for (std::size_t l = 0; l < sizes.size(); ++l) curves.push_back(layer_info_curve(lambdas[l], sizes[l], co.eta, co.hx, tau_max));
  const CapacityEstimate e = icap_estimate(d.fit, curves, tau_max);
  if (e.short_horizon) flags.push_back("short_horizon");
  std::ofstream f(run / "layer_curves.csv");
  if (!f) throw IoError("cannot write layer_curves.csv");
  f << "layer,lag,mi\n" << std::setprecision(17);
  for (std::size_t l = 0; l < curves.size(); ++l)
    for (std::size_t i = 0; i < curves[l].mi.size(); ++i) f << l + 1 << ',' << curves[l].lags[i] << ',' << curves[l].mi[i] << '\n';
  f.close();
  json j{{"fit", {{"a", d.fit.a}, {"k", d.fit.k}}},
         {"hx", d.hx},
         {"layers", sizes},
         {"lambdas", lambdas},
         {"tau_max", tau_max},
         {"capacity", e.capacity},
         {"icap", e.icap},
         {"total_info", e.total_info},
         {"alpha", e.alpha},
         {"flags", flags}};
  write_text(run / "capacity.json", j.dump(2));
  run.finish();
  if (run.csv()) {
    out << slurp(run / "layer_curves.csv");
  } else {
    out << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_configure(const Config& cfg, std::ostream& out) {
  Run run("configure", cfg);
  const DataFit d = fit_from_config(cfg, false);
  CapacityOptions co = capacity_options(cfg);
  co.hx = d.hx;
  const auto grid = size_grid(cfg.get("capacity.grid"));
  const ConfigCurve c = config_curve(d.fit, LayerPlan{cfg.get_size("capacity.layers")}, grid, co);
  write_config_csv(run / "config_curve.csv", c);
  json j = json::parse(config_summary_json(c));
  j["fit"] = {{"a", d.fit.a}, {"k", d.fit.k}};
  j["hx"] = d.hx;
  write_text(run / "config.json", j.dump(2));
  run.finish();
  if (run.csv()) {
    out << slurp(run / "config_curve.csv");
  } else {
    out << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_diagnose(const Config& cfg, std::ostream& out) {
  Run run("diagnose", cfg);
  const auto ds = build_dataset(cfg);
  ModelParams p;
  const std::string& which = cfg.get("diagnose.model");
  if (which == "checkpoint") {
    p = checkpoint_for(cfg, ds);
  } else if (which == "zero") {
    p = ModelParams::zeros(model_config(cfg, ds));
  } else if (which == "init") {
    p = init_params(model_config(cfg, ds), Rng(cfg.get_u64("seed")).split("init"), cfg.get_double("train.rec_radius"));
  } else {
    throw ConfigError("diagnose.model must be checkpoint, zero or init");
  }
  const auto samples = ds.split_samples(split_indices(ds, cfg.get("eval.split")));
  MiOptions mo = mi_options(cfg);
  mo.bins = cfg.get_size("diagnose.bins");
  mo.pairing = MiPairing::AllPairs;
  const std::size_t max_lag = cfg.get_size("diagnose.max_lag");
  const auto prof = layer_mi_profile(p, samples, max_lag, mo);
  write_profile_csv(run / "profile.csv", prof);

  json rates = json::array();
  const auto series = input_series(p, samples);
  for (std::size_t l = 0; l < p.config.num_layers; ++l) {
    json r{{"layer", l + 1}};
    try {
      const auto e = empirical_rates(p, l, series, max_lag);
      r["lambda"] = e.rp.lambda;
      r["eta"] = e.rp.eta;
      r["hx"] = e.rp.hx;
      if (e.rates) {
        r["dx"] = e.rates->dx;
        r["dr"] = e.rates->dr.mi;
      }
      if (!e.note.empty()) r["note"] = e.note;
    } catch (const std::exception& ex) {
      r["note"] = ex.what();
    }
    rates.push_back(r);
  }
  json cov = json::array();
  const std::size_t region = cfg.get_size("diagnose.region");
  for (std::size_t l = 0; l < p.config.num_layers; ++l) {
    if (!p.config.has_out(l)) continue;
    const auto sc = scale_correlation(p, l);
    write_matrix_csv(run / ("cov_layer" + std::to_string(l + 1) + ".csv"), sc.cov);
    json c{{"layer", l + 1}};
    try {
      const std::size_t n = sc.cov.rows();
      const auto rk = top_correlated(sc.cov, region, std::min(cfg.get_size("diagnose.top_k"), n - 1));
      c["region"] = region;
      c["top"] = rk.indices;
      c["correlations"] = rk.correlations;
      c["flags"] = rk.flags;
    } catch (const std::exception& ex) {
      c["note"] = ex.what();
    }
    cov.push_back(c);
  }
  std::vector<double> peak;
  for (const auto& c : prof.layers) peak.push_back(*std::max_element(c.mi.begin(), c.mi.end()));
  json j{{"model", which}, {"layers", p.config.num_layers}, {"proxy", prof.any_proxy()},
         {"max_mi_per_layer", peak}, {"rates", rates}, {"correlations", cov}};
  write_text(run / "diagnostics.json", j.dump(2));
  run.finish();
  if (run.csv()) {
    out << slurp(run / "profile.csv");
  } else {
    out << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_reproduce(const Config& cfg, const std::string& name, std::ostream& out, std::ostream& err) {
  Run run("reproduce " + name, cfg);
  ExperimentOptions eo;
  eo.seeds = cfg.get_size("experiment.seeds");
  eo.base_seed = cfg.get_u64("seed");
  eo.threads = cfg.get_size("threads");
  eo.hyper = hyper(cfg);
  std::mutex mu;
  eo.progress = [&](const std::string& m) {
    std::lock_guard lk(mu);
    err << m << '\n';
  };
  if (name == "fig4b" || name == "fig4cde" || name == "fig4fg") {
    const auto specs = name == "fig4b" ? fig4b_specs() : name == "fig4cde" ? fig4cde_specs() : fig4fg_specs();
    const auto conds = run_conditions(specs, eo);
    write_runs_csv(run / "runs.csv", conds);
    write_summary_csv(run / "summary.csv", conds);
    write_text(run / "summary.txt", summary_table(conds));
    run.finish();
    out << (run.csv() ? slurp(run / "summary.csv") : summary_table(conds));
    return 0;
  }
  if (name == "farima_config") {
    std::vector<FarimaConfigResult> rs;
    for (std::size_t D : cfg.get_sizes("experiment.farima_series")) {
      FarimaConfigOptions fo;
      fo.spec = farima_spec(cfg);
      fo.spec.series = D;
      fo.train_window = cfg.get_size("split.train_window");
      fo.mi_max_lag = cfg.get_size("mi.max_lag");
      fo.mi = mi_options(cfg);
      fo.plan = LayerPlan{cfg.get_size("capacity.layers")};
      fo.grid = size_grid(cfg.get("capacity.grid"));
      fo.capacity = capacity_options(cfg);
      fo.search_seeds = cfg.get_size("experiment.search_seeds");
      rs.push_back(farima_config(fo, eo));
      const std::string tag = "D" + std::to_string(D);
      write_config_csv(run / ("config_curve_" + tag + ".csv"), rs.back().config);
      write_curve_csv(run / ("mi_curve_" + tag + ".csv"), rs.back().curve);
      write_search_csv(run / ("search_" + tag + ".csv"), rs.back());
    }
    const std::string s = farima_summary_json(rs);
    write_text(run / "summary.json", s);
    run.finish();
    out << s << '\n';
    return 0;
  }
  throw ConfigError("unknown experiment '" + name + "' (fig4b, fig4cde, fig4fg, farima_config)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"I2DRNN experiments and information-theoretic analysis"};
  app.require_subcommand(1);
  Common common;
  std::string resume, checkpoint, split, experiment;

  auto* gen = app.add_subcommand("gen", "generate and export a dataset");
  auto* trn = app.add_subcommand("train", "train a model");
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* mic = app.add_subcommand("micurve", "lagged MI curve of the data and its exponential fit");
  auto* cap = app.add_subcommand("capacity", "layer lambdas, capacity and i-CAP for model.layers");
  auto* cfgc = app.add_subcommand("configure", "configuration-capacity curve, necessary and sufficient sizes");
  auto* dia = app.add_subcommand("diagnose", "layer MI profiles, empirical rates, scale correlations");
  auto* rep = app.add_subcommand("reproduce", "run a named multi-seed experiment");
  for (auto* s : {gen, trn, evl, mic, cap, cfgc, dia, rep}) add_common(s, common);
  trn->add_option("--resume", resume, "checkpoint to continue from");
  for (auto* s : {evl, dia}) {
    s->add_option("--checkpoint", checkpoint, "trained checkpoint");
    s->add_option("--split", split, "train, val or test");
  }
  rep->add_option("name", experiment, "fig4b, fig4cde, fig4fg or farima_config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Config cfg = resolve(common);
    if (!resume.empty()) cfg.set("train.resume", resume);
    if (!checkpoint.empty()) cfg.set("eval.checkpoint", checkpoint);
    if (!split.empty()) cfg.set("eval.split", split);
    if (gen->parsed()) return cmd_gen(cfg, out);
    if (trn->parsed()) return cmd_train(cfg, out);
    if (evl->parsed()) return cmd_eval(cfg, out);
    if (mic->parsed()) return cmd_micurve(cfg, out);
    if (cap->parsed()) return cmd_capacity(cfg, out);
    if (cfgc->parsed()) return cmd_configure(cfg, out);
    if (dia->parsed()) return cmd_diagnose(cfg, out);
    return cmd_reproduce(cfg, experiment, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace i2drnn
