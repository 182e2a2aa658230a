#include "i2drnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace i2drnn {

void Hyper::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("hyper: step_size must be > 0");
  if (max_epochs < 1) throw ConfigError("hyper: max_epochs must be >= 1");
  if (patience > max_epochs) throw ConfigError("hyper: patience must not exceed max_epochs");
  if (!(grad_clip >= 0.0)) throw ConfigError("hyper: grad_clip must be >= 0");
  if (!(rec_radius > 0.0 && rec_radius < 1.0)) throw ConfigError("hyper: rec_radius must lie in (0, 1)");
}

AdamState AdamState::for_params(const ModelParams& p) {
  AdamState s;
  s.m = ModelParams::zeros(p.config);
  s.v = ModelParams::zeros(p.config);
  return s;
}

double mse_loss(std::span<const Vector> pred, std::span<const Vector> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse_loss: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
  }
  double s = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].size() != target[t].size()) throw DimensionError("mse_loss: dim mismatch at step " + std::to_string(t));
    for (std::size_t i = 0; i < pred[t].size(); ++i) {
      const double d = target[t][i] - pred[t][i];
      s += d * d;
    }
  }
  return s;
}

namespace {

void check_trace(const ModelParams& params, const ForwardResult& fwd, const InputSequence& inputs,
                 std::span<const Vector> targets) {
  const auto& cfg = params.config;
  const std::size_t T = inputs.size();
  if (fwd.trace.size() != T || fwd.outputs.size() != T || targets.size() != T) {
    throw DimensionError("bptt: trace, inputs and targets must have the same length");
  }
  if (fwd.initial_state.h.size() != cfg.num_layers) throw DimensionError("bptt: trace initial state mismatch");
  for (std::size_t t = 0; t < T; ++t) {
    const StepTrace& tr = fwd.trace[t];
    if (tr.h.size() != cfg.num_layers || tr.x.size() != cfg.input_dim) {
      throw DimensionError("bptt: trace does not match the parameters at step " + std::to_string(t));
    }
    for (std::size_t l = 0; l < cfg.num_layers; ++l)
      if (tr.h[l].size() != cfg.layer_dims[l]) throw DimensionError("bptt: trace layer dim mismatch");
    if (targets[t].size() != cfg.output_dim) throw DimensionError("bptt: target dim mismatch");
    if (cfg.encoder_dim > 0 && tr.enc_h.size() != inputs[t].fine.size()) {
      throw DimensionError("bptt: encoder trace does not match the fine-scale block");
    }
  }
}

void encoder_backward(const ModelParams& p, const std::vector<Vector>& fine,
                      const std::vector<Vector>& states, std::span<const double> dc_final,
                      EncoderParams& g) {
  const std::size_t E = p.config.encoder_dim;
  Vector dc(dc_final.begin(), dc_final.end());
  Vector da(E);
  const Vector zero(E, 0.0);
  for (std::size_t k = states.size(); k-- > 0;) {
    const Vector& c = states[k];
    for (std::size_t i = 0; i < E; ++i) da[i] = dc[i] * (1.0 - c[i] * c[i]);
    const Vector& c_prev = k > 0 ? states[k - 1] : zero;
    outer_acc(g.in, da, fine[k]);
    outer_acc(g.rec, da, c_prev);
    for (std::size_t i = 0; i < E; ++i) g.bias[i] += da[i];
    std::fill(dc.begin(), dc.end(), 0.0);
    matvec_t_acc(p.enc.rec, da, dc);
  }
}

}  // namespace

ModelParams bptt_gradients(const ModelParams& params, const ForwardResult& fwd,
                           const InputSequence& inputs, std::span<const Vector> targets) {
  check_trace(params, fwd, inputs, targets);
  const auto& cfg = params.config;
  const std::size_t L = cfg.num_layers;
  const std::size_t T = inputs.size();
  ModelParams g = ModelParams::zeros(cfg);

  // carry[i]: dL/dh^i_t arriving from the recurrent terms of step t+1
  std::vector<Vector> carry(L), next_carry(L), da(L);
  for (std::size_t l = 0; l < L; ++l) {
    carry[l].assign(cfg.layer_dims[l], 0.0);
    next_carry[l].assign(cfg.layer_dims[l], 0.0);
    da[l].assign(cfg.layer_dims[l], 0.0);
  }
  Vector dout(cfg.output_dim);
  Vector dh;
  Vector dx(cfg.input_dim);

  for (std::size_t t = T; t-- > 0;) {
    const StepTrace& tr = fwd.trace[t];
    const std::vector<Vector>& h_prev = t > 0 ? fwd.trace[t - 1].h : fwd.initial_state.h;
    for (std::size_t k = 0; k < cfg.output_dim; ++k) dout[k] = 2.0 * (fwd.outputs[t][k] - targets[t][k]);
    for (auto& c : next_carry) std::fill(c.begin(), c.end(), 0.0);

    for (std::size_t l = L; l-- > 0;) {
      const Vector& h = tr.h[l];
      dh = carry[l];
      if (cfg.has_out(l)) {
        matvec_t_acc(params.out[l], dout, dh);
        outer_acc(g.out[l], dout, h);
      }
      if (l + 1 < L) matvec_t_acc(params.feed[l + 1], da[l + 1], dh);
      for (std::size_t i = 0; i < h.size(); ++i) da[l][i] = dh[i] * (1.0 - h[i] * h[i]);

      const Vector& in = l == 0 ? tr.x : tr.h[l - 1];
      outer_acc(g.feed[l], da[l], in);
      for (std::size_t i = 0; i < h.size(); ++i) g.bias[l][i] += da[l][i];
      for (std::size_t src = l; src < L; ++src) {
        if (!cfg.has_rec(src, l)) continue;
        outer_acc(g.rec[src][l], da[l], h_prev[src]);
        matvec_t_acc(params.rec[src][l], da[l], next_carry[src]);
      }
    }
    if (cfg.encoder_dim > 0) {
      std::fill(dx.begin(), dx.end(), 0.0);
      matvec_t_acc(params.feed[0], da[0], dx);
      encoder_backward(params, inputs[t].fine, tr.enc_h,
                       std::span<const double>(dx.data(), cfg.encoder_dim), g.enc);
    }
    std::swap(carry, next_carry);
  }
  return g;
}

LossAndGrad loss_and_gradients(const ModelParams& params, const Sample& sample) {
  const ForwardResult fwd = forward_sequence(params, sample.inputs);
  LossAndGrad r;
  r.loss = mse_loss(fwd.outputs, sample.targets);
  r.grads = bptt_gradients(params, fwd, sample.inputs, sample.targets);
  return r;
}

void add_to(ModelParams& acc, const ModelParams& g, double scale) {
  if (!(acc.config == g.config)) throw DimensionError("add_to: parameter shapes differ");
  auto a = acc.tensors();
  const auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].data.size(); ++i) a[k].data[i] += scale * b[k].data[i];
}

double global_norm(const ModelParams& g) {
  double s = 0.0;
  for (const auto& t : g.tensors())
    for (double v : t.data) s += v * v;
  return std::sqrt(s);
}

double adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                 const Hyper& hyper) {
  if (!(params.config == grads.config) || !(params.config == state.m.config) ||
      !(params.config == state.v.config)) {
    throw DimensionError("adam_step: parameter, gradient and state shapes differ");
  }
  const double norm = global_norm(grads);
  const double scale = hyper.grad_clip > 0.0 && norm > hyper.grad_clip ? hyper.grad_clip / norm : 1.0;
  ++state.step;
  const double b1 = AdamState::beta1, b2 = AdamState::beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].data.size(); ++i) {
      const double gi = scale * g[k].data[i];
      m[k].data[i] = b1 * m[k].data[i] + (1.0 - b1) * gi;
      v[k].data[i] = b2 * v[k].data[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[k].data[i] / c1;
      const double vhat = v[k].data[i] / c2;
      p[k].data[i] -= hyper.step_size * mhat / (std::sqrt(vhat) + AdamState::eps);
    }
  }
  return norm;
}

double mean_step_loss(const ModelParams& params, std::span<const Sample* const> samples) {
  double loss = 0.0;
  std::size_t steps = 0;
  for (const Sample* s : samples) {
    const ForwardResult fwd = forward_sequence(params, s->inputs);
    loss += mse_loss(fwd.outputs, s->targets);
    steps += s->inputs.size();
  }
  return steps ? loss / static_cast<double>(steps) : 0.0;
}

TrainResult train(ModelParams init, std::span<const Sample* const> train_set,
                  std::span<const Sample* const> val_set, const Hyper& hyper) {
  hyper.validate();
  if (train_set.empty()) throw ConfigError("train: empty training split");
  if (val_set.empty()) throw ConfigError("train: a validation split is required for early stopping");
  const auto t0 = std::chrono::steady_clock::now();

  ModelParams params = std::move(init);
  AdamState adam = AdamState::for_params(params);
  TrainResult result;
  TrainReport& rep = result.report;
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t train_steps = 0;
  for (const Sample* s : train_set) train_steps += s->inputs.size();

  const Rng order_rng = Rng(hyper.seed).split("visit_order");
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    if (hyper.mode == UpdateMode::PerSample) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng r = order_rng.split(epoch);
      r.shuffle(order);
      for (std::size_t idx : order) {
        LossAndGrad lg = loss_and_gradients(params, *train_set[idx]);
        if (!std::isfinite(lg.loss) || !std::isfinite(global_norm(lg.grads))) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + " (sample " +
                             std::to_string(idx) + "): non-finite loss or gradient");
        }
        epoch_loss += lg.loss;
        adam_step(params, lg.grads, adam, hyper);
      }
    } else {
      ModelParams acc = ModelParams::zeros(params.config);
      for (std::size_t idx = 0; idx < train_set.size(); ++idx) {
        LossAndGrad lg = loss_and_gradients(params, *train_set[idx]);
        epoch_loss += lg.loss;
        add_to(acc, lg.grads);
      }
      if (!std::isfinite(epoch_loss) || !std::isfinite(global_norm(acc))) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ": non-finite loss or gradient");
      }
      adam_step(params, acc, adam, hyper);
    }
    const double val = mean_step_loss(params, val_set);
    if (!std::isfinite(val)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }
    rep.train_loss.push_back(epoch_loss / static_cast<double>(train_steps));
    rep.val_loss.push_back(val);
    rep.epochs_run = epoch;
    if (val < best_val) {
      best_val = val;
      best = params;
      rep.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > hyper.patience) {
      rep.early_stopped = true;
      break;
    }
  }
  rep.best_val_loss = best_val;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.params = std::move(best);
  return result;
}

TrainResult train(const ModelConfig& cfg, const SequenceDataset& ds, const Hyper& hyper) {
  hyper.validate();
  if (!ds.norm.fitted) throw ConfigError("train: dataset has not been split and normalized");
  ModelParams init = init_params(cfg, Rng(hyper.seed).split("init"), hyper.rec_radius);
  const auto tr = ds.split_samples(ds.split.train);
  const auto va = ds.split_samples(ds.split.val);
  return train(std::move(init), tr, va, hyper);
}

double adjusted_mse(double sum_sq, std::size_t count, const CopyTaskMeta& copy) {
  const double factor = (copy.s1 + copy.s2) / (copy.s1 + copy.s2 + copy.ts);
  return sum_sq / (static_cast<double>(count) * factor);
}

Metrics evaluate(const ModelParams& params, std::span<const Sample* const> samples,
                 const CopyTaskMeta* copy, bool require_adjusted) {
  if (samples.empty()) throw ConfigError("evaluate: empty split");
  if (require_adjusted && !copy) throw ConfigError("evaluate: adjusted MSE needs copy-task metadata");
  Metrics m;
  double sum_abs = 0.0;
  for (const Sample* s : samples) {
    const ForwardResult fwd = forward_sequence(params, s->inputs);
    if (fwd.outputs.size() != s->targets.size()) throw DimensionError("evaluate: target length mismatch");
    for (std::size_t t = 0; t < fwd.outputs.size(); ++t) {
      if (s->targets[t].size() != fwd.outputs[t].size()) throw DimensionError("evaluate: target dim mismatch");
      for (std::size_t i = 0; i < fwd.outputs[t].size(); ++i) {
        const double d = fwd.outputs[t][i] - s->targets[t][i];
        m.sum_sq += d * d;
        sum_abs += std::abs(d);
      }
      m.count += fwd.outputs[t].size();
    }
  }
  const double n = static_cast<double>(m.count);
  m.rmse = std::sqrt(m.sum_sq / n);
  m.mae = sum_abs / n;
  if (copy) m.adjusted_mse = adjusted_mse(m.sum_sq, m.count, *copy);
  return m;
}

Metrics evaluate(const ModelParams& params, const SequenceDataset& ds,
                 const std::vector<std::size_t>& split, bool require_adjusted) {
  const auto samples = ds.split_samples(split);
  return evaluate(params, samples, ds.copy ? &*ds.copy : nullptr, require_adjusted);
}

std::string report_to_json(const TrainReport& r, bool wall_time) {
  nlohmann::json j{{"train_loss", r.train_loss},   {"val_loss", r.val_loss},
                   {"best_epoch", r.best_epoch},   {"best_val_loss", r.best_val_loss},
                   {"epochs_run", r.epochs_run},   {"early_stopped", r.early_stopped}};
  if (wall_time) j["wall_seconds"] = r.wall_seconds;
  return j.dump(2);
}

void write_report(const std::filesystem::path& path, const TrainReport& r, bool wall_time) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << report_to_json(r, wall_time) << '\n';
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses,
                    std::size_t first_epoch) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < losses.size(); ++e) f << e + first_epoch << ',' << losses[e] << '\n';
}

}  // namespace i2drnn
