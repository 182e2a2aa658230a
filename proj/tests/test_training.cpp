#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "i2drnn/training.hpp"
#include "test_support.hpp"

using namespace i2drnn;
using testsupport::finite_difference_check;
using testsupport::random_instance;

TEST(Loss, Examples) {
  const std::vector<Vector> a{{1, 2}, {3, 4}};
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_EQ(mse_loss(std::vector<Vector>{{1, 1}}, std::vector<Vector>{{0, 0}}), 2.0);
  EXPECT_EQ(mse_loss(std::vector<Vector>{{1, 0}, {0, 2}}, std::vector<Vector>{{0, 0}, {0, 0}}), 5.0);
  EXPECT_THROW(mse_loss(a, std::vector<Vector>{{1, 2}}), DimensionError);
  EXPECT_THROW(mse_loss(std::vector<Vector>{{1}}, std::vector<Vector>{{1, 2}}), DimensionError);
}

TEST(Bptt, ZeroAtOrigin) {
  auto inst = random_instance(Rng(1), Arch::I2DRNN, 2, 4, 5, true);
  inst.params = ModelParams::zeros(inst.params.config);
  for (auto& y : inst.sample.targets) std::fill(y.begin(), y.end(), 0.0);
  const auto lg = loss_and_gradients(inst.params, inst.sample);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(global_norm(lg.grads), 0.0);
}

TEST(Bptt, FiniteDifferencesFixedInstance) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.layer_dims = {4, 4};
  cfg.input_dim = 3;
  cfg.output_dim = 2;
  Rng rng(17);
  testsupport::Instance inst;
  inst.params = init_params(cfg, rng.split("p"), 0.9);
  Rng d = rng.split("d");
  for (double& b : inst.params.bias[0]) b = d.uniform(-0.3, 0.3);
  for (int t = 0; t < 6; ++t) {
    inst.sample.inputs.push_back({{}, {d.uniform(-1, 1), d.uniform(-1, 1), d.uniform(-1, 1)}, {}});
    inst.sample.targets.push_back({d.uniform(0, 1), d.uniform(0, 1)});
  }
  const auto r = finite_difference_check(inst);
  EXPECT_EQ(r.failed, 0u) << r.worst_name << " rel " << r.worst_rel;
  EXPECT_EQ(r.checked, inst.params.parameter_count());
}

TEST(Bptt, FiniteDifferencesRandomInstances) {
  for (Arch arch : {Arch::I2DRNN, Arch::StackedRNN}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::size_t L = 1 + seed % 3;
      const auto inst = random_instance(Rng(1000 + seed), arch, L, 5, 2 + seed % 6, seed % 2 == 1);
      const auto r = finite_difference_check(inst);
      EXPECT_EQ(r.failed, 0u) << to_string(arch) << " seed " << seed << ": " << r.worst_name
                              << " rel " << r.worst_rel;
    }
  }
}

TEST(Bptt, NonZeroInitialState) {
  auto inst = random_instance(Rng(3), Arch::I2DRNN, 2, 3, 4, false);
  HiddenState init = HiddenState::zeros(inst.params.config);
  for (auto& h : init.h)
    for (double& v : h) v = 0.4;
  const auto fwd = forward_sequence(inst.params, inst.sample.inputs, &init);
  const auto g = bptt_gradients(inst.params, fwd, inst.sample.inputs, inst.sample.targets);
  ModelParams p = inst.params;
  auto pt = p.tensors();
  const auto gt = g.tensors();
  const double h = 1e-6;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    if (pt[k].name.rfind("rec", 0) != 0) continue;
    const double orig = pt[k].data[0];
    pt[k].data[0] = orig + h;
    const double lp = mse_loss(forward_sequence(p, inst.sample.inputs, &init).outputs, inst.sample.targets);
    pt[k].data[0] = orig - h;
    const double lm = mse_loss(forward_sequence(p, inst.sample.inputs, &init).outputs, inst.sample.targets);
    pt[k].data[0] = orig;
    EXPECT_NEAR(gt[k].data[0], (lp - lm) / (2 * h), 1e-6) << pt[k].name;
  }
}

TEST(Bptt, DeadBottomLayerGivesZeroShortcutGradient) {
  auto inst = random_instance(Rng(4), Arch::I2DRNN, 2, 4, 6, false);
  ModelParams& p = inst.params;
  p.feed[0].set_zero();
  p.rec[0][0].set_zero();
  p.rec[1][0].set_zero();
  std::fill(p.bias[0].begin(), p.bias[0].end(), 0.0);
  const auto lg = loss_and_gradients(p, inst.sample);
  for (double v : lg.grads.out[0].values()) EXPECT_EQ(v, 0.0);
  EXPECT_GT(global_norm(lg.grads), 0.0);
}

TEST(Bptt, TraceMismatchRejected) {
  auto a = random_instance(Rng(5), Arch::I2DRNN, 2, 4, 6, false);
  const auto fwd = forward_sequence(a.params, a.sample.inputs);
  auto shorter = a.sample.targets;
  shorter.pop_back();
  EXPECT_THROW(bptt_gradients(a.params, fwd, a.sample.inputs, shorter), DimensionError);
  ModelConfig other = a.params.config;
  other.layer_dims[0] += 1;
  EXPECT_THROW(bptt_gradients(ModelParams::zeros(other), fwd, a.sample.inputs, a.sample.targets),
               DimensionError);
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto inst = random_instance(Rng(6), Arch::I2DRNN, 2, 4, 3, true);
  ModelParams p = inst.params;
  AdamState st = AdamState::for_params(p);
  adam_step(p, ModelParams::zeros(p.config), st, Hyper{});
  EXPECT_EQ(p, inst.params);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepIsSignTimesStepSize) {
  auto inst = random_instance(Rng(7), Arch::I2DRNN, 2, 4, 5, false);
  const auto lg = loss_and_gradients(inst.params, inst.sample);
  ModelParams p = inst.params;
  AdamState st = AdamState::for_params(p);
  Hyper hy;
  hy.step_size = 0.01;
  adam_step(p, lg.grads, st, hy);
  const auto before = inst.params.tensors();
  const auto after = p.tensors();
  const auto g = lg.grads.tensors();
  for (std::size_t k = 0; k < g.size(); ++k)
    for (std::size_t i = 0; i < g[k].data.size(); ++i) {
      const double gi = g[k].data[i];
      const double expected = -hy.step_size * gi / (std::abs(gi) + AdamState::eps);
      EXPECT_NEAR(after[k].data[i] - before[k].data[i], expected, 1e-15);
      if (std::abs(gi) > 1e-4) EXPECT_NEAR(std::abs(after[k].data[i] - before[k].data[i]), 0.01, 1e-6);
    }
}

TEST(Adam, ClippingMatchesHalfScaleGradient) {
  auto inst = random_instance(Rng(8), Arch::I2DRNN, 2, 4, 5, false);
  const auto lg = loss_and_gradients(inst.params, inst.sample);
  const double norm = global_norm(lg.grads);
  Hyper clip;
  clip.grad_clip = 0.5 * norm;
  ModelParams a = inst.params, b = inst.params;
  AdamState sa = AdamState::for_params(a), sb = AdamState::for_params(b);
  EXPECT_NEAR(adam_step(a, lg.grads, sa, clip), norm, 1e-12);
  ModelParams half = ModelParams::zeros(inst.params.config);
  add_to(half, lg.grads, 0.5);
  adam_step(b, half, sb, Hyper{});
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k)
    for (std::size_t i = 0; i < ta[k].data.size(); ++i) EXPECT_NEAR(ta[k].data[i], tb[k].data[i], 1e-15);
  const auto tm = std::as_const(sa.m).tensors();
  const auto tg = lg.grads.tensors();
  for (std::size_t k = 0; k < tm.size(); ++k)
    for (std::size_t i = 0; i < tm[k].data.size(); ++i)
      EXPECT_NEAR(tm[k].data[i], 0.1 * 0.5 * tg[k].data[i], 1e-15);
}

TEST(Adam, SmallStepDecreasesLoss) {
  for (double lr : {1e-4, 1e-5}) {
    int decreased = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto inst = random_instance(Rng(5000 + seed), seed % 2 ? Arch::I2DRNN : Arch::StackedRNN,
                                        1 + seed % 3, 5, 6, seed % 3 == 0);
      const auto lg = loss_and_gradients(inst.params, inst.sample);
      ModelParams p = inst.params;
      AdamState st = AdamState::for_params(p);
      Hyper hy;
      hy.step_size = lr;
      adam_step(p, lg.grads, st, hy);
      const double after = mse_loss(forward_sequence(p, inst.sample.inputs).outputs, inst.sample.targets);
      decreased += after < lg.loss;
    }
    EXPECT_GE(decreased, 95) << "step size " << lr;
  }
}

namespace {

SequenceDataset zero_target_dataset(std::size_t n, std::size_t T) {
  SequenceDataset ds;
  ds.kind = "synthetic";
  ds.same_dim = 2;
  ds.target_dim = 1;
  Rng r(12);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    for (std::size_t t = 0; t < T; ++t) {
      s.inputs.push_back({{}, {r.uniform(), r.uniform()}, {}});
      s.targets.push_back({0.0});
    }
    ds.samples.push_back(s);
  }
  return normalize_split(ds, {0.8, 0.2, 0.0});
}

}  // namespace

TEST(Train, ZeroTargetsAreLearned) {
  const auto ds = zero_target_dataset(40, 10);
  const ModelConfig cfg = ds.model_config({4, 4}, Arch::I2DRNN);
  Hyper hy;
  hy.max_epochs = 200;
  hy.patience = 200;
  hy.seed = 3;
  const auto res = train(cfg, ds, hy);
  EXPECT_LT(*std::min_element(res.report.train_loss.begin(), res.report.train_loss.end()), 1e-6);
  EXPECT_LT(mean_step_loss(res.params, ds.split_samples(ds.split.train)), 1e-6);
}

TEST(Train, PatienceZeroStopsAtFirstNonImprovement) {
  const auto ds = zero_target_dataset(6, 8);
  const ModelConfig cfg = ds.model_config({3}, Arch::I2DRNN);
  Hyper hy;
  hy.max_epochs = 300;
  hy.patience = 0;
  hy.step_size = 0.05;
  const auto res = train(cfg, ds, hy);
  const auto& v = res.report.val_loss;
  ASSERT_GE(v.size(), 2u);
  ASSERT_LT(v.size(), 300u);
  EXPECT_TRUE(res.report.early_stopped);
  for (std::size_t e = 1; e + 1 < v.size(); ++e) EXPECT_LT(v[e], v[e - 1]);
  EXPECT_GE(v.back(), v[v.size() - 2]);
  EXPECT_EQ(res.report.best_epoch, v.size() - 1);
}

TEST(Train, Deterministic) {
  CopyTaskSpec spec;
  spec.channels = 2;
  spec.s1 = spec.s2 = 3;
  spec.t1 = spec.t2 = 2;
  const auto ds = normalize_split(gen_copy_task(spec, 20, Rng(5)), {0.7, 0.0, 0.3}, {0.2, 0});
  const ModelConfig cfg = ds.model_config({4, 4}, Arch::I2DRNN);
  Hyper hy;
  hy.max_epochs = 5;
  hy.patience = 5;
  hy.seed = 11;
  const auto a = train(cfg, ds, hy);
  const auto b = train(cfg, ds, hy);
  EXPECT_EQ(a.report.train_loss, b.report.train_loss);
  EXPECT_EQ(a.report.val_loss, b.report.val_loss);
  EXPECT_EQ(a.report.best_epoch, b.report.best_epoch);
  EXPECT_EQ(a.params, b.params);
  hy.seed = 12;
  EXPECT_NE(train(cfg, ds, hy).report.train_loss, a.report.train_loss);
}

TEST(Train, FullEpochAccumulationIgnoresSampleOrder) {
  CopyTaskSpec spec;
  spec.s1 = spec.s2 = 2;
  spec.t1 = spec.t2 = 2;
  const auto ds = normalize_split(gen_copy_task(spec, 12, Rng(6)), {0.75, 0.0, 0.25}, {0.25, 0});
  const ModelConfig cfg = ds.model_config({3, 3}, Arch::I2DRNN);
  Hyper hy;
  hy.mode = UpdateMode::FullEpoch;
  hy.max_epochs = 10;
  hy.patience = 10;
  hy.step_size = 0.01;
  const ModelParams init = init_params(cfg, Rng(1), 0.9);
  auto tr = ds.split_samples(ds.split.train);
  const auto va = ds.split_samples(ds.split.val);
  const auto a = train(init, tr, va, hy);
  std::reverse(tr.begin(), tr.end());
  std::rotate(tr.begin(), tr.begin() + 3, tr.end());
  const auto b = train(init, tr, va, hy);
  ASSERT_EQ(a.report.val_loss.size(), b.report.val_loss.size());
  for (std::size_t e = 0; e < a.report.val_loss.size(); ++e)
    EXPECT_NEAR(a.report.val_loss[e], b.report.val_loss[e], 1e-12 * std::max(1.0, a.report.val_loss[e]));
}

TEST(Train, DivergenceAborts) {
  auto ds = zero_target_dataset(5, 4);
  ds.samples[ds.split.train[0]].targets[0][0] = std::nan("");
  Hyper hy;
  hy.max_epochs = 3;
  hy.patience = 3;
  EXPECT_THROW(train(ds.model_config({2}, Arch::I2DRNN), ds, hy), NumericError);
}

TEST(Train, RequiresValidationSplit) {
  auto ds = zero_target_dataset(5, 4);
  ds.split.val.clear();
  Hyper hy;
  hy.max_epochs = 2;
  hy.patience = 2;
  try {
    train(ds.model_config({2}, Arch::I2DRNN), ds, hy);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("validation"), std::string::npos);
  }
  hy.patience = 3;
  EXPECT_THROW(hy.validate(), ConfigError);
}

TEST(Evaluate, Examples) {
  ModelConfig cfg;
  cfg.layer_dims = {2};
  cfg.input_dim = 1;
  cfg.output_dim = 2;
  const ModelParams zero = ModelParams::zeros(cfg);
  Sample s;
  for (int t = 0; t < 4; ++t) {
    s.inputs.push_back({{}, {1.0}, {}});
    s.targets.push_back({0.0, 0.0});
  }
  std::vector<const Sample*> split{&s};
  auto m = evaluate(zero, split);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_FALSE(m.adjusted_mse);
  EXPECT_THROW(evaluate(zero, split, nullptr, true), ConfigError);

  for (auto& y : s.targets) y = {1.0, -1.0};
  m = evaluate(zero, split);
  EXPECT_NEAR(m.rmse, 1.0, 1e-15);
  EXPECT_NEAR(m.mae, 1.0, 1e-15);

  CopyTaskMeta meta;
  meta.s1 = meta.s2 = 10;
  meta.ts = 15;
  m = evaluate(zero, split, &meta);
  ASSERT_TRUE(m.adjusted_mse);
  EXPECT_NEAR(*m.adjusted_mse, 8.0 / (2 * 4 * 20.0 / 35.0), 1e-12);
  EXPECT_THROW(evaluate(zero, std::vector<const Sample*>{}), ConfigError);
}

TEST(Report, JsonAndCsv) {
  TrainReport r;
  r.train_loss = {0.5, 0.25};
  r.val_loss = {0.6, 0.3};
  r.best_epoch = 2;
  const auto dir = std::filesystem::temp_directory_path() / "i2drnn_report";
  std::filesystem::create_directories(dir);
  write_report(dir / "r.json", r);
  write_loss_csv(dir / "l.csv", r.train_loss);
  std::ifstream f(dir / "l.csv");
  std::string header, line1;
  std::getline(f, header);
  std::getline(f, line1);
  EXPECT_EQ(header, "epoch,loss");
  EXPECT_EQ(line1, "1,0.5");
  EXPECT_NE(report_to_json(r).find("\"best_epoch\": 2"), std::string::npos);
  std::filesystem::remove_all(dir);
}
