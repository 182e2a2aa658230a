#include "i2drnn/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace i2drnn {

using nlohmann::json;

std::string to_string(Arch arch) { return arch == Arch::I2DRNN ? "I2DRNN" : "StackedRNN"; }

Arch parse_arch(const std::string& s) {
  if (s == "I2DRNN" || s == "i2drnn") return Arch::I2DRNN;
  if (s == "StackedRNN" || s == "stacked" || s == "stackedrnn") return Arch::StackedRNN;
  throw ConfigError("unknown architecture '" + s + "'");
}

void ModelConfig::validate() const {
  if (num_layers < 1) throw ConfigError("model: num_layers must be >= 1");
  if (layer_dims.size() != num_layers) {
    throw ConfigError("model: layer_dims has " + std::to_string(layer_dims.size()) +
                      " entries, expected " + std::to_string(num_layers));
  }
  for (std::size_t d : layer_dims)
    if (d < 1) throw ConfigError("model: every layer dim must be >= 1");
  if (input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
  if (output_dim < 1) throw ConfigError("model: output_dim must be >= 1");
  if (encoder_dim > input_dim) throw ConfigError("model: encoder_dim exceeds input_dim");
  if (encoder_dim > 0 && fine_dim < 1) throw ConfigError("model: encoder needs fine_dim >= 1");
}

bool ModelConfig::has_rec(std::size_t src, std::size_t dst) const {
  if (src >= num_layers || dst >= num_layers) return false;
  return arch == Arch::I2DRNN ? src >= dst : src == dst;
}

bool ModelConfig::has_out(std::size_t layer) const {
  if (layer >= num_layers) return false;
  return arch == Arch::I2DRNN || layer + 1 == num_layers;
}

std::size_t ModelConfig::layer_input_dim(std::size_t layer) const {
  return layer == 0 ? input_dim : layer_dims[layer - 1];
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const std::size_t L = cfg.num_layers;
  p.feed.resize(L);
  p.bias.resize(L);
  p.out.resize(L);
  p.rec.assign(L, std::vector<Matrix>(L));
  for (std::size_t j = 0; j < L; ++j) {
    p.feed[j] = Matrix(cfg.layer_dims[j], cfg.layer_input_dim(j));
    p.bias[j] = Vector(cfg.layer_dims[j], 0.0);
    if (cfg.has_out(j)) p.out[j] = Matrix(cfg.output_dim, cfg.layer_dims[j]);
    for (std::size_t i = 0; i < L; ++i)
      if (cfg.has_rec(i, j)) p.rec[i][j] = Matrix(cfg.layer_dims[j], cfg.layer_dims[i]);
  }
  if (cfg.encoder_dim > 0) {
    p.enc.in = Matrix(cfg.encoder_dim, cfg.fine_dim);
    p.enc.rec = Matrix(cfg.encoder_dim, cfg.encoder_dim);
    p.enc.bias = Vector(cfg.encoder_dim, 0.0);
  }
  return p;
}

namespace {

template <typename Self, typename Out>
void collect_tensors(Self& self, Out& out) {
  const auto& cfg = self.config;
  const std::size_t L = cfg.num_layers;
  for (std::size_t j = 0; j < L; ++j) {
    out.push_back({"feed_" + std::to_string(j + 1), self.feed[j].values()});
    for (std::size_t i = j; i < L; ++i)
      if (cfg.has_rec(i, j))
        out.push_back({"rec_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
                       self.rec[i][j].values()});
    out.push_back({"bias_" + std::to_string(j + 1), std::span(self.bias[j])});
  }
  for (std::size_t l = 0; l < L; ++l)
    if (cfg.has_out(l)) out.push_back({"out_" + std::to_string(l + 1), self.out[l].values()});
  if (cfg.encoder_dim > 0) {
    out.push_back({"enc_in", self.enc.in.values()});
    out.push_back({"enc_rec", self.enc.rec.values()});
    out.push_back({"enc_bias", std::span(self.enc.bias)});
  }
}

bool is_bias_name(const std::string& name) { return name.find("bias") != std::string::npos; }

}  // namespace

std::vector<ModelParams::Tensor> ModelParams::tensors() {
  std::vector<Tensor> out;
  collect_tensors(*this, out);
  return out;
}

std::vector<ModelParams::ConstTensor> ModelParams::tensors() const {
  std::vector<ConstTensor> out;
  collect_tensors(*this, out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.data.size();
  return n;
}

HiddenState HiddenState::zeros(const ModelConfig& cfg) {
  HiddenState s;
  for (std::size_t d : cfg.layer_dims) s.h.emplace_back(d, 0.0);
  return s;
}

ModelParams init_params(const ModelConfig& cfg, const Rng& rng, double rec_radius) {
  if (!(rec_radius > 0.0 && rec_radius < 1.0)) {
    throw ConfigError("init_params: rec_radius must lie in (0, 1)");
  }
  ModelParams p = ModelParams::zeros(cfg);
  auto fill_uniform = [&](Matrix& m, const std::string& label) {
    Rng sub = rng.split(label);
    const double s = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (double& x : m.values()) x = sub.uniform(-s, s);
  };
  const std::size_t L = cfg.num_layers;
  for (std::size_t j = 0; j < L; ++j) {
    fill_uniform(p.feed[j], "feed_" + std::to_string(j + 1));
    if (cfg.has_out(j)) fill_uniform(p.out[j], "out_" + std::to_string(j + 1));
    for (std::size_t i = j; i < L; ++i) {
      if (!cfg.has_rec(i, j)) continue;
      Matrix& w = p.rec[i][j];
      fill_uniform(w, "rec_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
      const double target = i == j ? rec_radius : 0.5 * rec_radius;
      w = spectral_radius_scale(w, target).matrix;
    }
  }
  if (cfg.encoder_dim > 0) {
    fill_uniform(p.enc.in, "enc_in");
    fill_uniform(p.enc.rec, "enc_rec");
    p.enc.rec = spectral_radius_scale(p.enc.rec, rec_radius).matrix;
  }
  return p;
}

namespace {

void encoder_states(const ModelParams& params, std::span<const Vector> block,
                    std::vector<Vector>& states) {
  const auto& cfg = params.config;
  if (cfg.encoder_dim == 0) throw ConfigError("encode_fine: encoder is disabled");
  if (block.empty()) throw DimensionError("encode_fine: empty fine-scale block");
  states.clear();
  Vector c(cfg.encoder_dim, 0.0);
  for (const Vector& xf : block) {
    if (xf.size() != cfg.fine_dim) {
      throw DimensionError("encode_fine: fine row has " + std::to_string(xf.size()) +
                           " features, expected " + std::to_string(cfg.fine_dim));
    }
    Vector pre = params.enc.bias;
    matvec_acc(params.enc.in, xf, pre);
    matvec_acc(params.enc.rec, c, pre);
    for (std::size_t i = 0; i < pre.size(); ++i) c[i] = std::tanh(pre[i]);
    states.push_back(c);
  }
}

void check_finite(const Vector& v, std::size_t layer, std::size_t step) {
  if (!all_finite(v)) {
    throw NumericError("non-finite activation in layer " + std::to_string(layer + 1) +
                       " at step " + std::to_string(step));
  }
}

// Shared recurrence. The config's has_rec/has_out decide which terms exist,
// which is all that separates the two architectures.
void step_kernel(const ModelParams& p, std::span<const double> x, const HiddenState& prev,
                 HiddenState& next, Vector& output, std::size_t step) {
  const auto& cfg = p.config;
  const std::size_t L = cfg.num_layers;
  if (x.size() != cfg.input_dim) {
    throw DimensionError("forward: input has " + std::to_string(x.size()) +
                         " entries, expected " + std::to_string(cfg.input_dim));
  }
  if (prev.h.size() != L) throw DimensionError("forward: hidden state layer count mismatch");
  next.h.resize(L);
  for (std::size_t j = 0; j < L; ++j) {
    if (prev.h[j].size() != cfg.layer_dims[j]) {
      throw DimensionError("forward: hidden state dim mismatch in layer " + std::to_string(j + 1));
    }
    Vector pre = p.bias[j];
    if (j == 0) {
      matvec_acc(p.feed[0], x, pre);
    } else {
      matvec_acc(p.feed[j], next.h[j - 1], pre);
    }
    for (std::size_t i = j; i < L; ++i)
      if (cfg.has_rec(i, j)) matvec_acc(p.rec[i][j], prev.h[i], pre);
    for (double& v : pre) v = std::tanh(v);
    check_finite(pre, j, step);
    next.h[j] = std::move(pre);
  }
  output.assign(cfg.output_dim, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    if (cfg.has_out(l)) matvec_acc(p.out[l], next.h[l], output);
}

}  // namespace

Vector encode_fine(const ModelParams& params, std::span<const Vector> fine_block) {
  std::vector<Vector> states;
  encoder_states(params, fine_block, states);
  return states.back();
}

Vector assemble_input(std::span<const double> context, std::span<const double> coarse,
                      std::span<const double> same) {
  Vector x;
  x.reserve(context.size() + coarse.size() + same.size());
  x.insert(x.end(), context.begin(), context.end());
  x.insert(x.end(), coarse.begin(), coarse.end());
  x.insert(x.end(), same.begin(), same.end());
  return x;
}

StepResult forward_step(const ModelParams& params, std::span<const double> x,
                        const HiddenState& prev) {
  if (params.config.arch != Arch::I2DRNN && params.config.num_layers > 1) {
    throw ConfigError("forward_step: parameters are for a stacked RNN");
  }
  StepResult r;
  step_kernel(params, x, prev, r.state, r.output, 0);
  return r;
}

StepResult stacked_forward_step(const ModelParams& params, std::span<const double> x,
                                const HiddenState& prev) {
  if (params.config.arch != Arch::StackedRNN && params.config.num_layers > 1) {
    throw ConfigError("stacked_forward_step: parameters are for an I2DRNN");
  }
  StepResult r;
  step_kernel(params, x, prev, r.state, r.output, 0);
  return r;
}

ForwardResult forward_sequence(const ModelParams& params, const InputSequence& inputs,
                               const HiddenState* init) {
  if (inputs.empty()) throw DimensionError("forward_sequence: empty input sequence");
  const auto& cfg = params.config;
  ForwardResult r;
  r.outputs.resize(inputs.size());
  r.trace.resize(inputs.size());
  HiddenState state = init ? *init : HiddenState::zeros(cfg);
  r.initial_state = state;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const StepInput& in = inputs[t];
    StepTrace& tr = r.trace[t];
    if (cfg.encoder_dim > 0) {
      encoder_states(params, in.fine, tr.enc_h);
      tr.x = assemble_input(tr.enc_h.back(), in.coarse, in.same);
    } else {
      tr.x = assemble_input({}, in.coarse, in.same);
    }
    HiddenState next;
    step_kernel(params, tr.x, state, next, r.outputs[t], t);
    tr.h = next.h;
    state = std::move(next);
  }
  r.final_state = std::move(state);
  return r;
}

namespace {

json config_to_json(const ModelConfig& cfg) {
  return json{{"num_layers", cfg.num_layers},   {"layer_dims", cfg.layer_dims},
              {"input_dim", cfg.input_dim},     {"output_dim", cfg.output_dim},
              {"encoder_dim", cfg.encoder_dim}, {"fine_dim", cfg.fine_dim},
              {"cell", "VanillaTanh"},          {"arch", to_string(cfg.arch)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.num_layers = j.at("num_layers").get<std::size_t>();
  cfg.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  cfg.input_dim = j.at("input_dim").get<std::size_t>();
  cfg.output_dim = j.at("output_dim").get<std::size_t>();
  cfg.encoder_dim = j.value("encoder_dim", std::size_t{0});
  cfg.fine_dim = j.value("fine_dim", std::size_t{0});
  if (j.value("cell", std::string("VanillaTanh")) != "VanillaTanh") {
    throw ConfigError("checkpoint: unsupported cell kind");
  }
  cfg.arch = parse_arch(j.at("arch").get<std::string>());
  cfg.validate();
  return cfg;
}

}  // namespace

std::string params_to_json(const ModelParams& params, const CheckpointMeta& meta) {
  json doc;
  doc["format_version"] = 1;
  doc["config"] = config_to_json(params.config);
  json matrices = json::object();
  json biases = json::object();
  const ModelConfig& cfg = params.config;
  // Shapes are recovered from the config on load; rows/cols are stored for readers.
  auto put_matrix = [&](const std::string& name, const Matrix& m) {
    matrices[name] = json{{"rows", m.rows()},
                          {"cols", m.cols()},
                          {"data", std::vector<double>(m.values().begin(), m.values().end())}};
  };
  for (std::size_t j = 0; j < cfg.num_layers; ++j) {
    put_matrix("feed_" + std::to_string(j + 1), params.feed[j]);
    for (std::size_t i = j; i < cfg.num_layers; ++i)
      if (cfg.has_rec(i, j))
        put_matrix("rec_" + std::to_string(i + 1) + "_" + std::to_string(j + 1), params.rec[i][j]);
    biases["bias_" + std::to_string(j + 1)] = params.bias[j];
    if (cfg.has_out(j)) put_matrix("out_" + std::to_string(j + 1), params.out[j]);
  }
  if (cfg.encoder_dim > 0) {
    put_matrix("enc_in", params.enc.in);
    put_matrix("enc_rec", params.enc.rec);
    biases["enc_bias"] = params.enc.bias;
  }
  doc["matrices"] = std::move(matrices);
  doc["biases"] = std::move(biases);
  doc["training"] = json{{"epoch", meta.epoch}, {"seed", meta.seed}};
  return doc.dump(1);
}

ModelParams params_from_json(const std::string& text, const std::optional<ModelConfig>& expected,
                             CheckpointMeta* meta) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: malformed file: ") + e.what());
  }
  try {
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
      throw ConfigError("checkpoint: unsupported format_version");
    }
    const ModelConfig cfg = config_from_json(doc.at("config"));
    if (expected && !(cfg == *expected)) {
      throw DimensionError("checkpoint: stored config (L=" + std::to_string(cfg.num_layers) +
                           ") does not match the expected config (L=" +
                           std::to_string(expected->num_layers) + ")");
    }
    ModelParams p = ModelParams::zeros(cfg);
    const json& matrices = doc.at("matrices");
    const json& biases = doc.at("biases");
    for (auto& t : p.tensors()) {
      const json& src = is_bias_name(t.name) ? biases.at(t.name) : matrices.at(t.name).at("data");
      const auto values = src.get<std::vector<double>>();
      if (values.size() != t.data.size()) {
        throw DimensionError("checkpoint: tensor '" + t.name + "' has " +
                             std::to_string(values.size()) + " values, expected " +
                             std::to_string(t.data.size()));
      }
      std::copy(values.begin(), values.end(), t.data.begin());
    }
    if (meta) {
      meta->epoch = doc.contains("training") ? doc["training"].value("epoch", std::size_t{0}) : 0;
      meta->seed = doc.contains("training") ? doc["training"].value("seed", std::uint64_t{0}) : 0;
    }
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: malformed file: ") + e.what());
  }
}

void save_params(const std::filesystem::path& path, const ModelParams& params,
                 const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f << params_to_json(params, meta) << '\n';
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

ModelParams load_params(const std::filesystem::path& path,
                        const std::optional<ModelConfig>& expected, CheckpointMeta* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return params_from_json(ss.str(), expected, meta);
}

}  // namespace i2drnn
