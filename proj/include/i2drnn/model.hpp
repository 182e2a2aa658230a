#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "i2drnn/numerics.hpp"
#include "i2drnn/rng.hpp"

namespace i2drnn {

enum class CellKind { VanillaTanh };
enum class Arch { I2DRNN, StackedRNN };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& s);

struct ModelConfig {
  std::size_t num_layers = 1;
  std::vector<std::size_t> layer_dims;
  /// dim of x_t = encoder_dim + coarse dim + same-scale dim.
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  /// dim of the encoder state c_t; 0 disables the encoder.
  std::size_t encoder_dim = 0;
  /// feature dim of one fine-scale row fed to the encoder.
  std::size_t fine_dim = 0;
  CellKind cell = CellKind::VanillaTanh;
  Arch arch = Arch::I2DRNN;

  void validate() const;
  /// Whether the recurrent matrix from layer `src` (at t-1) into layer `dst` exists (0-based).
  bool has_rec(std::size_t src, std::size_t dst) const;
  bool has_out(std::size_t layer) const;
  std::size_t layer_input_dim(std::size_t layer) const;

  bool operator==(const ModelConfig&) const = default;
};

struct EncoderParams {
  Matrix in;   // encoder_dim x fine_dim
  Matrix rec;  // encoder_dim x encoder_dim
  Vector bias;
  bool operator==(const EncoderParams&) const = default;
};

/// All weights of an I2DRNN or stacked RNN. Gradients use the same type.
struct ModelParams {
  ModelConfig config;
  std::vector<Matrix> feed;              // feed[j]: layer j-1 (or x_t) -> layer j
  std::vector<std::vector<Matrix>> rec;  // rec[src][dst], empty when absent
  std::vector<Vector> bias;
  std::vector<Matrix> out;               // out[l]: layer l -> o_t, empty when absent
  EncoderParams enc;

  static ModelParams zeros(const ModelConfig& cfg);

  struct Tensor {
    std::string name;
    std::span<double> data;
  };
  struct ConstTensor {
    std::string name;
    std::span<const double> data;
  };
  /// Every parameter block, in a fixed order with stable names.
  std::vector<Tensor> tensors();
  std::vector<ConstTensor> tensors() const;
  std::size_t parameter_count() const;

  bool operator==(const ModelParams&) const = default;
};

struct HiddenState {
  std::vector<Vector> h;
  static HiddenState zeros(const ModelConfig& cfg);
};

/// One time step of input: encoder block, coarse features, same-scale features.
struct StepInput {
  Vector coarse;
  Vector same;
  std::vector<Vector> fine;
};
using InputSequence = std::vector<StepInput>;

ModelParams init_params(const ModelConfig& cfg, const Rng& rng, double rec_radius);

Vector encode_fine(const ModelParams& params, std::span<const Vector> fine_block);

Vector assemble_input(std::span<const double> context, std::span<const double> coarse,
                      std::span<const double> same);

struct StepResult {
  HiddenState state;
  Vector output;
};

/// h^j_t = tanh(U^{j-1->j} h^{j-1}_t + sum_{i>=j} W^{i->j} h^i_{t-1} + b^j), o_t = sum_l V^{l->O} h^l_t.
StepResult forward_step(const ModelParams& params, std::span<const double> x,
                        const HiddenState& prev);
/// h^l_t = tanh(W^l h^{l-1}_t + U^l h^l_{t-1} + b^l), o_t = V h^L_t.
StepResult stacked_forward_step(const ModelParams& params, std::span<const double> x,
                                const HiddenState& prev);

struct StepTrace {
  Vector x;                    // assembled input x_t
  std::vector<Vector> h;       // post-activation per layer
  std::vector<Vector> enc_h;   // encoder states over the fine block
};

struct ForwardResult {
  std::vector<Vector> outputs;
  std::vector<StepTrace> trace;
  HiddenState initial_state;
  HiddenState final_state;
};

ForwardResult forward_sequence(const ModelParams& params, const InputSequence& inputs,
                               const HiddenState* init = nullptr);

/// Extra checkpoint fields carried alongside the weights.
struct CheckpointMeta {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

void save_params(const std::filesystem::path& path, const ModelParams& params,
                 const CheckpointMeta& meta = {});
/// Loads a checkpoint; when `expected` is given the stored config must match it.
ModelParams load_params(const std::filesystem::path& path,
                        const std::optional<ModelConfig>& expected = std::nullopt,
                        CheckpointMeta* meta = nullptr);

std::string params_to_json(const ModelParams& params, const CheckpointMeta& meta = {});
ModelParams params_from_json(const std::string& text,
                             const std::optional<ModelConfig>& expected = std::nullopt,
                             CheckpointMeta* meta = nullptr);

}  // namespace i2drnn
