#pragma once

// Per-frame encoder, one of five sequence heads, and a two-channel readout.

#include "cyclebench/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cyclebench {

enum class HeadKind { single_frame_mlp, causal_cnn, lstm, ssm, transformer };

inline constexpr HeadKind kAllHeads[] = {HeadKind::single_frame_mlp, HeadKind::causal_cnn, HeadKind::lstm,
                                         HeadKind::ssm, HeadKind::transformer};

std::string to_string(HeadKind h);
HeadKind head_from_string(const std::string& s);

struct ModelConfig {
  HeadKind head = HeadKind::transformer;
  bool causal = false;  // transformer only; every other head is causal by construction
  int input_dim = 16;
  int encoder_dim = 64;
  int head_layers = 4;
  // MLP width, CNN channels, LSTM hidden size, SSM inner width, or transformer
  // feed-forward width. 0 sizes the head to the shared parameter budget.
  int head_hidden = 0;
  int cnn_receptive_field = 32;
  int cnn_kernel = 5;
  int attention_heads = 4;
  double rope_base = 10000.0;
  std::uint64_t seed = 0;
  bool enforce_parity = true;

  void validate() const;
  // Display name, distinguishing the causal transformer.
  std::string model_name() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Dilation schedule reaching at least `receptive_field` frames with `layers`
// causal convolutions of width `kernel`; doubling while the budget allows.
std::vector<int> cnn_dilations(int receptive_field, int layers, int kernel);
int cnn_receptive_field(const std::vector<int>& dilations, int kernel);

// Sequence-head parameter count for a config (resolved head_hidden).
std::size_t head_param_count(const ModelConfig& config);
// head_hidden used when config.head_hidden == 0.
int default_head_hidden(const ModelConfig& config);
// Head parameter counts of all five heads at the config's widths.
std::vector<std::pair<HeadKind, std::size_t>> parity_table(const ModelConfig& config);

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class SequenceHead {
 public:
  virtual ~SequenceHead() = default;
  virtual Tensor forward(const Tensor& x) const = 0;
  virtual int out_dim() const = 0;
};

class SequenceModel {
 public:
  static SequenceModel build(const ModelConfig& config);

  SequenceModel(SequenceModel&&) noexcept;
  SequenceModel& operator=(SequenceModel&&) noexcept;
  ~SequenceModel();

  // N x D -> N x 2.
  Tensor forward(const Tensor& x) const;
  // Inference without building a graph.
  Matrix predict(const Matrix& x) const;

  const ModelConfig& config() const { return config_; }
  std::string name() const { return config_.model_name(); }
  bool is_causal() const;
  // Frames of history visible to each output; -1 when unbounded.
  int receptive_field() const;

  std::vector<NamedParameter>& named_parameters() { return params_; }
  const std::vector<NamedParameter>& named_parameters() const { return params_; }
  std::vector<Tensor> parameters() const;
  std::size_t param_count() const;
  std::size_t head_param_count() const { return head_params_; }

  std::vector<Matrix> weights() const;
  void set_weights(const std::vector<Matrix>& weights);

 private:
  SequenceModel() = default;
  ModelConfig config_;
  std::vector<NamedParameter> params_;
  std::size_t head_params_ = 0;
  int receptive_field_ = -1;
  struct Layers;
  std::unique_ptr<Layers> layers_;
};

// Selective diagonal scan: h[t] = exp(-delta[t] * rate) * h[t-1] + delta[t] * b[t] * u[t],
// y[t] = c[t] * h[t] + skip * u[t]. delta, b, c, u are N x E; rate and skip are 1 x E.
Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& rate, const Tensor& b,
                      const Tensor& c, const Tensor& skip);

// One selective state-space block: pre-norm, input/gate projections, width-3
// causal depthwise conv, input-dependent (delta, B, C), silu gate, residual.
struct SsmBlock {
  int width = 0;
  int inner = 0;
  Tensor ln_gamma, ln_beta;
  Tensor w_in, b_in;  // width -> 2 * inner (scan input | gate)
  Tensor conv_w, conv_b;
  Tensor w_dt, b_dt;
  Tensor a;  // decay rate is softplus(a)
  Tensor w_b, b_b;
  Tensor w_c, b_c;
  Tensor skip;
  Tensor w_out, b_out;

  Tensor forward(const Tensor& x) const;
  std::vector<NamedParameter> parameters() const;
};

SsmBlock make_ssm_block(int width, int inner, std::uint64_t seed);

struct RotaryPair {
  Matrix q;
  Matrix k;
};
RotaryPair rope_apply(const Matrix& q, const Matrix& k, std::span<const double> positions, double base);

}  // namespace cyclebench
