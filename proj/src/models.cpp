#include "cyclebench/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cyclebench {

using nlohmann::json;

std::string to_string(HeadKind h) {
  switch (h) {
    case HeadKind::single_frame_mlp:
      return "single_frame_mlp";
    case HeadKind::causal_cnn:
      return "causal_cnn";
    case HeadKind::lstm:
      return "lstm";
    case HeadKind::ssm:
      return "ssm";
    case HeadKind::transformer:
      return "transformer";
  }
  return "?";
}

HeadKind head_from_string(const std::string& s) {
  for (HeadKind h : kAllHeads) {
    if (to_string(h) == s) return h;
  }
  throw std::invalid_argument("unknown head '" + s +
                              "' (expected single_frame_mlp|causal_cnn|lstm|ssm|transformer)");
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (encoder_dim < 2) throw std::invalid_argument("encoder_dim must be >= 2");
  if (head_layers < 1) throw std::invalid_argument("head_layers must be >= 1");
  if (head_hidden < 0) throw std::invalid_argument("head_hidden must be >= 0");
  if (causal && head != HeadKind::transformer) {
    throw std::invalid_argument("the causal flag applies to the transformer head only");
  }
  if (head == HeadKind::causal_cnn) {
    if (cnn_kernel < 1) throw std::invalid_argument("cnn_kernel must be >= 1");
    if (cnn_receptive_field < 1) throw std::invalid_argument("cnn_receptive_field must be >= 1");
  }
  if (head == HeadKind::transformer) {
    if (attention_heads < 1 || encoder_dim % attention_heads != 0) {
      throw std::invalid_argument("encoder_dim must be divisible by attention_heads");
    }
    if ((encoder_dim / attention_heads) % 2 != 0) {
      throw std::invalid_argument("attention head width must be even for rotary embeddings");
    }
    if (!(rope_base > 1.0)) throw std::invalid_argument("rope_base must exceed 1");
  }
}

std::string ModelConfig::model_name() const {
  if (head == HeadKind::transformer && causal) return "causal_transformer";
  return to_string(head);
}

json to_json(const ModelConfig& c) {
  return {{"head", to_string(c.head)},
          {"causal", c.causal},
          {"input_dim", c.input_dim},
          {"encoder_dim", c.encoder_dim},
          {"head_layers", c.head_layers},
          {"head_hidden", c.head_hidden},
          {"cnn_receptive_field", c.cnn_receptive_field},
          {"cnn_kernel", c.cnn_kernel},
          {"attention_heads", c.attention_heads},
          {"rope_base", c.rope_base},
          {"seed", c.seed},
          {"enforce_parity", c.enforce_parity}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.head = head_from_string(j.at("head").get<std::string>());
  c.causal = j.at("causal").get<bool>();
  c.input_dim = j.at("input_dim").get<int>();
  c.encoder_dim = j.at("encoder_dim").get<int>();
  c.head_layers = j.at("head_layers").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.cnn_receptive_field = j.at("cnn_receptive_field").get<int>();
  c.cnn_kernel = j.at("cnn_kernel").get<int>();
  c.attention_heads = j.at("attention_heads").get<int>();
  c.rope_base = j.at("rope_base").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.enforce_parity = j.value("enforce_parity", true);
  return c;
}

std::vector<int> cnn_dilations(int receptive_field, int layers, int kernel) {
  std::vector<int> d;
  int rf = 1;
  const int span = std::max(1, kernel - 1);
  for (int i = 0; i < layers; ++i) {
    int needed = std::max(1, (receptive_field - rf + span - 1) / span);
    int dil = std::min(1 << std::min(i, 30), needed);
    d.push_back(dil);
    rf += (kernel - 1) * dil;
  }
  return d;
}

int cnn_receptive_field(const std::vector<int>& dilations, int kernel) {
  return 1 + (kernel - 1) * std::accumulate(dilations.begin(), dilations.end(), 0);
}

// ---- parameter budgets -----------------------------------------------------------

namespace {

std::size_t count_for(HeadKind kind, std::size_t w, std::size_t h, std::size_t layers, std::size_t kernel) {
  switch (kind) {
    case HeadKind::single_frame_mlp: {
      std::size_t total = 0;
      std::size_t in = w;
      for (std::size_t l = 0; l < layers; ++l) {
        std::size_t out = l + 1 == layers ? w : h;
        total += in * out + out;
        in = out;
      }
      return total;
    }
    case HeadKind::causal_cnn:
      return (w * h + h) + layers * (kernel * h * h + h) + (h * w + w);
    case HeadKind::lstm: {
      std::size_t total = 0;
      std::size_t in = w;
      for (std::size_t l = 0; l < layers; ++l) {
        total += in * 4 * h + h * 4 * h + 4 * h;
        in = h;
      }
      return total;
    }
    case HeadKind::ssm: {
      std::size_t block = 2 * w + (w * 2 * h + 2 * h) + (3 * h + h) + (h * h + h) + h + (h * h + h) +
                          (h * h + h) + h + (h * w + w);
      return layers * block + 2 * w;
    }
    case HeadKind::transformer: {
      std::size_t block = 2 * w + (w * 3 * w + 3 * w) + (w * w + w) + 2 * w + (w * h + h) + (h * w + w);
      return layers * block + 2 * w + 2 * w;
    }
  }
  return 0;
}

std::size_t budget(const ModelConfig& c) {
  auto w = static_cast<std::size_t>(c.encoder_dim);
  return count_for(HeadKind::transformer, w, 2 * w, static_cast<std::size_t>(c.head_layers), 0);
}

}  // namespace

int default_head_hidden(const ModelConfig& c) {
  const auto w = static_cast<std::size_t>(c.encoder_dim);
  if (c.head == HeadKind::transformer) return 2 * c.encoder_dim;
  const std::size_t target = budget(c);
  int best = 1;
  double best_err = std::numeric_limits<double>::infinity();
  for (int h = 1; h <= 16 * c.encoder_dim; ++h) {
    auto n = count_for(c.head, w, static_cast<std::size_t>(h), static_cast<std::size_t>(c.head_layers),
                       static_cast<std::size_t>(c.cnn_kernel));
    double err = std::abs(static_cast<double>(n) - static_cast<double>(target));
    if (err < best_err) {
      best_err = err;
      best = h;
    }
  }
  return best;
}

std::size_t head_param_count(const ModelConfig& c) {
  int h = c.head_hidden > 0 ? c.head_hidden : default_head_hidden(c);
  return count_for(c.head, static_cast<std::size_t>(c.encoder_dim), static_cast<std::size_t>(h),
                   static_cast<std::size_t>(c.head_layers), static_cast<std::size_t>(c.cnn_kernel));
}

std::vector<std::pair<HeadKind, std::size_t>> parity_table(const ModelConfig& config) {
  std::vector<std::pair<HeadKind, std::size_t>> out;
  for (HeadKind h : kAllHeads) {
    ModelConfig c = config;
    c.head = h;
    c.causal = false;
    c.head_hidden = 0;
    out.emplace_back(h, head_param_count(c));
  }
  return out;
}

// ---- building blocks ---------------------------------------------------------------

namespace {

class Init {
 public:
  Init(std::uint64_t seed, std::vector<NamedParameter>& sink) : rng_(seed), sink_(sink) {}

  Tensor uniform(const std::string& name, Index rows, Index cols, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
    return add(name, std::move(m));
  }
  Tensor fill(const std::string& name, Index rows, Index cols, double value) {
    return add(name, Matrix::Constant(rows, cols, value));
  }
  Tensor add(const std::string& name, Matrix m) {
    Tensor t = Tensor::parameter(std::move(m));
    sink_.push_back({name, t});
    return t;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<NamedParameter>& sink_;
};

struct Linear {
  Tensor w;
  Tensor b;
  Tensor operator()(const Tensor& x) const { return affine(x, w, b); }
};

Linear make_linear(Init& init, const std::string& name, int in, int out, bool zero_bias = false) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.w = init.uniform(name + ".weight", in, out, bound);
  l.b = zero_bias ? init.fill(name + ".bias", 1, out, 0.0) : init.uniform(name + ".bias", 1, out, bound);
  return l;
}

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, 1e-5); }
};

LayerNorm make_norm(Init& init, const std::string& name, int width) {
  return {init.fill(name + ".gamma", 1, width, 1.0), init.fill(name + ".beta", 1, width, 0.0)};
}

class MlpHead final : public SequenceHead {
 public:
  MlpHead(Init& init, int width, int hidden, int layers) : width_(width) {
    int in = width;
    for (int l = 0; l < layers; ++l) {
      int out = l + 1 == layers ? width : hidden;
      layers_.push_back(make_linear(init, "head.mlp" + std::to_string(l), in, out));
      in = out;
    }
  }
  Tensor forward(const Tensor& x) const override {
    Tensor h = x;
    for (const auto& l : layers_) h = silu(l(h));
    return h;
  }
  int out_dim() const override { return width_; }

 private:
  int width_;
  std::vector<Linear> layers_;
};

class CnnHead final : public SequenceHead {
 public:
  CnnHead(Init& init, int width, int channels, int layers, int kernel, const std::vector<int>& dilations)
      : width_(width), dilations_(dilations) {
    in_ = make_linear(init, "head.cnn_in", width, channels);
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel * channels));
    for (int l = 0; l < layers; ++l) {
      std::string name = "head.conv" + std::to_string(l);
      conv_w_.push_back(init.uniform(name + ".weight", static_cast<Index>(kernel) * channels, channels, bound));
      conv_b_.push_back(init.uniform(name + ".bias", 1, channels, bound));
    }
    out_ = make_linear(init, "head.cnn_out", channels, width);
  }
  Tensor forward(const Tensor& x) const override {
    Tensor h = in_(x);
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
      h = add(h, silu(add_row(causal_conv1d(h, conv_w_[l], dilations_[l]), conv_b_[l])));
    }
    return silu(out_(h));
  }
  int out_dim() const override { return width_; }

 private:
  int width_;
  std::vector<int> dilations_;
  Linear in_;
  std::vector<Tensor> conv_w_;
  std::vector<Tensor> conv_b_;
  Linear out_;
};

class LstmHead final : public SequenceHead {
 public:
  LstmHead(Init& init, int width, int hidden, int layers) : hidden_(hidden) {
    int in = width;
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (int l = 0; l < layers; ++l) {
      std::string name = "head.lstm" + std::to_string(l);
      Layer layer;
      layer.wx = init.uniform(name + ".w_input", in, 4 * hidden, bound);
      layer.wh = init.uniform(name + ".w_hidden", hidden, 4 * hidden, bound);
      // Gate order i, f, g, o; forget bias starts at 1.
      layer.b = init.uniform(name + ".bias", 1, 4 * hidden, bound);
      layer.b.mutable_value().middleCols(hidden, hidden).array() += 1.0;
      layers_.push_back(layer);
      in = hidden;
    }
  }
  Tensor forward(const Tensor& x) const override {
    Tensor seq = x;
    const Index n = x.rows();
    const Index h = hidden_;
    for (const auto& layer : layers_) {
      Tensor pre = affine(seq, layer.wx, layer.b);
      Tensor hs;
      Tensor cs;
      std::vector<Tensor> outs;
      outs.reserve(static_cast<std::size_t>(n));
      for (Index t = 0; t < n; ++t) {
        Tensor g = slice_rows(pre, t, 1);
        if (t > 0) g = add(g, matmul(hs, layer.wh));
        Tensor i = sigmoid(slice_cols(g, 0, h));
        Tensor f = sigmoid(slice_cols(g, h, h));
        Tensor c_in = tanh(slice_cols(g, 2 * h, h));
        Tensor o = sigmoid(slice_cols(g, 3 * h, h));
        cs = t > 0 ? add(mul(f, cs), mul(i, c_in)) : mul(i, c_in);
        hs = mul(o, tanh(cs));
        outs.push_back(hs);
      }
      seq = concat_rows(outs);
    }
    return seq;
  }
  int out_dim() const override { return hidden_; }

 private:
  struct Layer {
    Tensor wx, wh, b;
  };
  int hidden_;
  std::vector<Layer> layers_;
};

SsmBlock init_ssm_block(Init& init, const std::string& name, int width, int inner) {
  SsmBlock b;
  b.width = width;
  b.inner = inner;
  auto norm = make_norm(init, name + ".norm", width);
  b.ln_gamma = norm.gamma;
  b.ln_beta = norm.beta;
  auto in = make_linear(init, name + ".in_proj", width, 2 * inner, true);
  b.w_in = in.w;
  b.b_in = in.b;
  b.conv_w = init.uniform(name + ".conv.weight", 3, inner, 1.0 / std::sqrt(3.0));
  b.conv_b = init.fill(name + ".conv.bias", 1, inner, 0.0);
  b.w_dt = init.uniform(name + ".dt_proj.weight", inner, inner, 1.0 / std::sqrt(static_cast<double>(inner)));
  // Step sizes log-spaced over [0.005, 0.2] so initial memories span ~5..200 frames.
  Matrix dt_bias(1, inner);
  for (int i = 0; i < inner; ++i) {
    double frac = inner > 1 ? static_cast<double>(i) / (inner - 1) : 0.0;
    double dt = std::exp(std::log(0.005) + frac * (std::log(0.2) - std::log(0.005)));
    dt_bias(0, i) = std::log(std::expm1(dt));
  }
  b.b_dt = init.add(name + ".dt_proj.bias", std::move(dt_bias));
  b.a = init.fill(name + ".a", 1, inner, std::log(std::expm1(1.0)));
  auto bp = make_linear(init, name + ".b_proj", inner, inner, true);
  b.w_b = bp.w;
  b.b_b = bp.b;
  auto cp = make_linear(init, name + ".c_proj", inner, inner, true);
  b.w_c = cp.w;
  b.b_c = cp.b;
  b.skip = init.fill(name + ".skip", 1, inner, 1.0);
  auto out = make_linear(init, name + ".out_proj", inner, width, true);
  b.w_out = out.w;
  b.b_out = out.b;
  return b;
}

class SsmHead final : public SequenceHead {
 public:
  SsmHead(Init& init, int width, int inner, int layers) : width_(width) {
    for (int l = 0; l < layers; ++l) blocks_.push_back(init_ssm_block(init, "head.ssm" + std::to_string(l), width, inner));
    norm_ = make_norm(init, "head.final_norm", width);
  }
  Tensor forward(const Tensor& x) const override {
    Tensor h = x;
    for (const auto& b : blocks_) h = b.forward(h);
    return norm_(h);
  }
  int out_dim() const override { return width_; }

 private:
  int width_;
  std::vector<SsmBlock> blocks_;
  LayerNorm norm_;
};

class TransformerHead final : public SequenceHead {
 public:
  TransformerHead(Init& init, int width, int ffn, int layers, int heads, bool causal, double rope_base)
      : width_(width), heads_(heads), causal_(causal), rope_base_(rope_base) {
    bos_ = init.uniform("head.bos", 1, width, 1.0);
    eos_ = init.uniform("head.eos", 1, width, 1.0);
    for (int l = 0; l < layers; ++l) {
      std::string name = "head.block" + std::to_string(l);
      Block b;
      b.norm1 = make_norm(init, name + ".norm1", width);
      b.qkv = make_linear(init, name + ".qkv", width, 3 * width);
      b.proj = make_linear(init, name + ".attn_out", width, width);
      b.norm2 = make_norm(init, name + ".norm2", width);
      b.ff1 = make_linear(init, name + ".ff1", width, ffn);
      b.ff2 = make_linear(init, name + ".ff2", ffn, width);
      blocks_.push_back(b);
    }
    norm_ = make_norm(init, "head.final_norm", width);
  }

  // Learned boundary rows are placed before the first and after the last
  // frame so attention can locate both ends; they are dropped from the output.
  // Nothing attends to the trailing row under the causal mask.
  Tensor forward(const Tensor& x) const override {
    const Index frames = x.rows();
    const Index n = frames + 2;
    std::vector<double> positions(static_cast<std::size_t>(n));
    std::iota(positions.begin(), positions.end(), 0.0);
    Matrix mask;
    if (causal_) {
      mask = Matrix::Zero(n, n);
      for (Index r = 0; r < n; ++r) mask.row(r).tail(n - r - 1).setOnes();
    }
    const int hd = width_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    const std::array<Tensor, 3> parts{bos_, x, eos_};
    Tensor h = concat_rows(parts);
    for (const auto& b : blocks_) {
      Tensor qkv = b.qkv(b.norm1(h));
      std::vector<Tensor> outs;
      outs.reserve(static_cast<std::size_t>(heads_));
      for (int k = 0; k < heads_; ++k) {
        Tensor q = rope(slice_cols(qkv, k * hd, hd), positions, rope_base_);
        Tensor key = rope(slice_cols(qkv, width_ + k * hd, hd), positions, rope_base_);
        Tensor v = slice_cols(qkv, 2 * width_ + k * hd, hd);
        Tensor scores = scale(matmul(q, transpose(key)), inv_sqrt);
        if (causal_) scores = masked_fill(scores, mask, -std::numeric_limits<double>::infinity());
        outs.push_back(matmul(softmax_rows(scores), v));
      }
      h = add(h, b.proj(concat_cols(outs)));
      h = add(h, b.ff2(silu(b.ff1(b.norm2(h)))));
    }
    return norm_(slice_rows(h, 1, frames));
  }
  int out_dim() const override { return width_; }

 private:
  struct Block {
    LayerNorm norm1;
    Linear qkv;
    Linear proj;
    LayerNorm norm2;
    Linear ff1;
    Linear ff2;
  };
  int width_;
  int heads_;
  bool causal_;
  double rope_base_;
  Tensor bos_;
  Tensor eos_;
  std::vector<Block> blocks_;
  LayerNorm norm_;
};

}  // namespace

// ---- selective scan ------------------------------------------------------------------

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& rate, const Tensor& b,
                      const Tensor& c, const Tensor& skip) {
  Tensor decay = exp(scale(mul_row(delta, rate), -1.0));
  Tensor drive = mul(mul(delta, b), u);
  Tensor h = scan(decay, drive);
  return add(mul(c, h), mul_row(u, skip));
}

Tensor SsmBlock::forward(const Tensor& x) const {
  if (x.cols() != width) {
    throw std::invalid_argument("ssm block: expected width " + std::to_string(width) + ", got " + x.shape_str());
  }
  Tensor xz = affine(layer_norm(x, ln_gamma, ln_beta, 1e-5), w_in, b_in);
  Tensor u = silu(add_row(depthwise_causal_conv1d(slice_cols(xz, 0, inner), conv_w, 1), conv_b));
  Tensor z = slice_cols(xz, inner, inner);
  Tensor delta = softplus(affine(u, w_dt, b_dt));
  Tensor y = selective_scan(u, delta, softplus(a), affine(u, w_b, b_b), affine(u, w_c, b_c), skip);
  return add(x, affine(mul(y, silu(z)), w_out, b_out));
}

std::vector<NamedParameter> SsmBlock::parameters() const {
  return {{"norm.gamma", ln_gamma}, {"norm.beta", ln_beta}, {"in_proj.weight", w_in},   {"in_proj.bias", b_in},
          {"conv.weight", conv_w},  {"conv.bias", conv_b},  {"dt_proj.weight", w_dt},   {"dt_proj.bias", b_dt},
          {"a", a},                 {"b_proj.weight", w_b}, {"b_proj.bias", b_b},       {"c_proj.weight", w_c},
          {"c_proj.bias", b_c},     {"skip", skip},         {"out_proj.weight", w_out}, {"out_proj.bias", b_out}};
}

SsmBlock make_ssm_block(int width, int inner, std::uint64_t seed) {
  std::vector<NamedParameter> sink;
  Init init(seed, sink);
  return init_ssm_block(init, "ssm", width, inner);
}

RotaryPair rope_apply(const Matrix& q, const Matrix& k, std::span<const double> positions, double base) {
  if (q.cols() != k.cols()) throw std::invalid_argument("rope_apply: q and k widths differ");
  return {rope_matrix(q, positions, base), rope_matrix(k, positions, base)};
}

// ---- SequenceModel -----------------------------------------------------------------------

struct SequenceModel::Layers {
  Linear enc1;
  Linear enc2;
  std::unique_ptr<SequenceHead> head;
  Linear readout;
};

SequenceModel::~SequenceModel() = default;
SequenceModel::SequenceModel(SequenceModel&&) noexcept = default;
SequenceModel& SequenceModel::operator=(SequenceModel&&) noexcept = default;

SequenceModel SequenceModel::build(const ModelConfig& config) {
  config.validate();
  SequenceModel m;
  m.config_ = config;
  const int w = config.encoder_dim;
  const int hidden = config.head_hidden > 0 ? config.head_hidden : default_head_hidden(config);

  if (config.enforce_parity) {
    auto table = parity_table(config);
    double mean = 0.0;
    for (const auto& [k, n] : table) mean += static_cast<double>(n);
    mean /= static_cast<double>(table.size());
    ModelConfig resolved = config;
    resolved.head_hidden = hidden;
    const auto mine = static_cast<double>(cyclebench::head_param_count(resolved));
    if (std::abs(mine - mean) > 0.25 * mean) {
      std::ostringstream os;
      os << "parameter parity violated: " << config.model_name() << " head has " << mine
         << " parameters, outside +-25% of the mean " << mean << " (";
      for (const auto& [k, n] : table) os << to_string(k) << "=" << n << " ";
      os << ")";
      throw std::invalid_argument(os.str());
    }
  }

  m.layers_ = std::make_unique<Layers>();
  Init init(config.seed, m.params_);
  m.layers_->enc1 = make_linear(init, "encoder.fc1", config.input_dim, w);
  m.layers_->enc2 = make_linear(init, "encoder.fc2", w, w);
  const std::size_t before_head = m.param_count();

  switch (config.head) {
    case HeadKind::single_frame_mlp:
      m.layers_->head = std::make_unique<MlpHead>(init, w, hidden, config.head_layers);
      m.receptive_field_ = 1;
      break;
    case HeadKind::causal_cnn: {
      auto dil = cnn_dilations(config.cnn_receptive_field, config.head_layers, config.cnn_kernel);
      m.layers_->head = std::make_unique<CnnHead>(init, w, hidden, config.head_layers, config.cnn_kernel, dil);
      m.receptive_field_ = cnn_receptive_field(dil, config.cnn_kernel);
      break;
    }
    case HeadKind::lstm:
      m.layers_->head = std::make_unique<LstmHead>(init, w, hidden, config.head_layers);
      break;
    case HeadKind::ssm:
      m.layers_->head = std::make_unique<SsmHead>(init, w, hidden, config.head_layers);
      break;
    case HeadKind::transformer:
      m.layers_->head = std::make_unique<TransformerHead>(init, w, hidden, config.head_layers,
                                                          config.attention_heads, config.causal, config.rope_base);
      break;
  }
  m.head_params_ = m.param_count() - before_head;
  m.layers_->readout = make_linear(init, "readout", m.layers_->head->out_dim(), 2);
  return m;
}

Tensor SequenceModel::forward(const Tensor& x) const {
  if (x.cols() != config_.input_dim) {
    throw std::invalid_argument("model expects " + std::to_string(config_.input_dim) + " features per frame, got " +
                                std::to_string(x.cols()));
  }
  if (x.rows() < 1) throw std::invalid_argument("model input has no frames");
  Tensor e = silu(layers_->enc1(x));
  e = silu(layers_->enc2(e));
  return layers_->readout(layers_->head->forward(e));
}

Matrix SequenceModel::predict(const Matrix& x) const { return forward(Tensor::constant(x)).value(); }

bool SequenceModel::is_causal() const { return config_.head != HeadKind::transformer || config_.causal; }

int SequenceModel::receptive_field() const { return receptive_field_; }

std::vector<Tensor> SequenceModel::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t SequenceModel::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.value().size());
  return n;
}

std::vector<Matrix> SequenceModel::weights() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor.value());
  return out;
}

void SequenceModel::set_weights(const std::vector<Matrix>& weights) {
  if (weights.size() != params_.size()) {
    throw std::invalid_argument("set_weights: expected " + std::to_string(params_.size()) + " tensors, got " +
                                std::to_string(weights.size()));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Matrix& dst = params_[i].tensor.mutable_value();
    if (dst.rows() != weights[i].rows() || dst.cols() != weights[i].cols()) {
      throw std::invalid_argument("set_weights: shape mismatch for " + params_[i].name);
    }
    dst = weights[i];
  }
}

}  // namespace cyclebench
