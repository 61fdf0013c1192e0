#pragma once

// Gradient-check cases for every tensor op, shared by the unit tests and the
// acceptance runner. Each case draws a fresh random shape per call.

#include "cyclebench/gradcheck.hpp"
#include "cyclebench/models.hpp"
#include "cyclebench/tensor.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace cyclebench::testing {

using TestRng = std::mt19937_64;

inline Matrix random_matrix(TestRng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Values bounded away from zero, for ops with a kink there.
inline Matrix away_from_zero(TestRng& rng, Index r, Index c) {
  Matrix m = random_matrix(rng, r, c);
  for (Index i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    v = (v < 0 ? -0.1 : 0.1) + 0.9 * v;
  }
  return m;
}

inline Index draw(TestRng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

// Contracts x against a fixed pseudo-random matrix of its shape so every
// output coordinate carries a distinct weight.
inline Tensor weighted_sum(const Tensor& x) {
  TestRng w_rng(static_cast<std::uint64_t>(x.rows() * 7919 + x.cols() * 104729));
  return sum(mul(x, Tensor::constant(random_matrix(w_rng, x.rows(), x.cols(), 0.5, 1.5))));
}

struct OpCase {
  std::string name;
  std::function<std::vector<Matrix>(TestRng&)> inputs;
  ScalarFn fn;
};

inline std::vector<OpCase> op_cases() {
  using In = std::span<const Tensor>;
  std::vector<OpCase> cases;
  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> f, bool kink = false,
                   bool positive = false) {
    cases.push_back({name,
                     [kink, positive](TestRng& rng) {
                       Index r = draw(rng, 1, 6), c = draw(rng, 1, 5);
                       if (positive) return std::vector<Matrix>{random_matrix(rng, r, c, 0.2, 3.0)};
                       return std::vector<Matrix>{kink ? away_from_zero(rng, r, c) : random_matrix(rng, r, c, -2, 2)};
                     },
                     [f](In in) { return weighted_sum(f(in[0])); }});
  };
  auto same_shape = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> f) {
    cases.push_back({name,
                     [](TestRng& rng) {
                       Index r = draw(rng, 1, 6), c = draw(rng, 1, 5);
                       return std::vector<Matrix>{random_matrix(rng, r, c), random_matrix(rng, r, c)};
                     },
                     [f](In in) { return weighted_sum(f(in[0], in[1])); }});
  };

  cases.push_back({"matmul",
                   [](TestRng& rng) {
                     Index n = draw(rng, 1, 6), k = draw(rng, 1, 5), m = draw(rng, 1, 5);
                     return std::vector<Matrix>{random_matrix(rng, n, k), random_matrix(rng, k, m)};
                   },
                   [](In in) { return weighted_sum(matmul(in[0], in[1])); }});
  unary("transpose", [](const Tensor& x) { return transpose(x); });
  same_shape("add", [](const Tensor& a, const Tensor& b) { return add(a, b); });
  same_shape("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); });
  same_shape("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  unary("scale", [](const Tensor& x) { return scale(x, -1.7); });
  unary("add_scalar", [](const Tensor& x) { return mul(add_scalar(x, 0.3), x); });
  for (const char* name : {"add_row", "mul_row"}) {
    const bool is_add = std::string(name) == "add_row";
    cases.push_back({name,
                     [](TestRng& rng) {
                       Index r = draw(rng, 1, 6), c = draw(rng, 1, 5);
                       return std::vector<Matrix>{random_matrix(rng, r, c), random_matrix(rng, 1, c)};
                     },
                     [is_add](In in) { return weighted_sum(is_add ? add_row(in[0], in[1]) : mul_row(in[0], in[1])); }});
  }
  cases.push_back({"affine",
                   [](TestRng& rng) {
                     Index n = draw(rng, 1, 6), k = draw(rng, 1, 5), m = draw(rng, 1, 5);
                     return std::vector<Matrix>{random_matrix(rng, n, k), random_matrix(rng, k, m),
                                                random_matrix(rng, 1, m)};
                   },
                   [](In in) { return weighted_sum(affine(in[0], in[1], in[2])); }});
  unary("exp", [](const Tensor& x) { return exp(x); });
  unary("log", [](const Tensor& x) { return log(x); }, false, true);
  unary("tanh", [](const Tensor& x) { return tanh(x); });
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  unary("silu", [](const Tensor& x) { return silu(x); });
  unary("relu", [](const Tensor& x) { return relu(x); }, true);
  unary("softplus", [](const Tensor& x) { return softplus(x); });
  unary("abs", [](const Tensor& x) { return abs(x); }, true);
  unary("softmax_rows", [](const Tensor& x) { return softmax_rows(x); });
  cases.push_back({"layer_norm",
                   [](TestRng& rng) {
                     Index r = draw(rng, 1, 6), c = draw(rng, 2, 6);
                     return std::vector<Matrix>{random_matrix(rng, r, c, -2, 2), random_matrix(rng, 1, c),
                                                random_matrix(rng, 1, c)};
                   },
                   [](In in) { return weighted_sum(layer_norm(in[0], in[1], in[2])); }});
  cases.push_back({"causal_conv1d",
                   [](TestRng& rng) {
                     Index n = draw(rng, 1, 8), cin = draw(rng, 1, 4), cout = draw(rng, 1, 4), k = draw(rng, 1, 3);
                     return std::vector<Matrix>{random_matrix(rng, n, cin), random_matrix(rng, k * cin, cout)};
                   },
                   [](In in) { return weighted_sum(causal_conv1d(in[0], in[1], 2)); }});
  cases.push_back({"depthwise_causal_conv1d",
                   [](TestRng& rng) {
                     Index n = draw(rng, 1, 8), c = draw(rng, 1, 4), k = draw(rng, 1, 3);
                     return std::vector<Matrix>{random_matrix(rng, n, c), random_matrix(rng, k, c)};
                   },
                   [](In in) { return weighted_sum(depthwise_causal_conv1d(in[0], in[1], 1)); }});
  cases.push_back({"slice_rows",
                   [](TestRng& rng) {
                     return std::vector<Matrix>{random_matrix(rng, draw(rng, 3, 7), draw(rng, 1, 5))};
                   },
                   [](In in) { return weighted_sum(slice_rows(in[0], 1, in[0].rows() - 2)); }});
  cases.push_back({"slice_cols",
                   [](TestRng& rng) {
                     return std::vector<Matrix>{random_matrix(rng, draw(rng, 1, 5), draw(rng, 3, 7))};
                   },
                   [](In in) { return weighted_sum(slice_cols(in[0], 1, in[0].cols() - 2)); }});
  cases.push_back({"concat_rows",
                   [](TestRng& rng) {
                     Index c = draw(rng, 1, 5);
                     return std::vector<Matrix>{random_matrix(rng, draw(rng, 1, 4), c),
                                                random_matrix(rng, draw(rng, 1, 4), c)};
                   },
                   [](In in) {
                     std::vector<Tensor> parts{in[0], in[1]};
                     return weighted_sum(concat_rows(parts));
                   }});
  cases.push_back({"concat_cols",
                   [](TestRng& rng) {
                     Index r = draw(rng, 1, 5);
                     return std::vector<Matrix>{random_matrix(rng, r, draw(rng, 1, 4)),
                                                random_matrix(rng, r, draw(rng, 1, 4))};
                   },
                   [](In in) {
                     std::vector<Tensor> parts{in[0], in[1]};
                     return weighted_sum(concat_cols(parts));
                   }});
  cases.push_back({"masked_fill",
                   [](TestRng& rng) {
                     return std::vector<Matrix>{random_matrix(rng, draw(rng, 2, 6), draw(rng, 2, 6))};
                   },
                   [](In in) {
                     Matrix mask = Matrix::Zero(in[0].rows(), in[0].cols());
                     for (Index i = 0; i < mask.size(); i += 3) mask.data()[i] = 1.0;
                     return weighted_sum(softmax_rows(masked_fill(in[0], mask, -INFINITY)));
                   }});
  cases.push_back({"scan",
                   [](TestRng& rng) {
                     Index n = draw(rng, 1, 8), c = draw(rng, 1, 4);
                     return std::vector<Matrix>{random_matrix(rng, n, c, 0.1, 0.95), random_matrix(rng, n, c)};
                   },
                   [](In in) { return weighted_sum(scan(in[0], in[1])); }});
  cases.push_back({"rope",
                   [](TestRng& rng) {
                     return std::vector<Matrix>{random_matrix(rng, draw(rng, 1, 6), 2 * draw(rng, 1, 3))};
                   },
                   [](In in) {
                     std::vector<double> pos(static_cast<std::size_t>(in[0].rows()));
                     for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 3.0 * static_cast<double>(i) + 1.0;
                     return weighted_sum(rope(in[0], pos, 100.0));
                   }});
  unary("sum", [](const Tensor& x) { return mul(sum(x), sum(x)); });
  unary("mean", [](const Tensor& x) { return mul(mean(x), mean(x)); });
  cases.push_back({"custom_op",
                   [](TestRng& rng) { return std::vector<Matrix>{random_matrix(rng, draw(rng, 1, 5), draw(rng, 1, 5))}; },
                   [](In in) {
                     Matrix x = in[0].value();
                     Tensor cube = custom_op({in[0]}, x.array().cube().matrix(), [x](const Matrix& g) {
                       return std::vector<Matrix>{(3.0 * g.array() * x.array().square()).matrix()};
                     });
                     return weighted_sum(cube);
                   }});
  return cases;
}

// Central-difference check of d(loss)/d(parameter) and d(loss)/d(input) for
// a whole model. Returns the worst relative error.
inline double model_grad_error(SequenceModel& model, const Matrix& x, double h = 1e-5,
                               double floor = 1e-3) {
  auto loss_at = [&](const Matrix& xin) {
    return weighted_sum(model.forward(Tensor::constant(xin))).item();
  };
  for (auto& p : model.named_parameters()) p.tensor.zero_grad();
  Tensor xt = Tensor::parameter(x);
  weighted_sum(model.forward(xt)).backward();

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    worst = std::max(worst, std::isfinite(rel) ? rel : INFINITY);
  };
  for (auto& p : model.named_parameters()) {
    const Matrix g = p.tensor.grad();
    Matrix& v = p.tensor.mutable_value();
    for (Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double up = loss_at(x);
      v.data()[i] = orig - h;
      const double down = loss_at(x);
      v.data()[i] = orig;
      compare(g.data()[i], (up - down) / (2 * h));
    }
  }
  const Matrix gx = xt.grad();
  Matrix xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp.data()[i] = x.data()[i] + h;
    const double up = loss_at(xp);
    xp.data()[i] = x.data()[i] - h;
    const double down = loss_at(xp);
    xp.data()[i] = x.data()[i];
    compare(gx.data()[i], (up - down) / (2 * h));
  }
  return worst;
}

// Tiny 2-layer instance of a head for gradient checks.
inline ModelConfig tiny_config(HeadKind head, bool causal = false, std::uint64_t seed = 11) {
  ModelConfig c;
  c.head = head;
  c.causal = causal;
  c.input_dim = 3;
  c.encoder_dim = 4;
  c.head_layers = 2;
  c.head_hidden = 4;
  c.attention_heads = 2;
  c.cnn_receptive_field = 6;
  c.cnn_kernel = 3;
  c.seed = seed;
  c.enforce_parity = false;
  return c;
}

}  // namespace cyclebench::testing
