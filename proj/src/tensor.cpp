#include "cyclebench/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cyclebench {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs.
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

using detail::Node;

struct TensorAccess {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

namespace {

const std::shared_ptr<Node>& node_of(const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("operation on an undefined tensor");
  return TensorAccess::node(t);
}

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << " x " << m.cols() << "]";
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

template <class Expr>
void accumulate(Node& n, const Expr& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

// Creates the result node. When no input needs a gradient the closure is
// dropped and the result is a constant.
Tensor make_result(Matrix value, std::initializer_list<const Tensor*> inputs, const char* op,
                   std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->is_leaf = false;
  for (const Tensor* t : inputs) {
    if (node_of(*t)->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (const Tensor* t : inputs) n->inputs.push_back(node_of(*t));
    n->backward_fn = std::move(backward_fn);
  }
  return TensorAccess::wrap(std::move(n));
}

Tensor make_result_vec(Matrix value, std::span<const Tensor> inputs, const char* op,
                       std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->is_leaf = false;
  for (const Tensor& t : inputs) {
    if (node_of(t)->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (const Tensor& t : inputs) n->inputs.push_back(node_of(t));
    n->backward_fn = std::move(backward_fn);
  }
  return TensorAccess::wrap(std::move(n));
}

template <class F, class DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df_from_x_y) {
  const Matrix& xv = node_of(x)->value;
  Matrix y = xv.unaryExpr(f);
  return make_result(std::move(y), {&x}, op, [df_from_x_y](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Matrix g = self.grad;
    for (Index i = 0; i < g.size(); ++i) {
      g.data()[i] *= df_from_x_y(in.value.data()[i], self.value.data()[i]);
    }
    accumulate(in, g);
  });
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Index Tensor::rows() const { return node_of(*this)->value.rows(); }
Index Tensor::cols() const { return node_of(*this)->value.cols(); }
std::string Tensor::shape_str() const { return shape_of(node_of(*this)->value); }
const Matrix& Tensor::value() const { return node_of(*this)->value; }

Matrix& Tensor::mutable_value() {
  auto& n = node_of(*this);
  if (!n->is_leaf) throw std::logic_error("mutable_value on a non-leaf tensor");
  return n->value;
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }
bool Tensor::has_grad() const { return node_of(*this)->grad.size() != 0; }

Matrix Tensor::grad() const {
  const auto& n = node_of(*this);
  if (n->grad.size() == 0) return Matrix::Zero(n->value.rows(), n->value.cols());
  return n->grad;
}

void Tensor::zero_grad() { node_of(*this)->grad.resize(0, 0); }

double Tensor::item() const {
  const auto& v = node_of(*this)->value;
  if (v.size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_of(v));
  return v(0, 0);
}

Tensor Tensor::detach() const { return Tensor(node_of(*this)->value, false); }

void Tensor::backward() const {
  const auto& root = node_of(*this);
  if (root->value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_of(root->value));
  }
  if (!root->requires_grad) {
    throw std::logic_error("backward: loss does not depend on any tensor requiring grad");
  }

  // Iterative post-order DFS; recurrent graphs can be thousands of nodes deep.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) n->grad.resize(0, 0);
  }
  root->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf || n->grad.size() == 0 || !n->backward_fn) continue;
    n->backward_fn(*n);
  }
}

Tensor custom_op(std::vector<Tensor> inputs, Matrix value, VjpFn vjp) {
  return make_result_vec(std::move(value), inputs, "custom", [vjp](Node& self) {
    std::vector<Matrix> grads = vjp(self.grad);
    if (grads.size() != self.inputs.size()) {
      throw std::logic_error("custom_op: vjp returned wrong number of gradients");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) accumulate(*self.inputs[i], grads[i]);
  });
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Matrix& av = node_of(a)->value;
  const Matrix& bv = node_of(b)->value;
  if (av.cols() != bv.rows()) shape_error("matmul", a, b);
  Matrix y = av * bv;
  return make_result(std::move(y), {&a, &b}, "matmul", [](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    if (A.requires_grad) accumulate(A, self.grad * B.value.transpose());
    if (B.requires_grad) accumulate(B, A.value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& x) {
  Matrix y = node_of(x)->value.transpose();
  return make_result(std::move(y), {&x}, "transpose",
                     [](Node& self) { accumulate(*self.inputs[0], self.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a, b);
  Matrix y = node_of(a)->value + node_of(b)->value;
  return make_result(std::move(y), {&a, &b}, "add", [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  Matrix y = node_of(a)->value - node_of(b)->value;
  return make_result(std::move(y), {&a, &b}, "sub", [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  Matrix y = node_of(a)->value.cwiseProduct(node_of(b)->value);
  return make_result(std::move(y), {&a, &b}, "mul", [](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    if (A.requires_grad) accumulate(A, self.grad.cwiseProduct(B.value));
    if (B.requires_grad) accumulate(B, self.grad.cwiseProduct(A.value));
  });
}

Tensor scale(const Tensor& x, double s) {
  Matrix y = node_of(x)->value * s;
  return make_result(std::move(y), {&x}, "scale",
                     [s](Node& self) { accumulate(*self.inputs[0], self.grad * s); });
}

Tensor add_scalar(const Tensor& x, double s) {
  Matrix y = node_of(x)->value.array() + s;
  return make_result(std::move(y), {&x}, "add_scalar",
                     [](Node& self) { accumulate(*self.inputs[0], self.grad); });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const Matrix& xv = node_of(x)->value;
  const Matrix& rv = node_of(row)->value;
  if (rv.rows() != 1 || rv.cols() != xv.cols()) shape_error("add_row", x, row);
  Matrix y = xv.rowwise() + rv.row(0);
  return make_result(std::move(y), {&x, &row}, "add_row", [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    if (self.inputs[1]->requires_grad) accumulate(*self.inputs[1], self.grad.colwise().sum());
  });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
  const Matrix& xv = node_of(x)->value;
  const Matrix& rv = node_of(row)->value;
  if (rv.rows() != 1 || rv.cols() != xv.cols()) shape_error("mul_row", x, row);
  Matrix y = xv.array().rowwise() * rv.row(0).array();
  return make_result(std::move(y), {&x, &row}, "mul_row", [](Node& self) {
    Node& X = *self.inputs[0];
    Node& R = *self.inputs[1];
    if (X.requires_grad) {
      Matrix g = self.grad.array().rowwise() * R.value.row(0).array();
      accumulate(X, g);
    }
    if (R.requires_grad) accumulate(R, self.grad.cwiseProduct(X.value).colwise().sum());
  });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Matrix& xv = node_of(x)->value;
  const Matrix& wv = node_of(weight)->value;
  const Matrix& bv = node_of(bias)->value;
  if (xv.cols() != wv.rows()) shape_error("affine", x, weight);
  if (bv.rows() != 1 || bv.cols() != wv.cols()) shape_error("affine(bias)", weight, bias);
  Matrix y = xv * wv;
  y.rowwise() += bv.row(0);
  return make_result(std::move(y), {&x, &weight, &bias}, "affine", [](Node& self) {
    Node& X = *self.inputs[0];
    Node& W = *self.inputs[1];
    Node& B = *self.inputs[2];
    if (X.requires_grad) accumulate(X, self.grad * W.value.transpose());
    if (W.requires_grad) accumulate(W, X.value.transpose() * self.grad);
    if (B.requires_grad) accumulate(B, self.grad.colwise().sum());
  });
}

// ---- elementwise ---------------------------------------------------------------

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v * stable_sigmoid(v); },
      [](double v, double) {
        double s = stable_sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary(x, "softplus", stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

// ---- normalization -------------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
  const Matrix& xv = node_of(x)->value;
  Matrix y(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    double m = xv.row(r).maxCoeff();
    // exp() that underflows (masked -inf scores) is several times slower;
    // clamp first, then zero what would be below 1e-304 anyway.
    auto d = (xv.row(r).array() - m).eval();
    y.row(r) = (d < -700.0).select(0.0, d.max(-700.0).exp());
    y.row(r) /= y.row(r).sum();
  }
  return make_result(std::move(y), {&x}, "softmax_rows", [](Node& self) {
    const Matrix& yv = self.value;
    Eigen::VectorXd dots = self.grad.cwiseProduct(yv).rowwise().sum();
    Matrix g = yv.cwiseProduct(self.grad.colwise() - dots);
    accumulate(*self.inputs[0], g);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Matrix& xv = node_of(x)->value;
  const Matrix& gv = node_of(gamma)->value;
  const Matrix& bv = node_of(beta)->value;
  const Index n = xv.rows();
  const Index c = xv.cols();
  if (gv.rows() != 1 || gv.cols() != c) shape_error("layer_norm(gamma)", x, gamma);
  if (bv.rows() != 1 || bv.cols() != c) shape_error("layer_norm(beta)", x, beta);

  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Index r = 0; r < n; ++r) {
    double mu = xv.row(r).mean();
    double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * gv.row(0).array();
  y.rowwise() += bv.row(0);
  return make_result(std::move(y), {&x, &gamma, &beta}, "layer_norm",
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       Node& X = *self.inputs[0];
                       Node& G = *self.inputs[1];
                       Node& B = *self.inputs[2];
                       if (G.requires_grad) accumulate(G, self.grad.cwiseProduct(xhat).colwise().sum());
                       if (B.requires_grad) accumulate(B, self.grad.colwise().sum());
                       if (!X.requires_grad) return;
                       Matrix gx = self.grad.array().rowwise() * G.value.row(0).array();
                       for (Index r = 0; r < gx.rows(); ++r) {
                         double m1 = gx.row(r).mean();
                         double m2 = gx.row(r).cwiseProduct(xhat.row(r)).mean();
                         gx.row(r) = (gx.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
                       }
                       accumulate(X, gx);
                     });
}

// ---- convolution ---------------------------------------------------------------

Tensor causal_conv1d(const Tensor& x, const Tensor& weight, int dilation) {
  const Matrix& xv = node_of(x)->value;
  const Matrix& wv = node_of(weight)->value;
  const Index cin = xv.cols();
  if (dilation < 1) throw std::invalid_argument("causal_conv1d: dilation must be >= 1");
  if (cin == 0 || wv.rows() % cin != 0) shape_error("causal_conv1d", x, weight);
  const Index taps = wv.rows() / cin;
  const Index n = xv.rows();
  Matrix y = Matrix::Zero(n, wv.cols());
  for (Index j = 0; j < taps; ++j) {
    Index shift = j * dilation;
    if (shift >= n) break;
    y.bottomRows(n - shift).noalias() += xv.topRows(n - shift) * wv.middleRows(j * cin, cin);
  }
  return make_result(std::move(y), {&x, &weight}, "causal_conv1d", [taps, cin, dilation](Node& self) {
    Node& X = *self.inputs[0];
    Node& W = *self.inputs[1];
    const Index n = X.value.rows();
    Matrix gx;
    Matrix gw;
    if (X.requires_grad) gx = Matrix::Zero(n, cin);
    if (W.requires_grad) gw = Matrix::Zero(W.value.rows(), W.value.cols());
    for (Index j = 0; j < taps; ++j) {
      Index shift = j * dilation;
      if (shift >= n) break;
      auto gy = self.grad.bottomRows(n - shift);
      if (X.requires_grad) {
        gx.topRows(n - shift).noalias() += gy * W.value.middleRows(j * cin, cin).transpose();
      }
      if (W.requires_grad) gw.middleRows(j * cin, cin).noalias() += X.value.topRows(n - shift).transpose() * gy;
    }
    if (X.requires_grad) accumulate(X, gx);
    if (W.requires_grad) accumulate(W, gw);
  });
}

Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& weight, int dilation) {
  const Matrix& xv = node_of(x)->value;
  const Matrix& wv = node_of(weight)->value;
  if (dilation < 1) throw std::invalid_argument("depthwise_causal_conv1d: dilation must be >= 1");
  if (wv.cols() != xv.cols()) shape_error("depthwise_causal_conv1d", x, weight);
  const Index taps = wv.rows();
  const Index n = xv.rows();
  Matrix y = Matrix::Zero(n, xv.cols());
  for (Index j = 0; j < taps; ++j) {
    Index shift = j * dilation;
    if (shift >= n) break;
    y.bottomRows(n - shift).array() += xv.topRows(n - shift).array().rowwise() * wv.row(j).array();
  }
  return make_result(std::move(y), {&x, &weight}, "depthwise_causal_conv1d", [taps, dilation](Node& self) {
    Node& X = *self.inputs[0];
    Node& W = *self.inputs[1];
    const Index n = X.value.rows();
    Matrix gx;
    Matrix gw;
    if (X.requires_grad) gx = Matrix::Zero(n, X.value.cols());
    if (W.requires_grad) gw = Matrix::Zero(W.value.rows(), W.value.cols());
    for (Index j = 0; j < taps; ++j) {
      Index shift = j * dilation;
      if (shift >= n) break;
      auto gy = self.grad.bottomRows(n - shift);
      if (X.requires_grad) gx.topRows(n - shift).array() += gy.array().rowwise() * W.value.row(j).array();
      if (W.requires_grad) gw.row(j) += gy.cwiseProduct(X.value.topRows(n - shift)).colwise().sum();
    }
    if (X.requires_grad) accumulate(X, gx);
    if (W.requires_grad) accumulate(W, gw);
  });
}

// ---- structural ------------------------------------------------------------------

Tensor slice_rows(const Tensor& x, Index start, Index count) {
  const Matrix& xv = node_of(x)->value;
  if (start < 0 || count < 0 || start + count > xv.rows()) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " + shape_of(xv));
  }
  Matrix y = xv.middleRows(start, count);
  return make_result(std::move(y), {&x}, "slice_rows", [start, count](Node& self) {
    Node& X = *self.inputs[0];
    if (X.grad.size() == 0) X.grad = Matrix::Zero(X.value.rows(), X.value.cols());
    X.grad.middleRows(start, count) += self.grad;
  });
}

Tensor slice_cols(const Tensor& x, Index start, Index count) {
  const Matrix& xv = node_of(x)->value;
  if (start < 0 || count < 0 || start + count > xv.cols()) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " + shape_of(xv));
  }
  Matrix y = xv.middleCols(start, count);
  return make_result(std::move(y), {&x}, "slice_cols", [start, count](Node& self) {
    Node& X = *self.inputs[0];
    if (X.grad.size() == 0) X.grad = Matrix::Zero(X.value.rows(), X.value.cols());
    X.grad.middleCols(start, count) += self.grad;
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Index c = parts[0].cols();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) shape_error("concat_rows", parts[0], p);
    total += p.rows();
  }
  Matrix y(total, c);
  Index at = 0;
  for (const auto& p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result_vec(std::move(y), parts, "concat_rows", [](Node& self) {
    Index at = 0;
    for (auto& in : self.inputs) {
      Index r = in->value.rows();
      if (in->requires_grad) accumulate(*in, self.grad.middleRows(at, r));
      at += r;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index r = parts[0].rows();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) shape_error("concat_cols", parts[0], p);
    total += p.cols();
  }
  Matrix y(r, total);
  Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result_vec(std::move(y), parts, "concat_cols", [](Node& self) {
    Index at = 0;
    for (auto& in : self.inputs) {
      Index c = in->value.cols();
      if (in->requires_grad) accumulate(*in, self.grad.middleCols(at, c));
      at += c;
    }
  });
}

Tensor masked_fill(const Tensor& x, const Matrix& mask, double fill_value) {
  const Matrix& xv = node_of(x)->value;
  if (mask.rows() != xv.rows() || mask.cols() != xv.cols()) {
    throw std::invalid_argument("masked_fill: mask " + shape_of(mask) + " vs input " + shape_of(xv));
  }
  Matrix y = (mask.array() != 0.0).select(Matrix::Constant(xv.rows(), xv.cols(), fill_value), xv);
  return make_result(std::move(y), {&x}, "masked_fill", [mask](Node& self) {
    Matrix g = (mask.array() != 0.0).select(Matrix::Zero(mask.rows(), mask.cols()), self.grad);
    accumulate(*self.inputs[0], g);
  });
}

// ---- recurrence --------------------------------------------------------------------

Tensor scan(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("scan", a, b);
  const Matrix& av = node_of(a)->value;
  const Matrix& bv = node_of(b)->value;
  const Index n = av.rows();
  Matrix h(n, av.cols());
  if (n > 0) h.row(0) = bv.row(0);
  for (Index t = 1; t < n; ++t) {
    h.row(t) = av.row(t).cwiseProduct(h.row(t - 1)) + bv.row(t);
  }
  return make_result(std::move(h), {&a, &b}, "scan", [](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    const Matrix& hv = self.value;
    const Index n = hv.rows();
    // gh[t] = g[t] + a[t+1] * gh[t+1]
    Matrix gh(n, hv.cols());
    if (n > 0) gh.row(n - 1) = self.grad.row(n - 1);
    for (Index t = n - 2; t >= 0; --t) {
      gh.row(t) = self.grad.row(t) + A.value.row(t + 1).cwiseProduct(gh.row(t + 1));
    }
    if (A.requires_grad) {
      Matrix ga = Matrix::Zero(n, hv.cols());
      if (n > 1) ga.bottomRows(n - 1) = gh.bottomRows(n - 1).cwiseProduct(hv.topRows(n - 1));
      accumulate(A, ga);
    }
    if (B.requires_grad) accumulate(B, gh);
  });
}

// ---- positional --------------------------------------------------------------------

namespace {

void rotate_pairs(Matrix& m, std::span<const double> positions, double base, double sign) {
  const Index c = m.cols();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index i = 0; i < c / 2; ++i) {
      double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(c));
      double angle = sign * positions[static_cast<std::size_t>(r)] * freq;
      double cs = std::cos(angle);
      double sn = std::sin(angle);
      double x0 = m(r, 2 * i);
      double x1 = m(r, 2 * i + 1);
      m(r, 2 * i) = x0 * cs - x1 * sn;
      m(r, 2 * i + 1) = x0 * sn + x1 * cs;
    }
  }
}

}  // namespace

Matrix rope_matrix(const Matrix& x, std::span<const double> positions, double base) {
  if (x.cols() % 2 != 0) {
    throw std::invalid_argument("rope: feature dimension must be even, got " + std::to_string(x.cols()));
  }
  if (static_cast<Index>(positions.size()) != x.rows()) {
    throw std::invalid_argument("rope: " + std::to_string(positions.size()) + " positions for " +
                                std::to_string(x.rows()) + " rows");
  }
  Matrix y = x;
  rotate_pairs(y, positions, base, 1.0);
  return y;
}

Tensor rope(const Tensor& x, std::span<const double> positions, double base) {
  Matrix y = rope_matrix(node_of(x)->value, positions, base);
  std::vector<double> pos(positions.begin(), positions.end());
  return make_result(std::move(y), {&x}, "rope", [pos = std::move(pos), base](Node& self) {
    Matrix g = self.grad;
    rotate_pairs(g, pos, base, -1.0);
    accumulate(*self.inputs[0], g);
  });
}

// ---- reductions --------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Matrix y(1, 1);
  y(0, 0) = node_of(x)->value.sum();
  return make_result(std::move(y), {&x}, "sum", [](Node& self) {
    Node& X = *self.inputs[0];
    accumulate(X, Matrix::Constant(X.value.rows(), X.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  const Matrix& xv = node_of(x)->value;
  if (xv.size() == 0) throw std::invalid_argument("mean of an empty tensor");
  Matrix y(1, 1);
  y(0, 0) = xv.mean();
  return make_result(std::move(y), {&x}, "mean", [](Node& self) {
    Node& X = *self.inputs[0];
    double g = self.grad(0, 0) / static_cast<double>(X.value.size());
    accumulate(X, Matrix::Constant(X.value.rows(), X.value.cols(), g));
  });
}

}  // namespace cyclebench
