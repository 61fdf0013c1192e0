#pragma once

// Dense 2-D tensors with reverse-mode automatic differentiation.
//
// Every value is a row-major matrix (frames x channels). Operations record a
// closure computing their vector-Jacobian product; Tensor::backward() walks
// the recorded graph in reverse topological order. Results of operations on
// tensors that do not require gradients are plain constants, so inference
// builds no graph.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cyclebench {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }

  bool defined() const { return static_cast<bool>(node_); }
  Index rows() const;
  Index cols() const;
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  std::string shape_str() const;

  const Matrix& value() const;
  // Parameters only; used by optimizers and checkpoint loading.
  Matrix& mutable_value();

  bool requires_grad() const;
  bool has_grad() const;
  // Zero-filled matrix of the value's shape when no gradient has flowed.
  Matrix grad() const;
  void zero_grad();

  double item() const;
  Tensor detach() const;

  // Populates gradients of every reachable leaf that requires them. Leaf
  // gradients accumulate across calls until zero_grad().
  void backward() const;

  const detail::Node* node() const { return node_.get(); }

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Vector-Jacobian product of a user-defined op: receives the output gradient
// and returns one gradient per input (shape-matched).
using VjpFn = std::function<std::vector<Matrix>(const Matrix& grad_out)>;

// Escape hatch for ops defined outside this library (tests, experiments).
Tensor custom_op(std::vector<Tensor> inputs, Matrix value, VjpFn vjp);

// ---- forward ops -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
// x + row, with row (1 x C) broadcast over every row of x.
Tensor add_row(const Tensor& x, const Tensor& row);
// x * row elementwise, row broadcast over rows.
Tensor mul_row(const Tensor& x, const Tensor& row);
// x W + b, b broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor abs(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
// Normalizes each row; gamma and beta are 1 x C.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// y[t] = sum_j x[t - j*dilation] * W_j, with W_j the j-th block of C_in rows
// of weight ((k*C_in) x C_out). Frames before 0 are zero.
Tensor causal_conv1d(const Tensor& x, const Tensor& weight, int dilation = 1);
// Per-channel variant: weight is k x C, y[t,c] = sum_j x[t - j*dilation, c] w[j,c].
Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& weight, int dilation = 1);

Tensor slice_rows(const Tensor& x, Index start, Index count);
Tensor slice_cols(const Tensor& x, Index start, Index count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// Entries where mask != 0 are replaced by fill_value and receive no gradient.
Tensor masked_fill(const Tensor& x, const Matrix& mask, double fill_value);

// h[t] = a[t] * h[t-1] + b[t] elementwise, h[-1] = 0. Returns all h.
Tensor scan(const Tensor& a, const Tensor& b);

// Rotary position embedding over column pairs (2i, 2i+1) with angle
// positions[r] * base^(-2i/C).
Tensor rope(const Tensor& x, std::span<const double> positions, double base);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- helpers ---------------------------------------------------------------

Matrix rope_matrix(const Matrix& x, std::span<const double> positions, double base);

}  // namespace cyclebench
