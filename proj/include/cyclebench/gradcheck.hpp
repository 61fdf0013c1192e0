#pragma once

#include "cyclebench/tensor.hpp"

#include <functional>
#include <span>
#include <vector>

namespace cyclebench {

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Location of the worst coordinate.
  std::size_t input = 0;
  Index row = 0;
  Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

// Compares reverse-mode gradients of fn at `inputs` with central differences
// of step h. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Matrix>& inputs, double h = 1e-5,
                           double tol = 1e-6, double floor = 1e-3);

}  // namespace cyclebench
