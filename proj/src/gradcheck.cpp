#include "cyclebench/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cyclebench {

namespace {

double evaluate(const ScalarFn& fn, const std::vector<Matrix>& values) {
  std::vector<Tensor> ts;
  ts.reserve(values.size());
  for (const auto& v : values) ts.push_back(Tensor::constant(v));
  return fn(ts).item();
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Matrix>& inputs, double h, double tol,
                           double floor) {
  std::vector<Tensor> params;
  params.reserve(inputs.size());
  for (const auto& v : inputs) params.push_back(Tensor::parameter(v));
  Tensor loss = fn(params);
  loss.backward();

  GradCheckReport report;
  std::vector<Matrix> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Matrix analytic = params[i].grad();
    for (Index r = 0; r < inputs[i].rows(); ++r) {
      for (Index c = 0; c < inputs[i].cols(); ++c) {
        const double x0 = inputs[i](r, c);
        probe[i](r, c) = x0 + h;
        double fp = evaluate(fn, probe);
        probe[i](r, c) = x0 - h;
        double fm = evaluate(fn, probe);
        probe[i](r, c) = x0;
        double numeric = (fp - fm) / (2.0 * h);
        double a = analytic(r, c);
        double denom = std::max({std::abs(a), std::abs(numeric), floor});
        double rel = std::abs(a - numeric) / denom;
        if (std::isnan(rel)) rel = INFINITY;
        if (report.coordinates_checked++ == 0 || rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.input = i;
          report.row = r;
          report.col = c;
          report.analytic = a;
          report.numeric = numeric;
        }
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace cyclebench
