#include "cyclebench/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cyclebench {

void NormalizationParams::validate() const {
  for (double e : epsilon) {
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("epsilon must be positive");
  }
  if (!(percentile > 0.0 && percentile < 50.0)) throw std::invalid_argument("percentile must lie in (0, 50)");
  if (softplus_beta != 1.0) throw std::invalid_argument("softplus beta is fixed at 1");
}

nlohmann::json to_json(const NormalizationParams& p) {
  return {{"epsilon", p.epsilon}, {"percentile", p.percentile}, {"softplus_beta", p.softplus_beta}};
}

NormalizationParams normalization_from_json(const nlohmann::json& j) {
  NormalizationParams p;
  p.epsilon = j.at("epsilon").get<std::array<double, 2>>();
  p.percentile = j.value("percentile", 1.0);
  p.softplus_beta = j.value("softplus_beta", 1.0);
  p.validate();
  return p;
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile must lie in [0, 100]");
  std::sort(samples.begin(), samples.end());
  const double rank = p / 100.0 * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

double compute_epsilon(std::span<const double> samples, double pct) {
  if (samples.size() < 2) throw std::invalid_argument("compute_epsilon: need at least 2 samples");
  for (double v : samples) {
    if (!std::isfinite(v)) throw std::invalid_argument("compute_epsilon: non-finite sample");
  }
  double eps = percentile(std::vector<double>(samples.begin(), samples.end()), pct);
  if (!(eps > 0.0)) {
    throw std::runtime_error("compute_epsilon: nonpositive noise floor " + std::to_string(eps) +
                             " (corrupted ground truth?)");
  }
  return eps;
}

std::array<double, 2> compute_epsilon(std::span<const double> channel1, std::span<const double> channel2,
                                      double pct) {
  return {compute_epsilon(channel1, pct), compute_epsilon(channel2, pct)};
}

double log2_softplus(double x) {
  // softplus(x) = e^x (1 - e^x / 2 + ...) for very negative x.
  if (x < -30.0) return (x + std::log1p(-0.5 * std::exp(x))) / std::numbers::ln2;
  double sp = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  return std::log2(sp);
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inverse: argument must be positive");
  if (y > 30.0) return y + std::log1p(-std::exp(-y));
  return std::log(std::expm1(y));
}

double normalize_fucci(double mean_intensity, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("normalize_fucci: epsilon must be positive");
  return log2_softplus((mean_intensity - epsilon) / epsilon);
}

double linearize_fucci(double value) { return softplus_inverse(std::exp2(value)); }

double denormalize_fucci(double value, double epsilon) { return epsilon * (linearize_fucci(value) + 1.0); }

std::vector<double> smooth(std::span<const double> signal, int window) {
  if (window < 1) throw std::invalid_argument("smooth: window must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  const std::ptrdiff_t left = window / 2;
  const std::ptrdiff_t right = window - 1 - left;
  std::vector<double> out(signal.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, t - left);
    const std::ptrdiff_t b = std::min(n - 1, t + right);
    // Deviations from the first sample keep constant runs exact; the clamp
    // keeps rounding from leaving the window's range.
    const double anchor = signal[a];
    double dev = 0.0;
    double lo = anchor;
    double hi = anchor;
    for (std::ptrdiff_t i = a; i <= b; ++i) {
      dev += signal[i] - anchor;
      lo = std::min(lo, signal[i]);
      hi = std::max(hi, signal[i]);
    }
    out[t] = std::clamp(anchor + dev / static_cast<double>(b - a + 1), lo, hi);
  }
  return out;
}

std::vector<double> minmax_normalize(std::span<const double> signal) {
  std::vector<double> out(signal.size(), 0.0);
  if (signal.empty()) return out;
  auto [lo, hi] = std::minmax_element(signal.begin(), signal.end());
  const double range = *hi - *lo;
  if (range == 0.0) return out;
  for (std::size_t i = 0; i < signal.size(); ++i) out[i] = (signal[i] - *lo) / range;
  return out;
}

}  // namespace cyclebench
