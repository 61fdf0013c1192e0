#include "cyclebench/metrics.hpp"

#include "cyclebench/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cyclebench {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

}  // namespace

std::array<double, 2> l1_per_channel(const Matrix& yhat, const Matrix& y) {
  require_same_shape(yhat, y, "l1_per_channel");
  if (y.cols() != 2) throw std::invalid_argument("l1_per_channel: expected 2 channels");
  if (y.rows() == 0) throw std::invalid_argument("l1_per_channel: no frames");
  Eigen::RowVectorXd m = (yhat - y).cwiseAbs().colwise().mean();
  return {m(0), m(1)};
}

double r_squared(const Matrix& yhat, const Matrix& y) {
  require_same_shape(yhat, y, "r_squared");
  if (y.rows() < 2) throw std::invalid_argument("r_squared: need at least 2 frames");
  Eigen::RowVectorXd mu = y.colwise().mean();
  const double ss_tot = (y.rowwise() - mu).squaredNorm();
  if (!(ss_tot > 0.0)) throw std::domain_error("r_squared: target has zero variance");
  return 1.0 - (yhat - y).squaredNorm() / ss_tot;
}

double dtw(const Matrix& a, const Matrix& b, double penalty) {
  const Index n = a.rows();
  const Index m = b.rows();
  if (n < 1 || m < 1) throw std::invalid_argument("dtw: empty input");
  if (a.cols() != b.cols()) throw std::invalid_argument("dtw: channel count mismatch");
  const double p2 = penalty * penalty;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(static_cast<std::size_t>(m), inf);
  std::vector<double> cur(static_cast<std::size_t>(m), inf);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double cost = (a.row(i) - b.row(j)).squaredNorm();
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0 && j > 0) best = prev[static_cast<std::size_t>(j - 1)];
        if (i > 0) best = std::min(best, prev[static_cast<std::size_t>(j)] + p2);
        if (j > 0) best = std::min(best, cur[static_cast<std::size_t>(j - 1)] + p2);
      }
      cur[static_cast<std::size_t>(j)] = best + cost;
    }
    std::swap(prev, cur);
  }
  return std::sqrt(prev[static_cast<std::size_t>(m - 1)]);
}

namespace {

std::vector<double> detection_signal(std::span<const double> x) {
  return smooth(minmax_normalize(x), kDetectionWindow);
}

}  // namespace

std::optional<Index> detect_g1s(std::span<const double> green_linear) {
  if (green_linear.size() < 2) return std::nullopt;
  auto s = detection_signal(green_linear);
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t] > kDetectionThreshold) return static_cast<Index>(t);
  }
  return std::nullopt;
}

std::optional<Index> detect_sg2(std::span<const double> red_linear) {
  if (red_linear.size() < 2) return std::nullopt;
  auto s = detection_signal(red_linear);
  auto peak = std::max_element(s.begin(), s.end());
  if (!(*peak > 0.0)) return std::nullopt;
  for (auto it = peak + 1; it != s.end(); ++it) {
    if (*it < kDetectionThreshold) return static_cast<Index>(it - s.begin());
  }
  return std::nullopt;
}

std::vector<double> linear_channel(const Matrix& y, Index channel) {
  std::vector<double> out(static_cast<std::size_t>(y.rows()));
  for (Index t = 0; t < y.rows(); ++t) out[static_cast<std::size_t>(t)] = linearize_fucci(y(t, channel));
  return out;
}

DetectedCheckpoints detect_checkpoints(const Matrix& y_log) {
  if (y_log.cols() != 2) throw std::invalid_argument("detect_checkpoints: expected 2 channels");
  auto red = linear_channel(y_log, 0);
  auto green = linear_channel(y_log, 1);
  return {detect_g1s(green), detect_sg2(red)};
}

std::vector<Phase> phase_labels(Index t_g1s, Index t_sg2, Index n) {
  if (!(0 <= t_g1s && t_g1s < t_sg2 && t_sg2 < n)) {
    throw std::invalid_argument("phase_labels: need 0 <= t_g1s < t_sg2 < n, got (" + std::to_string(t_g1s) +
                                ", " + std::to_string(t_sg2) + ", " + std::to_string(n) + ")");
  }
  std::vector<Phase> out(static_cast<std::size_t>(n), Phase::G2M);
  std::fill(out.begin(), out.begin() + t_g1s, Phase::G1);
  std::fill(out.begin() + t_g1s, out.begin() + t_sg2, Phase::S);
  return out;
}

std::vector<Phase> phase_labels_lenient(const DetectedCheckpoints& c, Index n) {
  const Index g = c.t_g1s.value_or(n);
  const Index s = std::max(g, c.t_sg2.value_or(n));
  std::vector<Phase> out(static_cast<std::size_t>(n), Phase::G2M);
  std::fill(out.begin(), out.begin() + std::min(g, n), Phase::G1);
  std::fill(out.begin() + std::min(g, n), out.begin() + std::min(s, n), Phase::S);
  return out;
}

void PhaseCounts::add(std::span<const Phase> pred, std::span<const Phase> gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("f1: label lengths differ (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()) + ")");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred[i]);
    const auto g = static_cast<std::size_t>(gt[i]);
    if (p == g) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
}

PhaseCounts& PhaseCounts::operator+=(const PhaseCounts& o) {
  for (std::size_t k = 0; k < 3; ++k) {
    tp[k] += o.tp[k];
    fp[k] += o.fp[k];
    fn[k] += o.fn[k];
  }
  return *this;
}

std::array<double, 3> PhaseCounts::f1() const {
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const long long denom = 2 * tp[k] + fp[k] + fn[k];
    out[k] = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
  }
  return out;
}

std::array<double, 3> f1_scores(std::span<const Phase> pred, std::span<const Phase> gt) {
  PhaseCounts c;
  c.add(pred, gt);
  return c.f1();
}

double delta_t(Index pred, Index gt, double frame_interval_min) {
  return static_cast<double>(std::abs(pred - gt)) * frame_interval_min;
}

TrackMetrics track_metrics(const Matrix& yhat, const Matrix& y, double frame_interval_min) {
  require_same_shape(yhat, y, "track_metrics");
  TrackMetrics m;
  auto l1 = l1_per_channel(yhat, y);
  m.l1_fucci1 = l1[0];
  m.l1_fucci2 = l1[1];
  if (y.rows() >= 2) {
    try {
      m.r2 = r_squared(yhat, y);
    } catch (const std::domain_error&) {
      m.r2.reset();
    }
  }
  m.dtw = dtw(yhat, y);

  const auto pred = detect_checkpoints(yhat);
  const auto truth = detect_checkpoints(y);
  m.t_g1s_pred = pred.t_g1s;
  m.t_sg2_pred = pred.t_sg2;
  m.t_g1s_true = truth.t_g1s;
  m.t_sg2_true = truth.t_sg2;
  if (pred.t_g1s && truth.t_g1s) m.dt_g1s_min = delta_t(*pred.t_g1s, *truth.t_g1s, frame_interval_min);
  if (pred.t_sg2 && truth.t_sg2) m.dt_sg2_min = delta_t(*pred.t_sg2, *truth.t_sg2, frame_interval_min);

  const Index n = y.rows();
  m.counts.add(phase_labels_lenient(pred, n), phase_labels_lenient(truth, n));
  m.phase_f1 = m.counts.f1();
  return m;
}

}  // namespace cyclebench
