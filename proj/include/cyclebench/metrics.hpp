#pragma once

// Per-track evaluation quantities: per-channel L1, R^2, penalized DTW,
// checkpoint detection, timing errors, and phase F1.

#include "cyclebench/synth.hpp"
#include "cyclebench/tensor.hpp"
#include "cyclebench/track.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace cyclebench {

inline constexpr double kDtwPenalty = 0.1;
inline constexpr double kDetectionThreshold = 0.05;
inline constexpr int kDetectionWindow = 20;

std::array<double, 2> l1_per_channel(const Matrix& yhat, const Matrix& y);

// 1 - SS_res / SS_tot over both channels, SS_tot about per-channel means.
// Throws std::domain_error when the target has zero variance.
double r_squared(const Matrix& yhat, const Matrix& y);

// Boundary-anchored DTW over rows with squared Euclidean step cost; every
// horizontal or vertical move adds penalty^2. Returns sqrt of the total.
double dtw(const Matrix& a, const Matrix& b, double penalty = kDtwPenalty);

// Detectors take the linear (not log) signal of one channel.
std::optional<Index> detect_g1s(std::span<const double> green_linear);
std::optional<Index> detect_sg2(std::span<const double> red_linear);

// Column of a log-space target matrix mapped back to linear intensity.
std::vector<double> linear_channel(const Matrix& y, Index channel);

struct DetectedCheckpoints {
  std::optional<Index> t_g1s;
  std::optional<Index> t_sg2;
};
DetectedCheckpoints detect_checkpoints(const Matrix& y_log);

std::vector<Phase> phase_labels(Index t_g1s, Index t_sg2, Index n);
// Labels from possibly-missing detections: a missing G1/S leaves every frame
// in G1, a missing S/G2 leaves S running to the end.
std::vector<Phase> phase_labels_lenient(const DetectedCheckpoints& c, Index n);

// Per-class confusion counts, pooled by summation across tracks.
struct PhaseCounts {
  std::array<long long, 3> tp{};
  std::array<long long, 3> fp{};
  std::array<long long, 3> fn{};

  void add(std::span<const Phase> pred, std::span<const Phase> gt);
  PhaseCounts& operator+=(const PhaseCounts& o);
  // F1 per class; 1 when the class is absent from both.
  std::array<double, 3> f1() const;
};

std::array<double, 3> f1_scores(std::span<const Phase> pred, std::span<const Phase> gt);

double delta_t(Index pred, Index gt, double frame_interval_min);

struct TrackMetrics {
  double l1_fucci1 = 0.0;
  double l1_fucci2 = 0.0;
  std::optional<double> r2;  // absent for constant targets
  double dtw = 0.0;
  std::optional<Index> t_g1s_pred;
  std::optional<Index> t_sg2_pred;
  std::optional<Index> t_g1s_true;
  std::optional<Index> t_sg2_true;
  std::optional<double> dt_g1s_min;
  std::optional<double> dt_sg2_min;
  std::array<double, 3> phase_f1{1.0, 1.0, 1.0};
  PhaseCounts counts;
};

// Ground-truth checkpoints come from the detectors applied to the targets so
// predicted and true timings pass through the same pipeline.
TrackMetrics track_metrics(const Matrix& yhat, const Matrix& y, double frame_interval_min);

}  // namespace cyclebench
