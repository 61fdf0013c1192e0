#pragma once

// Ground-truth FUCCI signal construction: percentile noise floor, shifted
// Softplus-log transform, and the smoothing/scaling used by the checkpoint
// detectors.

#include <nlohmann/json.hpp>

#include <array>
#include <span>
#include <vector>

namespace cyclebench {

struct NormalizationParams {
  std::array<double, 2> epsilon{1.0, 1.0};
  double percentile = 1.0;
  double softplus_beta = 1.0;

  void validate() const;
};

nlohmann::json to_json(const NormalizationParams& p);
NormalizationParams normalization_from_json(const nlohmann::json& j);

// Percentile with linear interpolation between closest ranks (rank p/100 * (n-1)).
double percentile(std::vector<double> samples, double p);

// Per-channel noise floor pooled over every frame of every track.
double compute_epsilon(std::span<const double> samples, double pct = 1.0);
std::array<double, 2> compute_epsilon(std::span<const double> channel1, std::span<const double> channel2,
                                      double pct = 1.0);

// log2(softplus((mean - eps) / eps)), stable for strongly negative arguments.
double normalize_fucci(double mean_intensity, double epsilon);
// Inverse of normalize_fucci up to the affine map: returns (mean - eps) / eps.
double linearize_fucci(double value);
double denormalize_fucci(double value, double epsilon);

double log2_softplus(double x);
double softplus_inverse(double y);

// Centered moving average; the window covers [t - w/2, t + (w-1)/2] truncated
// to the signal, averaging only frames that exist.
std::vector<double> smooth(std::span<const double> signal, int window);

// (x - min) / (max - min); all zeros when the signal is constant.
std::vector<double> minmax_normalize(std::span<const double> signal);

}  // namespace cyclebench
