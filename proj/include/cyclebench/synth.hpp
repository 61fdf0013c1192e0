#pragma once

// Parametric generator of synthetic mitosis-to-mitosis tracks. A latent phase
// clock drives two FUCCI-like reporters (targets) and a per-frame observation
// vector (features) that only weakly reveals the clock.

#include "cyclebench/track.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cyclebench {

enum class Modality { obscured, informative };
enum class Phase : std::uint8_t { G1 = 0, S = 1, G2M = 2 };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

// First-order reporter kinetics, in hours unless noted. Amplitudes are in
// units of the noise floor epsilon.
struct ReporterKinetics {
  double cdt1_rise_h = 3.0;
  double cdt1_tail_h = 0.25;
  // Fraction of the G1/S peak left at the S/G2 transition; the decay rate
  // through S is set per track from this.
  double cdt1_level_at_sg2 = 0.063;
  double geminin_rise_h = 3.33;
  double geminin_mitotic_drop_h = 0.33;
  double cdt1_amplitude = 24.0;
  double geminin_amplitude = 30.0;
  double epsilon = 100.0;  // raw background level, also the normalization epsilon
  double target_noise_std = 0.0;
};

struct CycleParams {
  std::array<double, 3> phase_mean_h{8.0, 8.0, 4.0};
  std::array<double, 3> phase_std_h{2.2, 1.6, 0.8};
  double frame_interval_min = 5.0;
  ReporterKinetics reporter;
  int obs_dim = 16;
  Modality modality = Modality::obscured;
  double noise_std = 0.5;
  std::uint64_t mixing_seed = 17;
  // Track-level nuisance: birth size spread (log-normal sigma) and slow drift.
  double birth_size_sigma = 0.25;
  double drift_amplitude = 0.5;
  int mitosis_cue_frames = 6;
  int min_frames = 20;
  std::string condition = "regular";
  double g1_scale = 1.0;

  void validate() const;
};

nlohmann::json to_json(const CycleParams& p);
CycleParams cycle_params_from_json(const nlohmann::json& j);

struct LatentTrajectory {
  Index n_frames = 0;
  std::vector<Phase> phase_of_frame;
  Index t_g1s = 0;
  Index t_sg2 = 0;
  std::vector<double> progress;     // normalized cycle time in [0, 1]
  std::vector<double> s_progress;   // 0 in G1, 0..1 through S, 1 in G2/M
  std::vector<double> mitosis_cue;  // nonzero in the first/last mitosis frames
  std::vector<std::array<double, 2>> drift;
  double birth_size = 1.0;
  std::array<double, 3> phase_duration_h{};
};

using Rng = std::mt19937_64;

LatentTrajectory sample_cycle(const CycleParams& params, Rng& rng);
Matrix reporter_signals(const LatentTrajectory& latent, const CycleParams& params);
Matrix reporter_signals(const LatentTrajectory& latent, const CycleParams& params, Rng& rng);
Matrix observe(const LatentTrajectory& latent, const Matrix& targets, const CycleParams& params, Rng& rng);

// Stretches G1 (mean and std) by g1_scale; S and G2/M unchanged.
CycleParams perturb_drug(const CycleParams& params, double g1_scale);

// Per-track RNG stream keyed by (seed, index) so any generation order agrees.
Rng track_rng(std::uint64_t seed, std::uint64_t index);

Track generate_track(const CycleParams& params, std::uint64_t seed, std::uint64_t index);
Dataset gen_dataset(const CycleParams& params, std::size_t n_tracks, std::uint64_t seed);

inline constexpr double kDrugG1Scale = 3.5;

CycleParams preset(const std::string& name);

}  // namespace cyclebench
