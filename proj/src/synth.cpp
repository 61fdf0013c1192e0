#include "cyclebench/synth.hpp"

#include "cyclebench/dataset_io.hpp"
#include "cyclebench/signal.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace cyclebench {

using nlohmann::json;

std::string to_string(Modality m) { return m == Modality::obscured ? "obscured" : "informative"; }

Modality modality_from_string(const std::string& s) {
  if (s == "obscured") return Modality::obscured;
  if (s == "informative") return Modality::informative;
  throw std::invalid_argument("unknown modality '" + s + "' (expected obscured|informative)");
}

void CycleParams::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(phase_mean_h[i] > 0.0)) throw std::invalid_argument("phase means must be positive");
    if (!(phase_std_h[i] >= 0.0)) throw std::invalid_argument("phase stds must be nonnegative");
  }
  if (!(frame_interval_min > 0.0)) throw std::invalid_argument("frame interval must be positive");
  if (obs_dim < 2) throw std::invalid_argument("obs_dim must be >= 2");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be nonnegative");
  if (!(reporter.epsilon > 0.0)) throw std::invalid_argument("reporter epsilon must be positive");
  if (!(reporter.cdt1_level_at_sg2 > 0.0 && reporter.cdt1_level_at_sg2 < 1.0)) {
    throw std::invalid_argument("cdt1_level_at_sg2 must lie in (0, 1)");
  }
  if (min_frames < 4) throw std::invalid_argument("min_frames must be >= 4");
}

json to_json(const CycleParams& p) {
  const auto& r = p.reporter;
  return {
      {"phase_mean_h", p.phase_mean_h},
      {"phase_std_h", p.phase_std_h},
      {"frame_interval_min", p.frame_interval_min},
      {"reporter",
       {{"cdt1_rise_h", r.cdt1_rise_h},
        {"cdt1_tail_h", r.cdt1_tail_h},
        {"cdt1_level_at_sg2", r.cdt1_level_at_sg2},
        {"geminin_rise_h", r.geminin_rise_h},
        {"geminin_mitotic_drop_h", r.geminin_mitotic_drop_h},
        {"cdt1_amplitude", r.cdt1_amplitude},
        {"geminin_amplitude", r.geminin_amplitude},
        {"epsilon", r.epsilon},
        {"target_noise_std", r.target_noise_std}}},
      {"obs_dim", p.obs_dim},
      {"modality", to_string(p.modality)},
      {"noise_std", p.noise_std},
      {"mixing_seed", p.mixing_seed},
      {"birth_size_sigma", p.birth_size_sigma},
      {"drift_amplitude", p.drift_amplitude},
      {"mitosis_cue_frames", p.mitosis_cue_frames},
      {"min_frames", p.min_frames},
      {"condition", p.condition},
      {"g1_scale", p.g1_scale},
  };
}

CycleParams cycle_params_from_json(const json& j) {
  CycleParams p;
  p.phase_mean_h = j.at("phase_mean_h").get<std::array<double, 3>>();
  p.phase_std_h = j.at("phase_std_h").get<std::array<double, 3>>();
  p.frame_interval_min = j.at("frame_interval_min").get<double>();
  const auto& r = j.at("reporter");
  p.reporter.cdt1_rise_h = r.at("cdt1_rise_h").get<double>();
  p.reporter.cdt1_tail_h = r.at("cdt1_tail_h").get<double>();
  p.reporter.cdt1_level_at_sg2 = r.at("cdt1_level_at_sg2").get<double>();
  p.reporter.geminin_rise_h = r.at("geminin_rise_h").get<double>();
  p.reporter.geminin_mitotic_drop_h = r.at("geminin_mitotic_drop_h").get<double>();
  p.reporter.cdt1_amplitude = r.at("cdt1_amplitude").get<double>();
  p.reporter.geminin_amplitude = r.at("geminin_amplitude").get<double>();
  p.reporter.epsilon = r.at("epsilon").get<double>();
  p.reporter.target_noise_std = r.value("target_noise_std", 0.0);
  p.obs_dim = j.at("obs_dim").get<int>();
  p.modality = modality_from_string(j.at("modality").get<std::string>());
  p.noise_std = j.at("noise_std").get<double>();
  p.mixing_seed = j.at("mixing_seed").get<std::uint64_t>();
  p.birth_size_sigma = j.at("birth_size_sigma").get<double>();
  p.drift_amplitude = j.at("drift_amplitude").get<double>();
  p.mitosis_cue_frames = j.at("mitosis_cue_frames").get<int>();
  p.min_frames = j.at("min_frames").get<int>();
  p.condition = j.at("condition").get<std::string>();
  p.g1_scale = j.value("g1_scale", 1.0);
  p.validate();
  return p;
}

namespace {

double truncated_normal(double mean, double sd, Rng& rng) {
  if (sd == 0.0) return mean;
  std::normal_distribution<double> dist(mean, sd);
  const double floor = 0.2 * mean;
  for (;;) {
    double v = dist(rng);
    if (v >= floor) return v;
  }
}

double frames_per_hour(const CycleParams& p) { return 60.0 / p.frame_interval_min; }

}  // namespace

Rng track_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

LatentTrajectory sample_cycle(const CycleParams& params, Rng& rng) {
  params.validate();
  LatentTrajectory lt;
  for (int i = 0; i < 3; ++i) lt.phase_duration_h[i] = truncated_normal(params.phase_mean_h[i], params.phase_std_h[i], rng);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  lt.birth_size = std::exp(params.birth_size_sigma * unit(rng));
  std::array<double, 2> period{};
  std::array<double, 2> phase0{};
  for (int k = 0; k < 2; ++k) {
    period[k] = 60.0 + 240.0 * uni(rng);
    phase0[k] = 2.0 * std::numbers::pi * uni(rng);
  }

  const double fph = frames_per_hour(params);
  const double g1 = lt.phase_duration_h[0];
  const double s = lt.phase_duration_h[1];
  const double total = g1 + s + lt.phase_duration_h[2];
  const Index n = std::max<Index>(params.min_frames, std::llround(total * fph));
  lt.n_frames = n;
  lt.t_g1s = std::clamp<Index>(std::llround(g1 * fph), 1, n - 2);
  lt.t_sg2 = std::clamp<Index>(std::llround((g1 + s) * fph), lt.t_g1s + 1, n - 1);

  lt.phase_of_frame.resize(n);
  lt.progress.resize(n);
  lt.s_progress.resize(n);
  lt.mitosis_cue.resize(n);
  lt.drift.resize(n);
  const int cue = params.mitosis_cue_frames;
  for (Index t = 0; t < n; ++t) {
    lt.phase_of_frame[t] = t < lt.t_g1s ? Phase::G1 : (t < lt.t_sg2 ? Phase::S : Phase::G2M);
    lt.progress[t] = static_cast<double>(t) / static_cast<double>(n - 1);
    if (t < lt.t_g1s) {
      lt.s_progress[t] = 0.0;
    } else if (t < lt.t_sg2) {
      lt.s_progress[t] = static_cast<double>(t - lt.t_g1s) / static_cast<double>(lt.t_sg2 - lt.t_g1s);
    } else {
      lt.s_progress[t] = 1.0;
    }
    double m = 0.0;
    if (t < cue) m = std::max(m, std::exp(-static_cast<double>(t) / 2.0));
    if (t >= n - cue) m = std::max(m, std::exp(-static_cast<double>(n - 1 - t) / 2.0));
    lt.mitosis_cue[t] = m;
    for (int k = 0; k < 2; ++k) {
      lt.drift[t][k] = params.drift_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period[k] + phase0[k]);
    }
  }
  return lt;
}

Matrix reporter_signals(const LatentTrajectory& lt, const CycleParams& params) {
  const auto& r = params.reporter;
  const double fph = frames_per_hour(params);
  const Index n = lt.n_frames;
  const auto g = static_cast<double>(lt.t_g1s);
  const auto sg = static_cast<double>(lt.t_sg2);
  const double rise1 = r.cdt1_rise_h * fph;
  const double tail1 = r.cdt1_tail_h * fph;
  const double rise2 = r.geminin_rise_h * fph;
  const Index drop = std::max<Index>(1, std::llround(r.geminin_mitotic_drop_h * fph));
  const double peak1 = r.cdt1_amplitude * (1.0 - std::exp(-g / rise1));
  const double decay1 = std::log(1.0 / r.cdt1_level_at_sg2) / (sg - g);

  Matrix y(n, 2);
  for (Index i = 0; i < n; ++i) {
    const auto t = static_cast<double>(i);
    // Shifted intensities in units of epsilon, i.e. (mean - eps) / eps.
    double c1;
    if (i < lt.t_g1s) {
      c1 = r.cdt1_amplitude * (1.0 - std::exp(-t / rise1));
    } else if (i < lt.t_sg2) {
      c1 = peak1 * std::exp(-decay1 * (t - g));
    } else {
      c1 = peak1 * r.cdt1_level_at_sg2 * std::exp(-(t - sg) / tail1);
    }
    double c2 = 0.0;
    if (i >= lt.t_g1s) {
      c2 = r.geminin_amplitude * (1.0 - std::exp(-(t - g) / rise2));
      if (i >= n - drop) c2 *= 1.0 - 0.7 * static_cast<double>(i - (n - drop) + 1) / static_cast<double>(drop);
    }
    y(i, 0) = normalize_fucci(r.epsilon * (1.0 + c1), r.epsilon);
    y(i, 1) = normalize_fucci(r.epsilon * (1.0 + c2), r.epsilon);
  }
  return y;
}

Matrix reporter_signals(const LatentTrajectory& latent, const CycleParams& params, Rng& rng) {
  Matrix y = reporter_signals(latent, params);
  if (params.reporter.target_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, params.reporter.target_noise_std);
    for (Index i = 0; i < y.size(); ++i) y.data()[i] += noise(rng);
  }
  return y;
}

Matrix observe(const LatentTrajectory& lt, const Matrix& targets, const CycleParams& params, Rng& rng) {
  (void)targets;  // features never see the reporters
  constexpr int kCues = 5;
  const int d = params.obs_dim;
  Rng mix(params.mixing_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Matrix w(d, kCues);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = unit(mix) / std::sqrt(2.0);
  Eigen::VectorXd b(d);
  for (Index i = 0; i < d; ++i) b(i) = 0.3 * unit(mix);

  const bool informative = params.modality == Modality::informative;
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(lt.n_frames, d);
  Eigen::VectorXd cues(kCues);
  for (Index t = 0; t < lt.n_frames; ++t) {
    cues(0) = lt.birth_size * std::exp2(lt.progress[t]) - 1.5;
    cues(1) = lt.mitosis_cue[t];
    cues(2) = lt.drift[t][0];
    cues(3) = lt.drift[t][1];
    cues(4) = informative ? 2.0 * lt.s_progress[t] - 1.0 : 0.0;
    Eigen::VectorXd row = (w * cues + b).array().tanh();
    x.row(t) = row.transpose();
    if (params.noise_std > 0.0) {
      for (int j = 0; j < d; ++j) x(t, j) += params.noise_std * noise(rng);
    }
  }
  return x;
}

CycleParams perturb_drug(const CycleParams& params, double g1_scale) {
  if (!(g1_scale > 0.0)) throw std::invalid_argument("g1_scale must be positive");
  CycleParams p = params;
  p.phase_mean_h[0] *= g1_scale;
  p.phase_std_h[0] *= g1_scale;
  p.g1_scale *= g1_scale;
  if (g1_scale != 1.0) p.condition = "drug";
  return p;
}

Track generate_track(const CycleParams& params, std::uint64_t seed, std::uint64_t index) {
  Rng rng = track_rng(seed, index);
  LatentTrajectory lt = sample_cycle(params, rng);
  Track t;
  char id[32];
  std::snprintf(id, sizeof id, "syn%05llu", static_cast<unsigned long long>(index));
  t.id = id;
  t.targets = reporter_signals(lt, params, rng);
  t.features = observe(lt, t.targets, params, rng);
  storage_round(t.targets);
  storage_round(t.features);
  t.frame_interval_min = params.frame_interval_min;
  t.landmarks = Landmarks{lt.t_g1s, lt.t_sg2};
  t.tags = {{"condition", params.condition}, {"modality", to_string(params.modality)}};
  return t;
}

Dataset gen_dataset(const CycleParams& params, std::size_t n_tracks, std::uint64_t seed) {
  if (n_tracks < 1) throw std::invalid_argument("gen_dataset: n_tracks must be >= 1");
  params.validate();
  Dataset d;
  d.tracks.reserve(n_tracks);
  for (std::size_t i = 0; i < n_tracks; ++i) d.tracks.push_back(generate_track(params, seed, i));
  d.seed = seed;
  d.generator_params = to_json(params);
  d.normalization = {{"epsilon", {params.reporter.epsilon, params.reporter.epsilon}},
                     {"percentile", 1.0},
                     {"softplus_beta", 1.0}};
  return d;
}

CycleParams preset(const std::string& name) {
  CycleParams p;
  if (name == "regular") return p;
  if (name == "drug") return perturb_drug(p, kDrugG1Scale);
  if (name == "informative") {
    p.modality = Modality::informative;
    return p;
  }
  if (name == "drug-informative") {
    p.modality = Modality::informative;
    return perturb_drug(p, kDrugG1Scale);
  }
  throw std::invalid_argument("unknown preset '" + name + "' (regular|drug|informative|drug-informative)");
}

}  // namespace cyclebench
