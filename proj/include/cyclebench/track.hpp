#pragma once

#include "cyclebench/tensor.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cyclebench {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// Checkpoint frame indices (G1/S onset, S/G2 transition). Stored in frames;
// multiply by Track::frame_interval_min for minutes.
struct Landmarks {
  Index t_g1s = 0;
  Index t_sg2 = 0;
  bool operator==(const Landmarks&) const = default;
};

// One cell trajectory: per-frame observation features and the two
// normalized FUCCI targets.
struct Track {
  std::string id;
  Matrix features;  // N x D
  Matrix targets;   // N x 2
  double frame_interval_min = 5.0;
  std::optional<Landmarks> landmarks;
  std::map<std::string, std::string> tags;

  Index n_frames() const { return targets.rows(); }
  Index feature_dim() const { return features.cols(); }
};

bool operator==(const Track& a, const Track& b);

// Throws std::invalid_argument naming the track id when an invariant fails.
// Stored tracks need at least two frames; crops used during evaluation may be
// shorter, so `min_frames` is configurable.
void validate(const Track& track, Index min_frames = 2);

struct Dataset {
  static constexpr int kFormatVersion = 1;

  std::vector<Track> tracks;
  std::map<std::string, Split> split;
  std::uint64_t seed = 0;
  nlohmann::json generator_params;  // null when not generated
  nlohmann::json normalization;     // null unless signals were normalized here

  const Track& find(const std::string& id) const;
  std::vector<const Track*> tracks_in(Split s) const;
};

bool operator==(const Dataset& a, const Dataset& b);

void validate(const Dataset& dataset);

// Frames [round(tau1 (N-1)), round(tau2 (N-1))] inclusive, rounding half up.
// Landmarks are shifted into the window and dropped unless both fall inside.
Track crop(const Track& track, double tau1, double tau2);

// Index of normalized time tau on a track of n frames.
Index tau_to_index(double tau, Index n);

// Assigns splits by ordering tracks on a seeded hash of their ids; the
// per-split counts are round(train * n), round(val * n), and the remainder.
Dataset split_dataset(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed);

}  // namespace cyclebench
