#include "cyclebench/track.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace cyclebench {

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

[[noreturn]] void track_error(const Track& t, const std::string& what) {
  throw std::invalid_argument("track '" + t.id + "': " + what);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t id_hash(const std::string& id, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(h ^ splitmix64(seed));
}

}  // namespace

bool operator==(const Track& a, const Track& b) {
  return a.id == b.id && same_matrix(a.features, b.features) && same_matrix(a.targets, b.targets) &&
         a.frame_interval_min == b.frame_interval_min && a.landmarks == b.landmarks && a.tags == b.tags;
}

void validate(const Track& t, Index min_frames) {
  if (t.id.empty()) throw std::invalid_argument("track with empty id");
  const Index n = t.targets.rows();
  if (n < min_frames) {
    track_error(t, std::to_string(n) + " frames, need at least " + std::to_string(min_frames));
  }
  if (t.targets.cols() != 2) track_error(t, "targets must have 2 columns");
  if (t.features.rows() != n) {
    track_error(t, "features have " + std::to_string(t.features.rows()) + " rows, targets " +
                       std::to_string(n));
  }
  if (!t.features.allFinite()) track_error(t, "non-finite feature value");
  if (!t.targets.allFinite()) track_error(t, "non-finite target value");
  if (!(t.frame_interval_min > 0) || !std::isfinite(t.frame_interval_min)) {
    track_error(t, "frame interval must be positive");
  }
  if (t.landmarks) {
    const auto& l = *t.landmarks;
    if (!(0 <= l.t_g1s && l.t_g1s < l.t_sg2 && l.t_sg2 < n)) {
      track_error(t, "landmarks (" + std::to_string(l.t_g1s) + ", " + std::to_string(l.t_sg2) +
                         ") violate 0 <= t_g1s < t_sg2 < N");
    }
  }
}

const Track& Dataset::find(const std::string& id) const {
  for (const auto& t : tracks) {
    if (t.id == id) return t;
  }
  throw std::out_of_range("no track with id '" + id + "'");
}

std::vector<const Track*> Dataset::tracks_in(Split s) const {
  std::vector<const Track*> out;
  for (const auto& t : tracks) {
    auto it = split.find(t.id);
    if (it != split.end() && it->second == s) out.push_back(&t);
  }
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.tracks == b.tracks && a.split == b.split && a.seed == b.seed &&
         a.generator_params == b.generator_params && a.normalization == b.normalization;
}

void validate(const Dataset& d) {
  std::set<std::string> ids;
  for (const auto& t : d.tracks) {
    validate(t);
    if (!ids.insert(t.id).second) throw std::invalid_argument("duplicate track id '" + t.id + "'");
  }
  for (const auto& [id, s] : d.split) {
    if (!ids.count(id)) throw std::invalid_argument("split references unknown track '" + id + "'");
  }
}

Index tau_to_index(double tau, Index n) {
  return static_cast<Index>(std::floor(tau * static_cast<double>(n - 1) + 0.5));
}

Track crop(const Track& track, double tau1, double tau2) {
  if (!(tau1 >= 0.0 && tau1 <= 1.0 && tau2 >= 0.0 && tau2 <= 1.0)) {
    throw std::invalid_argument("crop: tau values must lie in [0, 1]");
  }
  if (tau1 > tau2) {
    throw std::invalid_argument("crop: tau1 " + std::to_string(tau1) + " exceeds tau2 " +
                                std::to_string(tau2));
  }
  const Index n = track.n_frames();
  if (n < 1) track_error(track, "cannot crop an empty track");
  const Index first = tau_to_index(tau1, n);
  const Index last = tau_to_index(tau2, n);
  const Index len = last - first + 1;

  Track out;
  out.id = track.id;
  out.features = track.features.middleRows(first, len);
  out.targets = track.targets.middleRows(first, len);
  out.frame_interval_min = track.frame_interval_min;
  out.tags = track.tags;
  if (track.landmarks) {
    const auto& l = *track.landmarks;
    if (l.t_g1s >= first && l.t_sg2 <= last) {
      out.landmarks = Landmarks{l.t_g1s - first, l.t_sg2 - first};
    }
  }
  return out;
}

Dataset split_dataset(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed) {
  if (dataset.tracks.empty()) throw std::invalid_argument("split_dataset: empty dataset");
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("split_dataset: fractions must be nonnegative");
  }
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split_dataset: fractions must sum to 1");

  const std::size_t n = dataset.tracks.size();
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(n);
  for (const auto& t : dataset.tracks) keyed.emplace_back(id_hash(t.id, seed), t.id);
  std::sort(keyed.begin(), keyed.end());

  auto count_for = [n](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 0.5)); };
  std::size_t n_train = std::min(n, count_for(fractions[0]));
  std::size_t n_val = std::min(n - n_train, count_for(fractions[1]));

  Dataset out = dataset;
  out.split.clear();
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    out.split[keyed[i].second] = s;
  }
  return out;
}

}  // namespace cyclebench
