#pragma once

// Subtrack sampling, feature jitter, Adam, the L1 training loop, and model
// checkpoints.

#include "cyclebench/models.hpp"
#include "cyclebench/synth.hpp"
#include "cyclebench/track.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cyclebench {

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-4;
  int batch_size = 16;
  int subtrack_min = 16;
  int subtrack_max = 96;
  double full_track_prob = 0.3;
  double augment_noise_std = 0.05;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

Track sample_subtrack(const Track& track, Rng& rng, const TrainConfig& config);
Matrix augment(const Matrix& x, Rng& rng, const TrainConfig& config);

class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  // Applies one update from the gradients currently stored on the parameters.
  void step();
  void zero_grad();
  long long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

// Mean absolute error over frames and channels.
Tensor l1_loss(const Tensor& yhat, const Matrix& y);

struct EpochRecord {
  int epoch = 0;
  double train_l1 = 0.0;
  double val_l1 = 0.0;  // NaN without a validation split
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_l1 = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what);
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Mean full-track L1 of the model over the given tracks.
double mean_track_l1(const SequenceModel& model, const std::vector<const Track*>& tracks);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains on the train split and leaves the best-validation weights in `model`.
TrainResult train(SequenceModel& model, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void write_history_csv(const std::filesystem::path& file, const std::vector<EpochRecord>& history);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const SequenceModel& model, const std::filesystem::path& file);
// `expected_input_dim` (when set) must match the stored model input width.
SequenceModel load_checkpoint(const std::filesystem::path& file, std::optional<int> expected_input_dim = {});

}  // namespace cyclebench
