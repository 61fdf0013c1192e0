#include "cyclebench/train.hpp"

#include "cyclebench/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace cyclebench {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("train.lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (subtrack_min < 2) throw std::invalid_argument("train.subtrack_min must be >= 2");
  if (subtrack_max < subtrack_min) throw std::invalid_argument("train.subtrack_max must be >= subtrack_min");
  if (!(full_track_prob >= 0.0 && full_track_prob <= 1.0)) {
    throw std::invalid_argument("train.full_track_prob must lie in [0, 1]");
  }
  if (!(augment_noise_std >= 0.0)) throw std::invalid_argument("train.augment_noise_std must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train.adam_eps must be > 0");
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"subtrack_min", c.subtrack_min},
          {"subtrack_max", c.subtrack_max},
          {"full_track_prob", c.full_track_prob},
          {"augment_noise_std", c.augment_noise_std},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.subtrack_min = j.at("subtrack_min").get<int>();
  c.subtrack_max = j.at("subtrack_max").get<int>();
  c.full_track_prob = j.at("full_track_prob").get<double>();
  c.augment_noise_std = j.at("augment_noise_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  return c;
}

Track sample_subtrack(const Track& track, Rng& rng, const TrainConfig& config) {
  const Index n = track.n_frames();
  if (n < config.subtrack_min) {
    throw std::invalid_argument("track '" + track.id + "' has " + std::to_string(n) +
                                " frames, shorter than subtrack_min " + std::to_string(config.subtrack_min));
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < config.full_track_prob) return track;
  const Index hi = std::min<Index>(config.subtrack_max, n);
  const Index len = std::uniform_int_distribution<Index>(config.subtrack_min, hi)(rng);
  const Index start = std::uniform_int_distribution<Index>(0, n - len)(rng);

  Track out;
  out.id = track.id;
  out.features = track.features.middleRows(start, len);
  out.targets = track.targets.middleRows(start, len);
  out.frame_interval_min = track.frame_interval_min;
  out.tags = track.tags;
  if (track.landmarks && track.landmarks->t_g1s >= start && track.landmarks->t_sg2 < start + len) {
    out.landmarks = Landmarks{track.landmarks->t_g1s - start, track.landmarks->t_sg2 - start};
  }
  return out;
}

Matrix augment(const Matrix& x, Rng& rng, const TrainConfig& config) {
  const double s = config.augment_noise_std;
  if (s == 0.0) return x;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::RowVectorXd shared(x.cols());
  for (Index j = 0; j < x.cols(); ++j) shared(j) = s * normal(rng);
  Matrix out = x.rowwise() + shared;
  for (Index i = 0; i < out.size(); ++i) out.data()[i] += 0.25 * s * normal(rng);
  return out;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Matrix g = params_[i].grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix& w = params_[i].mutable_value();
    w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Tensor l1_loss(const Tensor& yhat, const Matrix& y) { return mean(abs(sub(yhat, Tensor::constant(y)))); }

TrainingDiverged::TrainingDiverged(int epoch, const std::string& what)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

double mean_track_l1(const SequenceModel& model, const std::vector<const Track*>& tracks) {
  if (tracks.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const Track* t : tracks) total += (model.predict(t->features) - t->targets).cwiseAbs().mean();
  return total / static_cast<double>(tracks.size());
}

TrainResult train(SequenceModel& model, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto train_tracks = dataset.tracks_in(Split::train);
  const auto val_tracks = dataset.tracks_in(Split::val);
  if (train_tracks.empty()) throw std::invalid_argument("train: dataset has no train split");
  for (const Track* t : train_tracks) {
    if (t->feature_dim() != model.config().input_dim) {
      throw std::invalid_argument("train: model expects D=" + std::to_string(model.config().input_dim) +
                                  " but track '" + t->id + "' has D=" + std::to_string(t->feature_dim()));
    }
  }

  Rng rng(config.seed);
  Adam opt(model.parameters(), config.lr, config.beta1, config.beta2, config.adam_eps);
  TrainResult result;
  result.best_val_l1 = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_weights = model.weights();

  std::vector<std::size_t> order(train_tracks.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double weight = 1.0 / static_cast<double>(stop - start);
      opt.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        Track sub = sample_subtrack(*train_tracks[order[b]], rng, config);
        Matrix x = augment(sub.features, rng, config);
        Tensor loss = l1_loss(model.forward(Tensor::constant(x)), sub.targets);
        const double value = loss.item();
        if (!std::isfinite(value)) throw TrainingDiverged(epoch, "non-finite loss on track '" + sub.id + "'");
        scale(loss, weight).backward();
        loss_sum += value;
        ++loss_count;
      }
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_l1 = loss_sum / static_cast<double>(loss_count);
    rec.val_l1 = mean_track_l1(model, val_tracks);
    if (!val_tracks.empty() && !std::isfinite(rec.val_l1)) throw TrainingDiverged(epoch, "non-finite validation L1");
    result.history.push_back(rec);
    if (val_tracks.empty() || rec.val_l1 < result.best_val_l1) {
      result.best_val_l1 = rec.val_l1;
      result.best_epoch = epoch;
      best_weights = model.weights();
    }
    if (on_epoch) on_epoch(rec);
  }
  model.set_weights(best_weights);
  return result;
}

void write_history_csv(const std::filesystem::path& file, const std::vector<EpochRecord>& history) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "epoch,train_l1,val_l1\n";
  char buf[64];
  for (const auto& r : history) {
    out << r.epoch;
    std::snprintf(buf, sizeof buf, ",%.17g", r.train_l1);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", r.val_l1);
    out << buf << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + file.string());
}

namespace {

constexpr const char* kCheckpointMagic = "cyclebench-checkpoint";

[[noreturn]] void corrupt(const std::filesystem::path& file, const std::string& what) {
  throw std::runtime_error("corrupt checkpoint " + file.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const SequenceModel& model, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write checkpoint " + file.string());
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << to_json(model.config()).dump() << '\n';
  const auto& params = model.named_parameters();
  out << params.size() << '\n';
  char buf[40];
  for (const auto& p : params) {
    const Matrix& v = p.tensor.value();
    out << p.name << ' ' << v.rows() << ' ' << v.cols() << '\n';
    for (Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", v.data()[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing checkpoint " + file.string());
}

SequenceModel load_checkpoint(const std::filesystem::path& file, std::optional<int> expected_input_dim) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open checkpoint " + file.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic) corrupt(file, "missing header");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + file.string() + " has version " + std::to_string(version) +
                             ", expected " + std::to_string(kCheckpointVersion));
  }
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  ModelConfig config;
  try {
    config = model_config_from_json(json::parse(line));
  } catch (const std::exception& e) {
    corrupt(file, std::string("bad config line: ") + e.what());
  }
  if (expected_input_dim && *expected_input_dim != config.input_dim) {
    throw std::invalid_argument("checkpoint " + file.string() + " expects D=" + std::to_string(config.input_dim) +
                                " features but the data has D=" + std::to_string(*expected_input_dim));
  }
  SequenceModel model = SequenceModel::build(config);
  std::size_t count = 0;
  if (!(in >> count)) corrupt(file, "missing parameter count");
  auto& params = model.named_parameters();
  if (count != params.size()) {
    corrupt(file, "has " + std::to_string(count) + " tensors, model has " + std::to_string(params.size()));
  }
  std::string token;
  for (auto& p : params) {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    if (!(in >> name >> rows >> cols)) corrupt(file, "truncated before " + p.name);
    Matrix& v = p.tensor.mutable_value();
    if (name != p.name || rows != v.rows() || cols != v.cols()) {
      corrupt(file, "tensor '" + name + "' does not match model tensor '" + p.name + "'");
    }
    for (Index i = 0; i < v.size(); ++i) {
      if (!(in >> token)) corrupt(file, "truncated in " + name);
      char* end = nullptr;
      v.data()[i] = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) corrupt(file, "bad number '" + token + "' in " + name);
    }
  }
  if (in >> token) corrupt(file, "trailing data");
  return model;
}

}  // namespace cyclebench
