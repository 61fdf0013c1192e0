#include "cyclebench/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace cyclebench {

Predictor model_predictor(const SequenceModel& model) {
  const SequenceModel* m = &model;
  return {model.name(), [m](const Track& t) { return m->predict(t.features); }, model.is_causal()};
}

Predictor oracle_predictor() {
  return {"oracle", [](const Track& t) { return t.targets; }, true};
}

Predictor track_mean_predictor() {
  return {"track_mean",
          [](const Track& t) -> Matrix {
            Eigen::RowVectorXd mu = t.targets.colwise().mean();
            return mu.replicate(t.n_frames(), 1);
          },
          false};
}

double PartialMap::at(double tau1, double tau2) const {
  auto index = [this](double tau) {
    for (std::size_t i = 0; i < taus.size(); ++i) {
      if (std::abs(taus[i] - tau) < 1e-9) return static_cast<Index>(i);
    }
    throw std::out_of_range("tau " + std::to_string(tau) + " is not on the grid");
  };
  return values(index(tau1), index(tau2));
}

long long PartialMap::valid_cells() const {
  long long n = 0;
  for (Index i = 0; i < values.size(); ++i) n += std::isfinite(values.data()[i]) ? 1 : 0;
  return n;
}

const ModelAggregate& EvalReport::aggregate(const std::string& model) const {
  for (const auto& a : aggregates) {
    if (a.model == model) return a;
  }
  throw std::out_of_range("report has no model '" + model + "'");
}

const std::vector<std::string>& track_metric_names() {
  static const std::vector<std::string> names = {
      "l1_fucci1", "l1_fucci2", "r2",     "dtw",   "t_g1s_pred", "t_sg2_pred", "t_g1s_true", "t_sg2_true",
      "dt_g1s_min", "dt_sg2_min", "f1_g1", "f1_s",  "f1_g2",      "tp_g1",      "tp_s",       "tp_g2",
      "fp_g1",     "fp_s",      "fp_g2",  "fn_g1", "fn_s",       "fn_g2"};
  return names;
}

std::map<std::string, double> track_metric_values(const TrackMetrics& m) {
  std::map<std::string, double> v;
  v["l1_fucci1"] = m.l1_fucci1;
  v["l1_fucci2"] = m.l1_fucci2;
  if (m.r2) v["r2"] = *m.r2;
  v["dtw"] = m.dtw;
  auto put_index = [&v](const char* k, const std::optional<Index>& x) {
    if (x) v[k] = static_cast<double>(*x);
  };
  put_index("t_g1s_pred", m.t_g1s_pred);
  put_index("t_sg2_pred", m.t_sg2_pred);
  put_index("t_g1s_true", m.t_g1s_true);
  put_index("t_sg2_true", m.t_sg2_true);
  if (m.dt_g1s_min) v["dt_g1s_min"] = *m.dt_g1s_min;
  if (m.dt_sg2_min) v["dt_sg2_min"] = *m.dt_sg2_min;
  static const char* cls[] = {"g1", "s", "g2"};
  for (std::size_t k = 0; k < 3; ++k) {
    v[std::string("f1_") + cls[k]] = m.phase_f1[k];
    v[std::string("tp_") + cls[k]] = static_cast<double>(m.counts.tp[k]);
    v[std::string("fp_") + cls[k]] = static_cast<double>(m.counts.fp[k]);
    v[std::string("fn_") + cls[k]] = static_cast<double>(m.counts.fn[k]);
  }
  return v;
}

namespace {

const std::vector<std::string> kAggregated = {"l1_fucci1", "l1_fucci2", "r2",    "dtw",  "dt_g1s_min",
                                              "dt_sg2_min", "f1_g1",     "f1_s", "f1_g2"};

AggregateStat summarize(const std::vector<double>& xs) {
  AggregateStat s;
  s.count = static_cast<long long>(xs.size());
  if (xs.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double total = 0.0;
  for (double x : xs) total += x;
  s.mean = total / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace

std::vector<ModelAggregate> aggregate_rows(const std::vector<TrackRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TrackRow*>> by_model;
  for (const auto& r : rows) {
    if (!by_model.count(r.model)) order.push_back(r.model);
    by_model[r.model].push_back(&r);
  }
  std::vector<ModelAggregate> out;
  for (const auto& name : order) {
    ModelAggregate agg;
    agg.model = name;
    std::map<std::string, std::vector<double>> values;
    PhaseCounts pooled;
    for (const TrackRow* r : by_model[name]) {
      auto v = track_metric_values(r->metrics);
      for (const auto& k : kAggregated) {
        auto it = v.find(k);
        if (it != v.end()) values[k].push_back(it->second);
      }
      if (!r->metrics.dt_g1s_min) ++agg.g1s_failures;
      if (!r->metrics.dt_sg2_min) ++agg.sg2_failures;
      pooled += r->metrics.counts;
    }
    for (const auto& k : kAggregated) agg.stats[k] = summarize(values[k]);
    agg.pooled_f1 = pooled.f1();
    out.push_back(std::move(agg));
  }
  return out;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < std::min(threads, n); ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<const Track*> select_tracks(const Dataset& dataset, std::optional<Split> split) {
  std::vector<const Track*> out;
  if (split) {
    out = dataset.tracks_in(*split);
  } else {
    for (const auto& t : dataset.tracks) out.push_back(&t);
  }
  return out;
}

EvalReport evaluate_full(const std::vector<Predictor>& predictors, const std::vector<const Track*>& tracks,
                         const EvalOptions& options) {
  if (tracks.empty()) throw std::invalid_argument("evaluate_full: no tracks to evaluate");
  EvalReport report;
  for (const auto& p : predictors) {
    std::vector<TrackMetrics> metrics(tracks.size());
    std::vector<Matrix> preds(tracks.size());
    parallel_for(tracks.size(), options.workers, [&](std::size_t i) {
      const Track& t = *tracks[i];
      preds[i] = p.predict(t);
      if (preds[i].rows() != t.n_frames() || preds[i].cols() != 2) {
        throw std::runtime_error(p.name + ": prediction for track '" + t.id + "' has the wrong shape");
      }
      metrics[i] = track_metrics(preds[i], t.targets, t.frame_interval_min);
    });
    std::size_t best = 0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      report.per_track.push_back({p.name, tracks[i]->id, metrics[i]});
      if (metrics[i].dtw < metrics[best].dtw) best = i;
      if (metrics[i].dtw > metrics[worst].dtw) worst = i;
    }
    if (options.keep_exemplars) {
      report.exemplars.push_back({p.name, tracks[best]->id, "best", metrics[best].dtw,
                                   tracks[best]->frame_interval_min, preds[best], tracks[best]->targets});
      report.exemplars.push_back(
          {p.name, tracks[worst]->id, "worst", metrics[worst].dtw, tracks[worst]->frame_interval_min, preds[worst], tracks[worst]->targets});
    }
  }
  report.aggregates = aggregate_rows(report.per_track);
  return report;
}

EvalReport evaluate_full(const std::vector<Predictor>& predictors, const Dataset& dataset,
                         std::optional<Split> split, const EvalOptions& options) {
  auto tracks = select_tracks(dataset, split);
  if (tracks.empty()) {
    throw std::invalid_argument("evaluate_full: split '" + (split ? to_string(*split) : std::string("all")) +
                                "' is empty");
  }
  return evaluate_full(predictors, tracks, options);
}

EvalReport ood_eval(const std::vector<Predictor>& predictors, const Dataset& drug_dataset,
                    std::optional<Split> split, const EvalOptions& options) {
  EvalReport r = evaluate_full(predictors, drug_dataset, split, options);
  r.condition = "drug";
  return r;
}

int grid_cells(double grid_step) {
  if (!(grid_step > 0.0) || !std::isfinite(grid_step)) throw std::invalid_argument("grid_step must be positive");
  const double cells = 1.0 / grid_step;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-6 * rounded) {
    throw std::invalid_argument("grid_step " + format_real(grid_step) + " does not divide 1 evenly");
  }
  if (rounded < 4) throw std::invalid_argument("grid_step must divide 1 into at least 4 cells");
  return static_cast<int>(rounded);
}

PartialMap partial_track_map(const Predictor& predictor, const std::vector<const Track*>& tracks, double grid_step,
                             int workers) {
  const int cells = grid_cells(grid_step);
  const auto g = static_cast<Index>(cells + 1);
  PartialMap map;
  map.model = predictor.name;
  map.grid_step = grid_step;
  map.tracks = static_cast<long long>(tracks.size());
  for (int i = 0; i <= cells; ++i) map.taus.push_back(static_cast<double>(i) / cells);
  map.values = Matrix::Constant(g, g, std::numeric_limits<double>::quiet_NaN());
  if (tracks.empty()) return map;

  std::vector<Matrix> errors(tracks.size());
  parallel_for(tracks.size(), workers, [&](std::size_t k) {
    const Track& t = *tracks[k];
    const Index n = t.n_frames();
    Matrix err = Matrix::Zero(g, g);
    for (Index i = 0; i < g; ++i) {
      const Index first = tau_to_index(map.taus[static_cast<std::size_t>(i)], n);
      Matrix prefix;
      if (predictor.causal) prefix = predictor.predict(crop(t, map.taus[static_cast<std::size_t>(i)], 1.0));
      for (Index j = i; j < g; ++j) {
        const double tau2 = map.taus[static_cast<std::size_t>(j)];
        const Index last = tau_to_index(tau2, n);
        Eigen::RowVectorXd yhat;
        if (predictor.causal) {
          yhat = prefix.row(last - first);
        } else {
          Matrix out = predictor.predict(crop(t, map.taus[static_cast<std::size_t>(i)], tau2));
          yhat = out.row(out.rows() - 1);
        }
        err(i, j) = (yhat - t.targets.row(last)).cwiseAbs().mean();
      }
    }
    errors[k] = std::move(err);
  });

  Matrix total = Matrix::Zero(g, g);
  for (const auto& e : errors) total += e;
  total /= static_cast<double>(tracks.size());
  for (Index i = 0; i < g; ++i) {
    for (Index j = i; j < g; ++j) map.values(i, j) = total(i, j);
  }
  return map;
}

}  // namespace cyclebench
