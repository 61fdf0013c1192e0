#pragma once

// Experiment drivers: full-track evaluation, partial-track error maps,
// out-of-distribution evaluation, and report emission.

#include "cyclebench/metrics.hpp"
#include "cyclebench/models.hpp"
#include "cyclebench/track.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cyclebench {

struct Predictor {
  std::string name;
  std::function<Matrix(const Track&)> predict;
  // Output at frame t depends on frames <= t only.
  bool causal = false;
};

// The model must outlive the predictor.
Predictor model_predictor(const SequenceModel& model);
// Returns the ground-truth targets.
Predictor oracle_predictor();
// Predicts each track's own per-channel target mean at every frame.
Predictor track_mean_predictor();

struct TrackRow {
  std::string model;
  std::string track;
  TrackMetrics metrics;
};

struct AggregateStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
  long long count = 0;
};

struct ModelAggregate {
  std::string model;
  std::map<std::string, AggregateStat> stats;
  long long g1s_failures = 0;
  long long sg2_failures = 0;
  std::array<double, 3> pooled_f1{1.0, 1.0, 1.0};
};

struct PartialMap {
  std::string model;
  double grid_step = 0.05;
  std::vector<double> taus;
  Matrix values;  // [i, j] holds (taus[i], taus[j]); NaN where tau1 > tau2
  long long tracks = 0;

  double at(double tau1, double tau2) const;
  long long valid_cells() const;
};

struct Exemplar {
  std::string model;
  std::string track;
  std::string label;  // "best" or "worst" by DTW
  double dtw = 0.0;
  double frame_interval_min = 5.0;
  Matrix yhat;
  Matrix y;
};

struct EvalReport {
  std::string condition = "regular";
  std::vector<TrackRow> per_track;
  std::vector<ModelAggregate> aggregates;
  std::vector<PartialMap> partial_maps;
  std::vector<Exemplar> exemplars;
  nlohmann::json config_echo;

  const ModelAggregate& aggregate(const std::string& model) const;
};

// Metric names carried by per-track rows, in emission order.
const std::vector<std::string>& track_metric_names();
// Name -> value for the metrics present on a row (absent optionals omitted).
std::map<std::string, double> track_metric_values(const TrackMetrics& m);

std::vector<ModelAggregate> aggregate_rows(const std::vector<TrackRow>& rows);

struct EvalOptions {
  int workers = 1;
  bool keep_exemplars = true;
};

// Tracks of `split`, or every track when no split is given.
std::vector<const Track*> select_tracks(const Dataset& dataset, std::optional<Split> split);

EvalReport evaluate_full(const std::vector<Predictor>& predictors, const std::vector<const Track*>& tracks,
                         const EvalOptions& options = {});
EvalReport evaluate_full(const std::vector<Predictor>& predictors, const Dataset& dataset,
                         std::optional<Split> split, const EvalOptions& options = {});

// Same pipeline as evaluate_full, tagged condition=drug.
EvalReport ood_eval(const std::vector<Predictor>& predictors, const Dataset& drug_dataset,
                    std::optional<Split> split = {}, const EvalOptions& options = {});

// Grid cell count per axis, validating that grid_step divides 1 into >= 4 cells.
int grid_cells(double grid_step);

// Mean (over tracks and channels) absolute error at the last frame of every
// crop (tau1, tau2), tau1 <= tau2.
PartialMap partial_track_map(const Predictor& predictor, const std::vector<const Track*>& tracks,
                             double grid_step = 0.05, int workers = 1);

// Evaluates `fn(i)` for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct EmitFormats {
  bool csv = true;
  bool svg = true;
};

// Writes metrics.csv, partial.csv (when maps exist), report.json, and SVG
// figures. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir,
                                               EmitFormats formats = {});

// Reads metrics.csv back: per-track rows and aggregate rows.
EvalReport read_report_csv(const std::filesystem::path& file);

// Checkpoint timing table: model, dt_G1S_min, dt_SG2_min, F1_G1, F1_S, F1_G2.
std::string checkpoint_table(const EvalReport& report);

std::string format_real(double v);

}  // namespace cyclebench
