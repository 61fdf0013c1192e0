// cyclebench: generate synthetic tracks, train sequence models, evaluate them.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "cyclebench/dataset_io.hpp"
#include "cyclebench/eval.hpp"
#include "cyclebench/run_config.hpp"
#include "cyclebench/signal.hpp"
#include "cyclebench/synth.hpp"
#include "cyclebench/train.hpp"

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

namespace fs = std::filesystem;
using namespace cyclebench;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::string out;
};

void add_config_options(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_file, "Run configuration file (sectioned key = value)");
  for (const auto& key : config_schema()) {
    auto* opt = cmd->add_option_function<std::string>(
        "--" + key.name, [&common, name = key.name](const std::string& v) { common.overrides[name] = v; },
        key.help + " [default: " + key.default_value + "]");
    opt->type_name(key.kind == ValueKind::text ? "TEXT" : key.kind == ValueKind::boolean ? "BOOL" : "NUMBER");
  }
}

// Shortcut flag mapped onto a config key.
void add_alias(CLI::App* cmd, Common& common, const std::string& flag, const std::string& key) {
  const ConfigKey* spec = nullptr;
  for (const auto& k : config_schema()) {
    if (k.name == key) spec = &k;
  }
  cmd->add_option_function<std::string>(
      flag, [&common, key](const std::string& v) { common.overrides[key] = v; },
      "Same as --" + key + (spec ? " (" + spec->help + ")" : ""));
}

RunConfig resolve(const Common& common) {
  RunConfig rc = common.config_file.empty() ? RunConfig() : RunConfig::from_file(common.config_file);
  for (const auto& [k, v] : common.overrides) rc.set(k, v);
  return rc;
}

void write_config_echo(const RunConfig& rc, const fs::path& dir, const std::string& command) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.txt");
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  out << "# written " << stamp << '\n';
  out << "# command: " << command << '\n';
  out << rc.to_text();
  if (!out) throw std::runtime_error("cannot write resolved config in " + dir.string());
}

Dataset require_dataset(const std::string& path) {
  if (path.empty() || !fs::exists(fs::path(path) / kManifestName)) {
    throw UsageError("dataset not found: '" + path + "' (expected a directory containing " + kManifestName + ")");
  }
  return load_dataset(path);
}

std::optional<Split> eval_split(const RunConfig& rc) {
  const auto& s = rc.text("eval.split");
  if (s == "all") return std::nullopt;
  return split_from_string(s);
}

// Models must stay alive while predictors reference them.
struct LoadedModels {
  std::vector<std::unique_ptr<SequenceModel>> models;
  std::vector<Predictor> predictors;
};

LoadedModels load_predictors(const std::vector<std::string>& checkpoints, bool oracle, const Dataset& ds) {
  if (checkpoints.empty() && !oracle) throw UsageError("give at least one --checkpoint (or --oracle)");
  LoadedModels out;
  const int dim = ds.tracks.empty() ? 0 : static_cast<int>(ds.tracks.front().feature_dim());
  for (const auto& path : checkpoints) {
    if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
    out.models.push_back(std::make_unique<SequenceModel>(load_checkpoint(path, dim)));
    out.predictors.push_back(model_predictor(*out.models.back()));
  }
  if (oracle) out.predictors.push_back(oracle_predictor());
  return out;
}

nlohmann::json config_json(const RunConfig& rc, const std::string& command) {
  return {{"command", command}, {"config", rc.to_text()}};
}

int cmd_gen(const Common& common) {
  RunConfig rc = resolve(common);
  const auto seed = static_cast<std::uint64_t>(rc.integer("seed"));
  CycleParams params = cycle_params(rc);
  const auto n = rc.integer("data.n_tracks");
  if (n < 1) throw UsageError("data.n_tracks must be >= 1");
  Dataset ds = gen_dataset(params, static_cast<std::size_t>(n), seed);
  ds = split_dataset(ds, split_fractions(rc), seed);
  save_dataset(ds, common.out);
  write_config_echo(rc, common.out, "gen");
  double frames = 0.0;
  for (const auto& t : ds.tracks) frames += static_cast<double>(t.n_frames());
  std::cout << "generated " << ds.tracks.size() << " tracks (" << params.condition << ", "
            << to_string(params.modality) << "), mean length " << frames / static_cast<double>(ds.tracks.size())
            << " frames -> " << common.out << '\n';
  return 0;
}

int cmd_preprocess(const Common& common, const std::string& input) {
  RunConfig rc = resolve(common);
  Dataset ds = require_dataset(input);
  NormalizationParams np;
  np.percentile = rc.real("data.percentile");
  std::vector<double> c1;
  std::vector<double> c2;
  for (const auto& t : ds.tracks) {
    for (Index i = 0; i < t.n_frames(); ++i) {
      c1.push_back(t.targets(i, 0));
      c2.push_back(t.targets(i, 1));
    }
  }
  np.epsilon = compute_epsilon(c1, c2, np.percentile);
  np.validate();
  for (auto& t : ds.tracks) {
    for (Index i = 0; i < t.n_frames(); ++i) {
      for (Index c = 0; c < 2; ++c) t.targets(i, c) = normalize_fucci(t.targets(i, c), np.epsilon[static_cast<std::size_t>(c)]);
    }
    storage_round(t.targets);
  }
  ds.normalization = to_json(np);
  save_dataset(ds, common.out);
  write_config_echo(rc, common.out, "preprocess");
  std::cout << "normalized " << ds.tracks.size() << " tracks, epsilon = (" << np.epsilon[0] << ", " << np.epsilon[1]
            << ") -> " << common.out << '\n';
  return 0;
}

int cmd_train(const Common& common, const std::string& data) {
  RunConfig rc = resolve(common);
  Dataset ds = require_dataset(data);
  if (ds.tracks.empty()) throw UsageError("dataset is empty");
  const int dim = static_cast<int>(ds.tracks.front().feature_dim());
  ModelConfig mc = model_config(rc, dim);
  TrainConfig tc = train_config(rc);
  for (const auto& [head, count] : parity_table(mc)) {
    std::cout << "parity " << to_string(head) << " head parameters " << count << '\n';
  }
  SequenceModel model = SequenceModel::build(mc);
  std::cout << "model " << model.name() << ": " << model.param_count() << " parameters (" << model.head_param_count()
            << " in the head)\n";
  fs::create_directories(common.out);
  write_config_echo(rc, common.out, "train");
  auto result = train(model, ds, tc, [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " train_l1 " << r.train_l1 << " val_l1 " << r.val_l1 << '\n';
  });
  save_checkpoint(model, fs::path(common.out) / "model.ckpt");
  write_history_csv(fs::path(common.out) / "history.csv", result.history);
  std::cout << "best epoch " << result.best_epoch << " val_l1 " << result.best_val_l1 << " -> " << common.out
            << "/model.ckpt\n";
  return 0;
}

int cmd_eval(const Common& common, const std::string& data, const std::vector<std::string>& checkpoints,
             bool oracle, bool with_table, const std::string& command) {
  RunConfig rc = resolve(common);
  Dataset ds = require_dataset(data);
  auto loaded = load_predictors(checkpoints, oracle, ds);
  EvalOptions opt;
  opt.workers = static_cast<int>(rc.integer("workers"));
  EvalReport report = evaluate_full(loaded.predictors, ds, eval_split(rc), opt);
  if (!ds.tracks.empty() && ds.tracks.front().tags.count("condition")) {
    report.condition = ds.tracks.front().tags.at("condition");
  }
  report.config_echo = config_json(rc, command);
  EmitFormats formats;
  formats.svg = rc.boolean("eval.svg");
  emit_report(report, common.out, formats);
  write_config_echo(rc, common.out, command);
  if (with_table) {
    std::cout << checkpoint_table(report);
  } else {
    for (const auto& a : report.aggregates) {
      const auto& d = a.stats.at("dtw");
      std::cout << a.model << ": DTW " << d.mean << " +- " << d.std << ", L1 " << a.stats.at("l1_fucci1").mean
                << " / " << a.stats.at("l1_fucci2").mean << " over " << d.count << " tracks\n";
    }
  }
  return 0;
}

int cmd_partial(const Common& common, const std::string& data, const std::vector<std::string>& checkpoints,
                bool oracle) {
  RunConfig rc = resolve(common);
  Dataset ds = require_dataset(data);
  auto loaded = load_predictors(checkpoints, oracle, ds);
  const double step = rc.real("eval.grid_step");
  grid_cells(step);
  auto tracks = select_tracks(ds, eval_split(rc));
  if (tracks.empty()) throw UsageError("evaluation split is empty");
  EvalReport report;
  report.config_echo = config_json(rc, "partial");
  for (const auto& p : loaded.predictors) {
    report.partial_maps.push_back(partial_track_map(p, tracks, step, static_cast<int>(rc.integer("workers"))));
    const auto& m = report.partial_maps.back();
    std::cout << p.name << ": " << m.taus.size() << "x" << m.taus.size() << " grid, " << m.valid_cells()
              << " cells, full-track last-frame L1 " << m.at(0.0, 1.0) << '\n';
  }
  EmitFormats formats;
  formats.svg = rc.boolean("eval.svg");
  emit_report(report, common.out, formats);
  write_config_echo(rc, common.out, "partial");
  return 0;
}

int cmd_report(const Common& common, const std::vector<std::string>& inputs) {
  RunConfig rc = resolve(common);
  if (inputs.empty()) throw UsageError("give at least one --input run directory or metrics.csv");
  EvalReport merged;
  for (const auto& in : inputs) {
    fs::path file = fs::is_directory(in) ? fs::path(in) / "metrics.csv" : fs::path(in);
    if (!fs::exists(file)) throw UsageError("no metrics file at " + file.string());
    EvalReport r = read_report_csv(file);
    for (auto& row : r.per_track) merged.per_track.push_back(std::move(row));
  }
  merged.aggregates = aggregate_rows(merged.per_track);
  merged.config_echo = config_json(rc, "report");
  EmitFormats formats;
  formats.svg = rc.boolean("eval.svg");
  emit_report(merged, common.out, formats);
  write_config_echo(rc, common.out, "report");
  std::cout << checkpoint_table(merged);
  for (const auto& a : merged.aggregates) {
    const auto& d = a.stats.at("dtw");
    std::cout << a.model << ": DTW " << d.mean << " +- " << d.std << " (" << d.count << " tracks)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large activation buffers in the heap instead of a fresh mmap per op.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"cyclebench: cell-cycle phase regression from single-cell tracks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  std::string data;
  std::string input;
  std::vector<std::string> checkpoints;
  std::vector<std::string> inputs;
  bool oracle = false;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--out", common.out, "Output dataset directory")->required();
  add_alias(gen, common, "--preset", "data.preset");
  add_alias(gen, common, "--n-tracks", "data.n_tracks");

  auto* pre = app.add_subcommand("preprocess", "Normalize raw reporter intensities of a dataset");
  pre->add_option("--input", input, "Dataset directory with raw intensities in the fucci columns")->required();
  pre->add_option("--out", common.out, "Output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "Train one model");
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--out", common.out, "Run directory for model.ckpt and history.csv")->required();
  add_alias(tr, common, "--head", "model.head");
  add_alias(tr, common, "--epochs", "train.epochs");

  auto add_eval_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset directory")->required();
    cmd->add_option("--checkpoint", checkpoints, "Model checkpoint (repeatable)");
    cmd->add_flag("--oracle", oracle, "Also evaluate the oracle that returns the ground truth");
    cmd->add_option("--out", common.out, "Report directory")->required();
  };
  auto* ev = app.add_subcommand("eval", "Full-track evaluation");
  add_eval_inputs(ev);
  auto* part = app.add_subcommand("partial", "Partial-track (tau1, tau2) error map");
  add_eval_inputs(part);
  add_alias(part, common, "--grid-step", "eval.grid_step");
  auto* chk = app.add_subcommand("checkpoints", "Checkpoint timing and phase F1 table");
  add_eval_inputs(chk);
  auto* rep = app.add_subcommand("report", "Merge metrics.csv files and recompute aggregates");
  rep->add_option("--input", inputs, "Run directory or metrics.csv (repeatable)")->required();
  rep->add_option("--out", common.out, "Output directory")->required();

  for (auto* cmd : {gen, pre, tr, ev, part, chk, rep}) add_config_options(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(common);
    if (*pre) return cmd_preprocess(common, input);
    if (*tr) return cmd_train(common, data);
    if (*ev) return cmd_eval(common, data, checkpoints, oracle, false, "eval");
    if (*chk) return cmd_eval(common, data, checkpoints, oracle, true, "checkpoints");
    if (*part) return cmd_partial(common, data, checkpoints, oracle);
    if (*rep) return cmd_report(common, inputs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
