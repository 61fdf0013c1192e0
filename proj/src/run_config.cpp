#include "cyclebench/run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cyclebench {

const std::vector<ConfigKey>& config_schema() {
  using K = ValueKind;
  static const std::vector<ConfigKey> schema = {
      {"seed", K::integer, "0", "seed for generation, initialization, splitting and training"},
      {"workers", K::integer, "1", "threads for generation and evaluation"},
      {"data.preset", K::text, "regular", "synthetic preset: regular|drug|informative|drug-informative"},
      {"data.n_tracks", K::integer, "500", "number of generated tracks"},
      {"data.split_train", K::real, "0.8", "train fraction"},
      {"data.split_val", K::real, "0.1", "validation fraction"},
      {"data.split_test", K::real, "0.1", "test fraction"},
      {"data.percentile", K::real, "1", "noise-floor percentile used by preprocess"},
      {"model.head", K::text, "transformer", "single_frame_mlp|causal_cnn|lstm|ssm|transformer"},
      {"model.causal", K::boolean, "false", "causal attention mask (transformer only)"},
      {"model.encoder_dim", K::integer, "16", "per-frame embedding width"},
      {"model.head_layers", K::integer, "4", "sequence head depth"},
      {"model.head_hidden", K::integer, "0", "head width; 0 sizes the head to the shared parameter budget"},
      {"model.cnn_receptive_field", K::integer, "32", "target causal CNN receptive field in frames"},
      {"model.cnn_kernel", K::integer, "5", "causal CNN kernel width"},
      {"model.attention_heads", K::integer, "4", "attention heads per transformer layer"},
      {"model.rope_base", K::real, "10000", "rotary embedding base"},
      {"train.epochs", K::integer, "50", "training epochs"},
      {"train.lr", K::real, "0.001", "Adam learning rate"},
      {"train.batch_size", K::integer, "16", "subtracks per optimizer step"},
      {"train.subtrack_min", K::integer, "16", "shortest sampled subtrack"},
      {"train.subtrack_max", K::integer, "96", "longest sampled subtrack"},
      {"train.full_track_prob", K::real, "0.3", "probability of training on the whole track"},
      {"train.augment_noise_std", K::real, "0.05", "feature jitter std (whole-track part)"},
      {"train.beta1", K::real, "0.9", "Adam beta1"},
      {"train.beta2", K::real, "0.999", "Adam beta2"},
      {"train.adam_eps", K::real, "1e-08", "Adam epsilon"},
      {"eval.split", K::text, "test", "split to evaluate: train|val|test|all"},
      {"eval.grid_step", K::real, "0.05", "partial-track grid step"},
      {"eval.svg", K::boolean, "true", "write SVG figures"},
  };
  return schema;
}

namespace {

const ConfigKey& lookup(const std::string& key) {
  const auto& schema = config_schema();
  auto it = std::find_if(schema.begin(), schema.end(), [&](const ConfigKey& k) { return k.name == key; });
  if (it == schema.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return *it;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

void check_value(const ConfigKey& k, const std::string& v) {
  const auto bad = [&](const char* what) {
    throw std::invalid_argument("config key '" + k.name + "': '" + v + "' is not " + what);
  };
  switch (k.kind) {
    case ValueKind::integer: {
      errno = 0;
      char* end = nullptr;
      std::strtoll(v.c_str(), &end, 10);
      if (v.empty() || errno != 0 || end != v.c_str() + v.size()) bad("an integer");
      break;
    }
    case ValueKind::real: {
      char* end = nullptr;
      std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size()) bad("a number");
      break;
    }
    case ValueKind::boolean: {
      bool b = false;
      if (!parse_bool(v, b)) bad("a boolean");
      break;
    }
    case ValueKind::text:
      break;
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig rc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::map<std::string, int> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "model" && section != "train" && section != "eval") {
        throw std::invalid_argument(where + "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    const std::string key = (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    if (seen.count(key)) {
      throw std::invalid_argument(where + "duplicate key '" + key + "' (first set on line " +
                                  std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;
    try {
      rc.set(key, trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
  return rc;
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), file.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  check_value(lookup(key), value);
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& RunConfig::text(const std::string& key) const {
  lookup(key);
  return values_.at(key);
}

long long RunConfig::integer(const std::string& key) const { return std::strtoll(text(key).c_str(), nullptr, 10); }

double RunConfig::real(const std::string& key) const { return std::strtod(text(key).c_str(), nullptr); }

bool RunConfig::boolean(const std::string& key) const {
  bool b = false;
  parse_bool(text(key), b);
  return b;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& k : config_schema()) {
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << (dot == std::string::npos ? k.name : k.name.substr(dot + 1)) << " = " << values_.at(k.name) << '\n';
  }
  return os.str();
}

CycleParams cycle_params(const RunConfig& rc) { return preset(rc.text("data.preset")); }

ModelConfig model_config(const RunConfig& rc, int input_dim) {
  ModelConfig c;
  c.head = head_from_string(rc.text("model.head"));
  c.causal = rc.boolean("model.causal");
  c.input_dim = input_dim;
  c.encoder_dim = static_cast<int>(rc.integer("model.encoder_dim"));
  c.head_layers = static_cast<int>(rc.integer("model.head_layers"));
  c.head_hidden = static_cast<int>(rc.integer("model.head_hidden"));
  c.cnn_receptive_field = static_cast<int>(rc.integer("model.cnn_receptive_field"));
  c.cnn_kernel = static_cast<int>(rc.integer("model.cnn_kernel"));
  c.attention_heads = static_cast<int>(rc.integer("model.attention_heads"));
  c.rope_base = rc.real("model.rope_base");
  c.seed = static_cast<std::uint64_t>(rc.integer("seed"));
  c.validate();
  return c;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig c;
  c.epochs = static_cast<int>(rc.integer("train.epochs"));
  c.lr = rc.real("train.lr");
  c.batch_size = static_cast<int>(rc.integer("train.batch_size"));
  c.subtrack_min = static_cast<int>(rc.integer("train.subtrack_min"));
  c.subtrack_max = static_cast<int>(rc.integer("train.subtrack_max"));
  c.full_track_prob = rc.real("train.full_track_prob");
  c.augment_noise_std = rc.real("train.augment_noise_std");
  c.seed = static_cast<std::uint64_t>(rc.integer("seed"));
  c.beta1 = rc.real("train.beta1");
  c.beta2 = rc.real("train.beta2");
  c.adam_eps = rc.real("train.adam_eps");
  c.validate();
  return c;
}

std::array<double, 3> split_fractions(const RunConfig& rc) {
  return {rc.real("data.split_train"), rc.real("data.split_val"), rc.real("data.split_test")};
}

}  // namespace cyclebench
