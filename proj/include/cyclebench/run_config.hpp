#pragma once

// Sectioned key=value run configuration shared by every CLI command.
//
//   seed = 0
//   [train]
//   lr = 1e-3
//
// Keys live in a fixed schema; unknown sections or keys are errors. Command
// line overrides use the dotted form (`--train.lr 1e-4`).

#include "cyclebench/models.hpp"
#include "cyclebench/synth.hpp"
#include "cyclebench/train.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cyclebench {

enum class ValueKind { integer, real, boolean, text };

struct ConfigKey {
  std::string name;  // "section.key" or "key" for globals
  ValueKind kind;
  std::string default_value;
  std::string help;
};

const std::vector<ConfigKey>& config_schema();

class RunConfig {
 public:
  RunConfig();

  static RunConfig from_text(const std::string& text, const std::string& origin = "<config>");
  static RunConfig from_file(const std::filesystem::path& file);

  // Throws std::invalid_argument on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  const std::string& text(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;

  // Every key in schema order, grouped by section.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

CycleParams cycle_params(const RunConfig& rc);
ModelConfig model_config(const RunConfig& rc, int input_dim);
TrainConfig train_config(const RunConfig& rc);
std::array<double, 3> split_fractions(const RunConfig& rc);

}  // namespace cyclebench
