#include "cyclebench/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace cyclebench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_decimal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double storage_round(double v) { return std::strtod(format_decimal(v).c_str(), nullptr); }

void storage_round(Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = storage_round(m.data()[i]);
}

namespace {

void check_id(const std::string& id) {
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (!std::regex_match(id, ok) || id == "." || id == "..") {
    throw std::invalid_argument("track id '" + id + "' is not a portable file name");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string header_for(Index dim) {
  std::string h = "frame";
  for (Index j = 0; j < dim; ++j) h += ",f_" + std::to_string(j);
  h += ",fucci1,fucci2";
  return h;
}

}  // namespace

void write_track_csv(const fs::path& file, const Track& t) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << header_for(t.feature_dim()) << '\n';
  for (Index r = 0; r < t.n_frames(); ++r) {
    os << r;
    for (Index j = 0; j < t.feature_dim(); ++j) os << ',' << format_decimal(t.features(r, j));
    os << ',' << format_decimal(t.targets(r, 0)) << ',' << format_decimal(t.targets(r, 1)) << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

void read_track_csv(const fs::path& file, Track& t, Index expected_dim, Index expected_rows) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("track '" + t.id + "': missing file " + file.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("track '" + t.id + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  const Index dim = expected_dim >= 0 ? expected_dim : static_cast<Index>(header.size()) - 3;
  if (dim < 0 || line != header_for(dim)) {
    throw std::runtime_error("track '" + t.id + "': unexpected header in " + file.string());
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (static_cast<Index>(cells.size()) != dim + 3) {
      throw std::runtime_error("track '" + t.id + "': row " + std::to_string(rows.size()) + " has " +
                               std::to_string(cells.size()) + " columns");
    }
    std::vector<double> vals;
    vals.reserve(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      char* end = nullptr;
      double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0') {
        throw std::runtime_error("track '" + t.id + "': unparsable value '" + cells[c] + "'");
      }
      if (!std::isfinite(v)) {
        throw std::runtime_error("track '" + t.id + "': non-finite value in row " + std::to_string(rows.size()));
      }
      vals.push_back(v);
    }
    rows.push_back(std::move(vals));
  }
  const Index n = static_cast<Index>(rows.size());
  if (expected_rows >= 0 && n != expected_rows) {
    throw std::runtime_error("track '" + t.id + "': file has " + std::to_string(n) +
                             " rows, manifest says " + std::to_string(expected_rows));
  }
  t.features.resize(n, dim);
  t.targets.resize(n, 2);
  for (Index r = 0; r < n; ++r) {
    for (Index j = 0; j < dim; ++j) t.features(r, j) = rows[r][j];
    t.targets(r, 0) = rows[r][dim];
    t.targets(r, 1) = rows[r][dim + 1];
  }
}

void save_dataset(const Dataset& d, const fs::path& dir) {
  validate(d);
  for (const auto& t : d.tracks) check_id(t.id);

  json manifest;
  manifest["format_version"] = Dataset::kFormatVersion;
  manifest["seed"] = d.seed;
  if (!d.generator_params.is_null()) manifest["generator_params"] = d.generator_params;
  if (!d.normalization.is_null()) manifest["normalization"] = d.normalization;
  json entries = json::array();
  for (const auto& t : d.tracks) {
    json e;
    e["id"] = t.id;
    e["file"] = "tracks/" + t.id + ".csv";
    e["n_frames"] = t.n_frames();
    e["d_features"] = t.feature_dim();
    e["frame_interval_min"] = t.frame_interval_min;
    e["tags"] = t.tags;
    if (t.landmarks) e["landmarks"] = {{"t_g1s", t.landmarks->t_g1s}, {"t_sg2", t.landmarks->t_sg2}};
    if (auto it = d.split.find(t.id); it != d.split.end()) e["split"] = to_string(it->second);
    entries.push_back(std::move(e));
  }
  manifest["tracks"] = std::move(entries);

  fs::create_directories(dir / "tracks");
  for (const auto& t : d.tracks) write_track_csv(dir / "tracks" / (t.id + ".csv"), t);
  std::ofstream os(dir / kManifestName, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / kManifestName;
  std::ifstream is(mpath, std::ios::binary);
  if (!is) throw std::runtime_error("missing manifest " + mpath.string());
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + mpath.string() + ": " + e.what());
  }
  int version = manifest.value("format_version", -1);
  if (version != Dataset::kFormatVersion) {
    throw std::runtime_error("unsupported dataset format version " + std::to_string(version) + " (expected " +
                             std::to_string(Dataset::kFormatVersion) + ")");
  }

  Dataset d;
  d.seed = manifest.value("seed", std::uint64_t{0});
  if (manifest.contains("generator_params")) d.generator_params = manifest["generator_params"];
  if (manifest.contains("normalization")) d.normalization = manifest["normalization"];
  for (const auto& e : manifest.at("tracks")) {
    Track t;
    t.id = e.at("id").get<std::string>();
    check_id(t.id);
    t.frame_interval_min = e.at("frame_interval_min").get<double>();
    t.tags = e.value("tags", std::map<std::string, std::string>{});
    if (e.contains("landmarks")) {
      t.landmarks = Landmarks{e["landmarks"].at("t_g1s").get<Index>(), e["landmarks"].at("t_sg2").get<Index>()};
    }
    read_track_csv(dir / e.at("file").get<std::string>(), t, e.at("d_features").get<Index>(),
                   e.at("n_frames").get<Index>());
    validate(t);
    if (e.contains("split")) d.split[t.id] = split_from_string(e["split"].get<std::string>());
    d.tracks.push_back(std::move(t));
  }
  validate(d);
  return d;
}

}  // namespace cyclebench
