#pragma once

#include "cyclebench/track.hpp"

#include <filesystem>
#include <string>

namespace cyclebench {

// On-disk layout: <dir>/manifest.json plus <dir>/tracks/<id>.csv, one row per
// frame with header `frame,f_0..f_{D-1},fucci1,fucci2` and values printed with
// 9 significant digits.
inline constexpr const char* kManifestName = "manifest.json";

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Value as it survives a save/load cycle (9 significant digits).
double storage_round(double v);
void storage_round(Matrix& m);

std::string format_decimal(double v);

// Reads one track CSV (same schema as the track files). `expected_rows` < 0
// disables the row-count check.
void read_track_csv(const std::filesystem::path& file, Track& track, Index expected_dim,
                    Index expected_rows);
void write_track_csv(const std::filesystem::path& file, const Track& track);

}  // namespace cyclebench
