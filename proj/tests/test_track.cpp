#include <doctest.h>

#include "cyclebench/dataset_io.hpp"
#include "cyclebench/synth.hpp"
#include "cyclebench/track.hpp"
#include "temp_dir.hpp"

#include <cmath>
#include <random>

using namespace cyclebench;
using cyclebench::testing::slurp;
using cyclebench::testing::spit;
using cyclebench::testing::TempDir;

namespace {

Track ramp_track(const std::string& id, Index n, Index d = 3) {
  Track t;
  t.id = id;
  t.features.resize(n, d);
  t.targets.resize(n, 2);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < d; ++c) t.features(r, c) = static_cast<double>(r * 10 + c);
    t.targets(r, 0) = static_cast<double>(r);
    t.targets(r, 1) = -static_cast<double>(r);
  }
  t.landmarks = Landmarks{n / 4, (3 * n) / 4};
  t.tags = {{"condition", "regular"}, {"modality", "obscured"}};
  return t;
}

Dataset small_generated(std::size_t n, std::uint64_t seed) {
  auto params = preset("regular");
  return split_dataset(gen_dataset(params, n, seed), {0.6, 0.2, 0.2}, seed);
}

}  // namespace

TEST_CASE("crop examples") {
  Track t = ramp_track("a", 230);
  Track same = crop(t, 0.0, 1.0);
  CHECK(same == t);

  Track mid = crop(t, 0.25, 0.75);
  CHECK(mid.n_frames() == 116);
  CHECK(mid.targets(0, 0) == 57.0);
  CHECK(mid.targets(115, 0) == 172.0);

  Track one = crop(t, 0.5, 0.5);
  CHECK(one.n_frames() == 1);
  CHECK(one.targets(0, 0) == std::floor(0.5 * 229 + 0.5));

  CHECK_THROWS_AS(crop(t, 0.6, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(crop(t, -0.1, 0.4), std::invalid_argument);
}

TEST_CASE("tau maps to frames by round half up") {
  CHECK(tau_to_index(0.0, 230) == 0);
  CHECK(tau_to_index(1.0, 230) == 229);
  CHECK(tau_to_index(0.5, 4) == 2);  // 1.5 rounds up
  CHECK(tau_to_index(0.5, 2) == 1);  // 0.5 rounds up
}

TEST_CASE("crop shifts landmarks and drops them outside the window") {
  Track t = ramp_track("a", 101);
  t.landmarks = Landmarks{30, 60};
  Track inside = crop(t, 0.2, 0.8);
  REQUIRE(inside.landmarks);
  CHECK(inside.landmarks->t_g1s == 10);
  CHECK(inside.landmarks->t_sg2 == 40);
  CHECK_FALSE(crop(t, 0.4, 1.0).landmarks);
  CHECK_FALSE(crop(t, 0.0, 0.5).landmarks);
}

TEST_CASE("crop composes with the identity and keeps metadata") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Track t = ramp_track("b", 97);
  t.frame_interval_min = 7.5;
  for (int i = 0; i < 200; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    Track c = crop(t, a, b);
    CHECK(crop(c, 0.0, 1.0) == c);
    CHECK(c.frame_interval_min == 7.5);
    CHECK(c.tags == t.tags);
    CHECK(c.n_frames() >= 1);
  }
}

TEST_CASE("track validation") {
  Track t = ramp_track("v", 10);
  CHECK_NOTHROW(validate(t));

  Track short_track = ramp_track("s", 1);
  short_track.landmarks.reset();
  CHECK_THROWS_AS(validate(short_track), std::invalid_argument);

  Track nan_track = ramp_track("n", 10);
  nan_track.targets(3, 1) = std::nan("");
  CHECK_THROWS_WITH_AS(validate(nan_track), doctest::Contains("'n'"), std::invalid_argument);

  Track mismatch = ramp_track("m", 10);
  mismatch.features.conservativeResize(9, Eigen::NoChange);
  CHECK_THROWS_AS(validate(mismatch), std::invalid_argument);

  Track bad_marks = ramp_track("l", 10);
  bad_marks.landmarks = Landmarks{6, 6};
  CHECK_THROWS_AS(validate(bad_marks), std::invalid_argument);
  bad_marks.landmarks = Landmarks{2, 10};
  CHECK_THROWS_AS(validate(bad_marks), std::invalid_argument);
}

TEST_CASE("dataset validation rejects duplicate ids and dangling splits") {
  Dataset d;
  d.tracks = {ramp_track("x", 5), ramp_track("x", 6)};
  CHECK_THROWS_AS(validate(d), std::invalid_argument);
  d.tracks.pop_back();
  d.split["ghost"] = Split::train;
  CHECK_THROWS_AS(validate(d), std::invalid_argument);
}

TEST_CASE("split counts and determinism") {
  Dataset d;
  for (int i = 0; i < 100; ++i) d.tracks.push_back(ramp_track("t" + std::to_string(i), 4));

  Dataset s = split_dataset(d, {0.8, 0.1, 0.1}, 7);
  CHECK(s.tracks_in(Split::train).size() == 80);
  CHECK(s.tracks_in(Split::val).size() == 10);
  CHECK(s.tracks_in(Split::test).size() == 10);
  CHECK(split_dataset(d, {0.8, 0.1, 0.1}, 7).split == s.split);
  CHECK(split_dataset(d, {0.8, 0.1, 0.1}, 8).split != s.split);

  Dataset all = split_dataset(d, {1.0, 0.0, 0.0}, 3);
  CHECK(all.tracks_in(Split::train).size() == 100);

  CHECK_THROWS_AS(split_dataset(Dataset{}, {1.0, 0.0, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(d, {0.5, 0.2, 0.2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(d, {1.2, -0.1, -0.1}, 1), std::invalid_argument);
}

TEST_CASE("split assignment depends on ids, not on track order") {
  Dataset d;
  for (int i = 0; i < 30; ++i) d.tracks.push_back(ramp_track("t" + std::to_string(i), 4));
  Dataset r = d;
  std::reverse(r.tracks.begin(), r.tracks.end());
  CHECK(split_dataset(d, {0.5, 0.25, 0.25}, 5).split == split_dataset(r, {0.5, 0.25, 0.25}, 5).split);
}

TEST_CASE("save and load roundtrip exactly and byte-stably") {
  TempDir tmp("roundtrip");
  Dataset d = small_generated(6, 21);
  save_dataset(d, tmp / "a");
  save_dataset(d, tmp / "b");
  CHECK(load_dataset(tmp / "a") == d);
  CHECK(slurp(tmp / "a" / kManifestName) == slurp(tmp / "b" / kManifestName));
  for (const auto& t : d.tracks) {
    const std::string rel = "tracks/" + t.id + ".csv";
    CHECK(slurp(tmp / "a" / rel) == slurp(tmp / "b" / rel));
  }
}

TEST_CASE("empty dataset saves a manifest and no track files") {
  TempDir tmp("empty");
  save_dataset(Dataset{}, tmp.path());
  CHECK(std::filesystem::exists(tmp / kManifestName));
  CHECK(std::filesystem::is_empty(tmp / "tracks"));
  CHECK(load_dataset(tmp.path()).tracks.empty());
}

TEST_CASE("track files use the documented header and nine significant digits") {
  TempDir tmp("format");
  Dataset d;
  Track t = ramp_track("fmt", 2, 2);
  t.features(0, 0) = 1.0 / 3.0;
  d.tracks.push_back(t);
  save_dataset(d, tmp.path());
  const std::string csv = slurp(tmp / "tracks/fmt.csv");
  CHECK(csv.rfind("frame,f_0,f_1,fucci1,fucci2\n0,0.333333333,", 0) == 0);
  CHECK(storage_round(1.0 / 3.0) == 0.333333333);
}

TEST_CASE("load rejects corrupted datasets") {
  TempDir tmp("corrupt");
  Dataset d = small_generated(3, 4);
  const std::string first = d.tracks.front().id;

  SUBCASE("missing manifest") { CHECK_THROWS_AS(load_dataset(tmp / "nothing"), std::runtime_error); }

  SUBCASE("missing track file names the id") {
    save_dataset(d, tmp.path());
    std::filesystem::remove(tmp / ("tracks/" + first + ".csv"));
    CHECK_THROWS_WITH(load_dataset(tmp.path()), doctest::Contains(first.c_str()));
  }

  SUBCASE("NaN target") {
    save_dataset(d, tmp.path());
    const auto file = tmp / ("tracks/" + first + ".csv");
    std::string csv = slurp(file);
    const auto row = csv.find('\n') + 1;
    const auto end = csv.find('\n', row);
    const auto last_comma = csv.rfind(',', end);
    csv.replace(last_comma + 1, end - last_comma - 1, "nan");
    spit(file, csv);
    CHECK_THROWS_WITH(load_dataset(tmp.path()), doctest::Contains(first.c_str()));
  }

  SUBCASE("row count disagrees with manifest") {
    save_dataset(d, tmp.path());
    const auto file = tmp / ("tracks/" + first + ".csv");
    std::string csv = slurp(file);
    csv.resize(csv.rfind('\n', csv.size() - 2) + 1);
    spit(file, csv);
    CHECK_THROWS_WITH(load_dataset(tmp.path()), doctest::Contains(first.c_str()));
  }

  SUBCASE("version mismatch") {
    save_dataset(d, tmp.path());
    std::string m = slurp(tmp / kManifestName);
    const auto pos = m.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    m.replace(pos, 19, "\"format_version\": 2");
    spit(tmp / kManifestName, m);
    CHECK_THROWS_WITH(load_dataset(tmp.path()), doctest::Contains("version"));
  }

  SUBCASE("invariant violation refused before any write") {
    Dataset bad = d;
    bad.tracks[1].targets(0, 0) = INFINITY;
    CHECK_THROWS_AS(save_dataset(bad, tmp / "out"), std::invalid_argument);
    CHECK_FALSE(std::filesystem::exists(tmp / "out"));
  }
}

TEST_CASE("read_track_csv ingests external feature tracks") {
  TempDir tmp("ingest");
  spit(tmp / "ext.csv", "frame,f_0,fucci1,fucci2\n0,1.5,0.1,0.2\n1,2.5,0.3,0.4\n2,3.5,0.5,0.6\n");
  Track t;
  t.id = "ext";
  read_track_csv(tmp / "ext.csv", t, -1, -1);
  CHECK(t.n_frames() == 3);
  CHECK(t.feature_dim() == 1);
  CHECK(t.features(2, 0) == 3.5);
  CHECK(t.targets(1, 1) == 0.4);

  spit(tmp / "bad.csv", "frame,f_0,fucci1,fucci2\n0,1.5,0.1\n");
  CHECK_THROWS_AS(read_track_csv(tmp / "bad.csv", t, -1, -1), std::runtime_error);
}
