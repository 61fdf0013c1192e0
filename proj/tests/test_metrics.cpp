#include <doctest.h>

#include "cyclebench/metrics.hpp"
#include "cyclebench/signal.hpp"
#include "cyclebench/synth.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

using namespace cyclebench;
using cyclebench::testing::dtw_brute_force;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix random_series(std::mt19937_64& rng, Index n, Index c = 2) {
  std::normal_distribution<double> g;
  Matrix m(n, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Independent reference for the detection preprocessing.
std::vector<double> reference_detection_signal(const std::vector<double>& x) {
  const double lo = *std::min_element(x.begin(), x.end());
  const double hi = *std::max_element(x.begin(), x.end());
  const int n = static_cast<int>(x.size());
  std::vector<double> z(x.size(), 0.0);
  if (hi > lo) {
    for (int i = 0; i < n; ++i) z[i] = (x[i] - lo) / (hi - lo);
  }
  std::vector<double> out(x.size());
  for (int t = 0; t < n; ++t) {
    double s = 0;
    int k = 0;
    for (int j = t - 10; j <= t + 9; ++j) {
      if (j < 0 || j >= n) continue;
      s += z[j];
      ++k;
    }
    out[t] = s / k;
  }
  return out;
}

}  // namespace

TEST_CASE("l1 per channel") {
  Matrix y = Matrix::Zero(2, 2);
  CHECK(l1_per_channel(y, y) == std::array<double, 2>{0.0, 0.0});
  Matrix yhat(2, 2);
  yhat << 1, 0, 0, 1;
  CHECK(l1_per_channel(yhat, y) == std::array<double, 2>{0.5, 0.5});
  CHECK_THROWS_AS(l1_per_channel(Matrix::Zero(3, 2), y), std::invalid_argument);
}

TEST_CASE("r squared") {
  std::mt19937_64 rng(1);
  Matrix y = random_series(rng, 20);
  CHECK(r_squared(y, y) == 1.0);
  Matrix mean_pred = y.colwise().mean().replicate(20, 1);
  CHECK(r_squared(mean_pred, y) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r_squared(-y, y) < 0.0);
  CHECK_THROWS_AS(r_squared(y, Matrix::Ones(20, 2)), std::domain_error);
  CHECK_THROWS_AS(r_squared(Matrix::Zero(1, 2), Matrix::Zero(1, 2)), std::invalid_argument);
}

TEST_CASE("dtw hand case") {
  Matrix a = column({0, 0, 1});
  Matrix b = column({0, 1, 1});
  CHECK(dtw(a, b, 0.0) == 0.0);
  CHECK(dtw(a, b, 0.1) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-15));
  CHECK(dtw_brute_force(a, b, 0.1) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-15));
}

TEST_CASE("dtw equals brute-force path enumeration") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<Index> len(1, 8);
  int pairs = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix a = random_series(rng, len(rng));
    Matrix b = random_series(rng, len(rng));
    for (double p : {0.0, 0.1, 0.5}) {
      CHECK(std::abs(dtw(a, b, p) - dtw_brute_force(a, b, p)) < 1e-12);
    }
    ++pairs;
  }
  CHECK(pairs == 200);
}

TEST_CASE("dtw symmetry, identity, and the identity-alignment bound") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Index> len(1, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix a = random_series(rng, len(rng));
    Matrix b = random_series(rng, len(rng));
    const double d = dtw(a, b);
    CHECK(d >= 0.0);
    CHECK(d == dtw(b, a));
    CHECK(dtw(a, a) == 0.0);
    Matrix c = random_series(rng, a.rows());
    CHECK(dtw(a, c) <= std::sqrt((a - c).squaredNorm()) + 1e-12);
  }
  CHECK_THROWS_AS(dtw(Matrix(0, 2), Matrix::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("g1s detection on a delayed ramp") {
  std::vector<double> x(200, 0.0);
  for (int t = 100; t < 200; ++t) x[t] = (t - 100) / 99.0;
  auto idx = detect_g1s(x);
  REQUIRE(idx);
  CHECK(*idx >= 105);
  CHECK(*idx <= 115);
  auto ref = reference_detection_signal(x);
  const auto expect = std::find_if(ref.begin(), ref.end(), [](double v) { return v > 0.05; }) - ref.begin();
  CHECK(*idx == expect);

  CHECK_FALSE(detect_g1s(std::vector<double>(50, 0.0)));
}

TEST_CASE("sg2 detection on a triangle") {
  std::vector<double> x(260, 0.0);
  for (int t = 0; t <= 100; ++t) x[t] = t / 100.0;
  for (int t = 100; t <= 200; ++t) x[t] = (200 - t) / 100.0;
  auto idx = detect_sg2(x);
  REQUIRE(idx);
  auto ref = reference_detection_signal(x);
  const auto peak = std::max_element(ref.begin(), ref.end()) - ref.begin();
  auto it = std::find_if(ref.begin() + peak + 1, ref.end(), [](double v) { return v < 0.05; });
  CHECK(*idx == it - ref.begin());
  // The raw descending limb crosses 5% at frame 195.
  CHECK(std::abs(*idx - 195) <= 10);

  std::vector<double> up(80);
  for (int t = 0; t < 80; ++t) up[t] = t;
  CHECK_FALSE(detect_sg2(up));
}

TEST_CASE("g1s detection is invariant to positive affine maps") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(150, 0.0);
    const int onset = 20 + static_cast<int>(u(rng) * 100);
    for (int t = onset; t < 150; ++t) x[t] = (t - onset) * u(rng) + 0.05 * u(rng);
    const double alpha = 0.1 + 10 * u(rng), beta = 5 * (u(rng) - 0.5);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i] + beta;
    CHECK(detect_g1s(x) == detect_g1s(y));
  }
}

TEST_CASE("phase labels") {
  auto l = phase_labels(10, 20, 30);
  CHECK(std::count(l.begin(), l.end(), Phase::G1) == 10);
  CHECK(std::count(l.begin(), l.end(), Phase::S) == 10);
  CHECK(std::count(l.begin(), l.end(), Phase::G2M) == 10);
  CHECK(phase_labels(0, 1, 2) == std::vector<Phase>{Phase::S, Phase::G2M});
  CHECK_THROWS_AS(phase_labels(5, 5, 10), std::invalid_argument);
  CHECK_THROWS_AS(phase_labels(1, 10, 10), std::invalid_argument);

  auto all_g1 = phase_labels_lenient({std::nullopt, 4}, 8);
  CHECK(all_g1 == std::vector<Phase>(8, Phase::G1));
  auto open_s = phase_labels_lenient({3, std::nullopt}, 6);
  CHECK(open_s == std::vector<Phase>{Phase::G1, Phase::G1, Phase::G1, Phase::S, Phase::S, Phase::S});
}

TEST_CASE("f1 scores") {
  auto l = phase_labels(3, 7, 12);
  CHECK(f1_scores(l, l) == std::array<double, 3>{1.0, 1.0, 1.0});

  std::vector<Phase> gt(10, Phase::G1);
  std::fill(gt.begin() + 5, gt.end(), Phase::S);
  std::vector<Phase> pred(10, Phase::G1);
  auto f = f1_scores(pred, gt);
  CHECK(f[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f[1] == 0.0);
  CHECK(f[2] == 1.0);
  CHECK_THROWS_AS(f1_scores(pred, std::vector<Phase>(9, Phase::G1)), std::invalid_argument);

  PhaseCounts a, b;
  a.add(pred, gt);
  b.add(l, l);
  a += b;
  for (double v : a.f1()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("delta t") {
  CHECK(delta_t(40, 40, 5.0) == 0.0);
  CHECK(delta_t(110, 98, 5.0) == 60.0);
  CHECK(delta_t(98, 110, 5.0) == 60.0);
}

TEST_CASE("detectors on clean generator signals recover the latent phases") {
  auto params = preset("regular");
  Rng rng(31);
  long long agree = 0, total = 0;
  for (int i = 0; i < 100; ++i) {
    auto latent = sample_cycle(params, rng);
    Matrix y = reporter_signals(latent, params);
    auto c = detect_checkpoints(y);
    REQUIRE(c.t_g1s);
    REQUIRE(c.t_sg2);
    auto labels = phase_labels_lenient(c, latent.n_frames);
    for (Index t = 0; t < latent.n_frames; ++t) agree += labels[t] == latent.phase_of_frame[t];
    total += latent.n_frames;
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.98);
}

TEST_CASE("track metrics with missing predicted checkpoints") {
  auto params = preset("regular");
  Rng rng(8);
  auto latent = sample_cycle(params, rng);
  Matrix y = reporter_signals(latent, params);
  Matrix flat = Matrix::Constant(y.rows(), 2, y.mean());
  auto m = track_metrics(flat, y, 5.0);
  CHECK(m.t_g1s_true);
  CHECK_FALSE(m.t_g1s_pred);
  CHECK_FALSE(m.dt_g1s_min);
  CHECK(m.dtw > 0.0);
  CHECK(m.l1_fucci1 > 0.0);

  auto perfect = track_metrics(y, y, 5.0);
  CHECK(perfect.dtw == 0.0);
  CHECK(perfect.dt_g1s_min == 0.0);
  CHECK(perfect.dt_sg2_min == 0.0);
  CHECK(perfect.r2 == 1.0);
  CHECK(perfect.phase_f1 == std::array<double, 3>{1.0, 1.0, 1.0});
}
