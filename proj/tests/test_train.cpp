#include <doctest.h>

#include "cyclebench/train.hpp"
#include "op_cases.hpp"
#include "temp_dir.hpp"

#include <cmath>
#include <fstream>

using namespace cyclebench;
using namespace cyclebench::testing;

namespace {

Track plain_track(Index n, Index d = 4) {
  Track t;
  t.id = "p";
  t.features = Matrix::Zero(n, d);
  t.targets.resize(n, 2);
  for (Index r = 0; r < n; ++r) t.targets.row(r) << static_cast<double>(r), 0.0;
  t.landmarks = Landmarks{n / 3, (2 * n) / 3};
  return t;
}

ModelConfig small_model(HeadKind head, int input_dim, std::uint64_t seed) {
  ModelConfig c;
  c.head = head;
  c.input_dim = input_dim;
  c.encoder_dim = 16;
  c.seed = seed;
  return c;
}

Dataset small_dataset(std::size_t n, std::uint64_t seed) {
  return split_dataset(gen_dataset(preset("regular"), n, seed), {0.8, 0.2, 0.0}, seed);
}

}  // namespace

TEST_CASE("sample_subtrack contracts") {
  Track t = plain_track(120);
  Rng rng(1);
  TrainConfig c;

  c.full_track_prob = 1.0;
  CHECK(sample_subtrack(t, rng, c) == t);

  c.full_track_prob = 0.0;
  c.subtrack_min = c.subtrack_max = 17;
  for (int i = 0; i < 200; ++i) {
    Track s = sample_subtrack(t, rng, c);
    CHECK(s.n_frames() == 17);
    const auto start = static_cast<Index>(s.targets(0, 0));
    for (Index r = 0; r < 17; ++r) CHECK(s.targets(r, 0) == static_cast<double>(start + r));
    if (s.landmarks) {
      CHECK(s.landmarks->t_g1s == 40 - start);
      CHECK(s.landmarks->t_sg2 == 80 - start);
    }
  }

  c.subtrack_min = 16;
  c.subtrack_max = 96;
  Track short_track = plain_track(30);
  for (int i = 0; i < 200; ++i) {
    const auto len = sample_subtrack(short_track, rng, c).n_frames();
    CHECK(len >= 16);
    CHECK(len <= 30);
  }
  CHECK_THROWS_AS(sample_subtrack(plain_track(10), rng, c), std::invalid_argument);
}

TEST_CASE("subtrack starts are uniform") {
  Track t = plain_track(109);  // 100 possible starts for length 10
  TrainConfig c;
  c.full_track_prob = 0.0;
  c.subtrack_min = c.subtrack_max = 10;
  Rng rng(2);
  std::array<int, 10> bins{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto start = static_cast<int>(sample_subtrack(t, rng, c).targets(0, 0));
    REQUIRE(start >= 0);
    REQUIRE(start < 100);
    ++bins[start / 10];
  }
  double chi2 = 0.0;
  for (int b : bins) chi2 += (b - draws / 10.0) * (b - draws / 10.0) / (draws / 10.0);
  // 99th percentile of chi-square with 9 degrees of freedom.
  CHECK(chi2 < 21.666);
}

TEST_CASE("augment splits noise into a whole-track part and a per-frame part") {
  TrainConfig c;
  Rng rng(3);
  Matrix x = Matrix::Random(12, 5);
  c.augment_noise_std = 0.0;
  CHECK(augment(x, rng, c) == x);

  c.augment_noise_std = 0.05;
  const Index n = 400, d = 400;
  Matrix z = augment(Matrix::Zero(n, d), rng, c);
  Eigen::RowVectorXd col_mean = z.colwise().mean();
  // Column means carry the shared draw plus per-frame noise averaged over n.
  const double between = col_mean.squaredNorm() / d - std::pow(0.0125, 2) / n;
  const double within = (z.rowwise() - col_mean).squaredNorm() / (d * (n - 1.0));
  CHECK(between == doctest::Approx(0.05 * 0.05).epsilon(0.15));
  CHECK(within == doctest::Approx(0.0125 * 0.0125).epsilon(0.02));
}

TEST_CASE("adam first step matches the closed form") {
  TestRng trng(4);
  Matrix x = random_matrix(trng, 6, 3);
  Matrix w0 = random_matrix(trng, 3, 2);
  Matrix y = random_matrix(trng, 6, 2);
  Tensor w = Tensor::parameter(w0);
  const double lr = 1e-3, eps = 1e-8;
  Adam opt({w}, lr, 0.9, 0.999, eps);
  l1_loss(matmul(Tensor::constant(x), w), y).backward();

  Matrix sign = (x * w0 - y).unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
  Matrix g = x.transpose() * sign / 12.0;
  CHECK((w.grad() - g).cwiseAbs().maxCoeff() < 1e-15);
  opt.step();
  // Bias-corrected moments on the first step are g and g^2.
  Matrix expect = w0.array() - lr * g.array() / (g.array().abs() + eps);
  CHECK((w.value() - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(opt.steps() == 1);
}

TEST_CASE("l1 loss averages frames and channels") {
  Matrix y = Matrix::Zero(2, 2);
  Matrix yhat(2, 2);
  yhat << 1, -3, 0, 2;
  CHECK(l1_loss(Tensor::constant(yhat), y).item() == 1.5);
}

TEST_CASE("training is deterministic and keeps the best validation weights") {
  Dataset d = small_dataset(20, 5);
  TrainConfig c;
  c.epochs = 3;
  c.lr = 1e-3;
  c.seed = 9;
  auto a = SequenceModel::build(small_model(HeadKind::ssm, 16, 1));
  auto b = SequenceModel::build(small_model(HeadKind::ssm, 16, 1));
  int calls = 0;
  auto ra = train(a, d, c, [&](const EpochRecord&) { ++calls; });
  auto rb = train(b, d, c);
  CHECK(calls == 3);
  REQUIRE(ra.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ra.history[i].train_l1 == rb.history[i].train_l1);
    CHECK(ra.history[i].val_l1 == rb.history[i].val_l1);
  }
  CHECK(a.weights() == b.weights());

  double best = INFINITY;
  for (const auto& r : ra.history) best = std::min(best, r.val_l1);
  CHECK(ra.best_val_l1 == best);
  CHECK(ra.history[ra.best_epoch - 1].val_l1 == best);
  CHECK(mean_track_l1(a, d.tracks_in(Split::val)) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("training errors") {
  Dataset d = small_dataset(6, 2);
  TrainConfig c;
  c.epochs = 1;
  auto wrong = SequenceModel::build(small_model(HeadKind::lstm, 5, 1));
  CHECK_THROWS_AS(train(wrong, d, c), std::invalid_argument);
  Dataset no_train = d;
  no_train.split.clear();
  auto m = SequenceModel::build(small_model(HeadKind::lstm, 16, 1));
  CHECK_THROWS_AS(train(m, no_train, c), std::invalid_argument);
  c.lr = 1e300;
  c.epochs = 5;
  CHECK_THROWS_AS(train(m, d, c), TrainingDiverged);
  TrainConfig bad;
  bad.subtrack_min = 1;
  CHECK_THROWS(bad.validate());
}

// One track means one optimizer step per epoch. 200 steps end near 0.03 with
// the loss still falling, so this check fails; the longer run below shows the
// model does get under the threshold.
static double memorize(int epochs, double lr) {
  Dataset one = gen_dataset(preset("regular"), 1, 77);
  one.split[one.tracks[0].id] = Split::train;
  ModelConfig mc = small_model(HeadKind::transformer, 16, 3);
  mc.encoder_dim = 64;
  auto m = SequenceModel::build(mc);
  TrainConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.full_track_prob = 1.0;
  c.augment_noise_std = 0.0;
  return train(m, one, c).history.back().train_l1;
}

TEST_CASE("a transformer memorizes a single track in 200 epochs") {
  const double l1 = memorize(200, 3e-3);
  MESSAGE("final train l1 " << l1);
  CHECK(l1 < 0.02);
}

TEST_CASE("a transformer memorizes a single track given 600 epochs") {
  const double l1 = memorize(600, 1e-3);
  MESSAGE("final train l1 " << l1);
  CHECK(l1 < 0.02);
}

TEST_CASE("training loss falls over the first five epochs for every head") {
  for (auto head : kAllHeads) {
    std::array<double, 5> mean{};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Dataset d = split_dataset(gen_dataset(preset("regular"), 500, seed), {1.0, 0.0, 0.0}, seed);
      auto m = SequenceModel::build(small_model(head, 16, seed));
      TrainConfig c;  // library defaults, lr 1e-4
      c.epochs = 5;
      c.seed = seed;
      auto r = train(m, d, c);
      for (int e = 0; e < 5; ++e) mean[e] += r.history[e].train_l1 / 3.0;
    }
    for (int e = 1; e < 5; ++e) {
      INFO(to_string(head) << " epoch " << e + 1 << ": " << mean[e] << " after " << mean[e - 1]);
      CHECK(mean[e] < mean[e - 1]);
    }
  }
}

TEST_CASE("checkpoints roundtrip bit-exactly") {
  TempDir tmp("ckpt");
  TestRng rng(6);
  Matrix probe = random_matrix(rng, 9, 16);
  for (auto head : kAllHeads) {
    auto m = SequenceModel::build(small_model(head, 16, 8));
    // Perturb so the file holds more than freshly built weights.
    auto w = m.weights();
    for (auto& mat : w) mat.array() += 1.0 / 3.0;
    m.set_weights(w);
    const auto file = tmp / (to_string(head) + ".ckpt");
    save_checkpoint(m, file);
    auto back = load_checkpoint(file, 16);
    CHECK(back.weights() == m.weights());
    CHECK(back.predict(probe) == m.predict(probe));
    CHECK(to_json(back.config()) == to_json(m.config()));
  }

  auto fresh = SequenceModel::build(small_model(HeadKind::ssm, 16, 12));
  save_checkpoint(fresh, tmp / "fresh.ckpt");
  CHECK(load_checkpoint(tmp / "fresh.ckpt").weights() ==
        SequenceModel::build(small_model(HeadKind::ssm, 16, 12)).weights());
}

TEST_CASE("checkpoint load errors") {
  TempDir tmp("ckpt_err");
  auto m = SequenceModel::build(small_model(HeadKind::causal_cnn, 16, 1));
  save_checkpoint(m, tmp / "m.ckpt");
  try {
    load_checkpoint(tmp / "m.ckpt", 12);
    FAIL("expected a dimension error");
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    CHECK(what.find("D=16") != std::string::npos);
    CHECK(what.find("D=12") != std::string::npos);
  }
  CHECK_THROWS(load_checkpoint(tmp / "missing.ckpt"));

  std::string text = slurp(tmp / "m.ckpt");
  std::string versioned = text;
  versioned.replace(versioned.find("checkpoint 1"), 12, "checkpoint 9");
  spit(tmp / "v.ckpt", versioned);
  CHECK_THROWS_WITH(load_checkpoint(tmp / "v.ckpt"), doctest::Contains("version"));

  spit(tmp / "t.ckpt", text.substr(0, text.size() / 2));
  CHECK_THROWS(load_checkpoint(tmp / "t.ckpt"));
}

TEST_CASE("history csv") {
  TempDir tmp("hist");
  std::vector<EpochRecord> h{{1, 0.5, 0.25}, {2, 0.125, NAN}};
  write_history_csv(tmp / "h.csv", h);
  const std::string csv = slurp(tmp / "h.csv");
  CHECK(csv.rfind("epoch,train_l1,val_l1\n1,0.5,0.25\n2,0.125,", 0) == 0);
}

TEST_CASE("train config json roundtrip") {
  TrainConfig c;
  c.lr = 3e-4;
  c.seed = 42;
  auto back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}
