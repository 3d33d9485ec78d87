#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "riskbid/ctr_model.hpp"
#include "riskbid/log.hpp"
#include "riskbid/math_util.hpp"
#include "riskbid/rng.hpp"
#include "riskbid/simulator.hpp"
#include "support/test_util.hpp"

using namespace riskbid;

namespace {

FeatureVector features(std::vector<std::uint32_t> ids, std::uint32_t dim) {
  return FeatureVector::of(std::move(ids), dim);
}

}  // namespace

TEST_CASE("predict_point evaluates the sigmoid of the mean score") {
  GaussianWeightModel zero(100, 0.0, 1.0);
  CHECK(zero.predict_point(features({1, 5, 9}, 100)) == doctest::Approx(0.5));

  GaussianWeightModel m(10, 0.0, 1.0);
  for (std::uint32_t i = 0; i < 10; ++i) m.set_weight(i, -0.1, 1.0);
  CHECK(m.predict_point(features({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 10)) ==
        doctest::Approx(0.2689414213699951).epsilon(1e-12));

  CHECK_THROWS_AS((void)zero.predict_point(features({5}, 101)), InvalidInput);
  CHECK_THROWS_AS((void)zero.predict_point(features({}, 100)), InvalidInput);
}

TEST_CASE("posterior_params sums means and inverse precisions") {
  GaussianWeightModel m(10, 0.0, 1.0);
  for (std::uint32_t i = 0; i < 10; ++i) m.set_weight(i, -0.1, 30.0);
  const CtrPosterior p =
      m.posterior_params(features({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 10));
  CHECK(p.m == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(p.s2 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  GaussianWeightModel single(4, 0.0, 1.0);
  const CtrPosterior q = single.posterior_params(features({2}, 4));
  CHECK(q.m == 0.0);
  CHECK(q.s2 == 1.0);
}

TEST_CASE("posterior_params matches a naive per-index oracle exactly") {
  Rng rng(11);
  GaussianWeightModel m(500, 0.0, 1.0);
  for (std::uint32_t i = 0; i < 500; ++i) {
    m.set_weight(i, rng.normal(0.0, 0.5), 0.5 + rng.uniform() * 10.0);
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint32_t> ids;
    for (int k = 0; k < 12; ++k) {
      ids.push_back(static_cast<std::uint32_t>(rng.uniform_below(500)));
    }
    const FeatureVector x = features(ids, 500);
    double om = 0.0, os2 = 0.0;
    for (std::uint32_t i : x.indices) {
      om += m.mu(i);
      os2 += 1.0 / m.q(i);
    }
    const CtrPosterior p = m.posterior_params(x);
    CHECK(p.m == om);
    CHECK(p.s2 == os2);
  }
}

TEST_CASE("posterior_params is additive over disjoint feature sets") {
  Rng rng(12);
  GaussianWeightModel m(200, 0.0, 1.0);
  for (std::uint32_t i = 0; i < 200; ++i) {
    m.set_weight(i, rng.normal(0.0, 1.0), 0.1 + rng.uniform() * 5.0);
  }
  const FeatureVector a = features({1, 4, 9, 16}, 200);
  const FeatureVector b = features({2, 8, 32, 128}, 200);
  const FeatureVector both = features({1, 2, 4, 8, 9, 16, 32, 128}, 200);
  const CtrPosterior pa = m.posterior_params(a);
  const CtrPosterior pb = m.posterior_params(b);
  const CtrPosterior pc = m.posterior_params(both);
  CHECK(pc.m == doctest::Approx(pa.m + pb.m).epsilon(1e-12));
  CHECK(pc.s2 == doctest::Approx(pa.s2 + pb.s2).epsilon(1e-12));
}

TEST_CASE("update leaves the model unchanged on an empty vector") {
  GaussianWeightModel m(10, 0.2, 2.0);
  m.update(features({}, 10), 1, 0.1);
  CHECK(m.materialized_count() == 0);
  CHECK(m.mu(3) == 0.2);
  CHECK(m.q(3) == 2.0);
}

TEST_CASE("update adds exactly 0.25 precision at a zero score") {
  GaussianWeightModel m(10, 0.0, 1.0);
  m.update(features({4}, 10), 1, 0.05);
  CHECK(m.q(4) == 1.25);
  CHECK(m.mu(4) == doctest::Approx(0.05 * 0.5).epsilon(1e-15));
}

TEST_CASE("repeated updates match a step-by-step recurrence oracle") {
  const double eta = 0.1;
  GaussianWeightModel m(5, 0.0, 1.0);
  const FeatureVector x = features({1, 3}, 5);

  double mu1 = 0.0, mu3 = 0.0, q1 = 1.0, q3 = 1.0;
  for (int step = 0; step < 40; ++step) {
    const int y = step % 3 == 0 ? 1 : 0;
    m.update(x, y, eta);
    const double p = sigmoid(mu1 + mu3);
    mu1 += eta * (y - p);
    mu3 += eta * (y - p);
    q1 += p * (1.0 - p);
    q3 += p * (1.0 - p);
    CHECK(m.mu(1) == doctest::Approx(mu1).epsilon(1e-12));
    CHECK(m.q(1) == doctest::Approx(q1).epsilon(1e-12));
    CHECK(m.mu(3) == doctest::Approx(mu3).epsilon(1e-12));
    CHECK(m.q(3) == doctest::Approx(q3).epsilon(1e-12));
  }
}

TEST_CASE("precision never decreases under random updates") {
  Rng rng(17);
  GaussianWeightModel m(50, 0.0, 1.0);
  std::vector<double> last_q(50, 1.0);
  for (int step = 0; step < 500; ++step) {
    std::vector<std::uint32_t> ids;
    for (int k = 0; k < 5; ++k) {
      ids.push_back(static_cast<std::uint32_t>(rng.uniform_below(50)));
    }
    const FeatureVector x = features(ids, 50);
    m.update(x, rng.uniform() < 0.3 ? 1 : 0, 0.05);
    for (std::uint32_t i : x.indices) {
      CHECK(m.q(i) >= last_q[i]);
      last_q[i] = m.q(i);
    }
  }
}

TEST_CASE("more frequent features end up with strictly larger precision") {
  GaussianWeightModel m(2, 0.0, 1.0);
  const FeatureVector frequent = features({0}, 2);
  const FeatureVector rare = features({1}, 2);
  for (int i = 0; i < 100; ++i) m.update(frequent, i % 10 == 0 ? 1 : 0, 0.01);
  for (int i = 0; i < 10; ++i) m.update(rare, i % 10 == 0 ? 1 : 0, 0.01);
  CHECK(m.q(0) > m.q(1));
}

TEST_CASE("train validates input and reduces to update for one record") {
  std::vector<LogRecord> one(1);
  one[0].features = features({2}, 8);
  one[0].click = 1;
  one[0].market_price = 10.0;

  TrainConfig bad;
  bad.epochs = 0;
  GaussianWeightModel m(8, 0.0, 1.0);
  CHECK_THROWS_AS(train(m, one, bad), InvalidInput);
  CHECK_THROWS_AS(train(m, {}, TrainConfig{}), InvalidInput);

  GaussianWeightModel a(8, 0.0, 1.0);
  GaussianWeightModel b(8, 0.0, 1.0);
  TrainConfig tc;
  tc.eta = 0.07;
  train(a, one, tc);
  b.update(one[0].features, one[0].click, 0.07);
  CHECK(a.mu(2) == b.mu(2));
  CHECK(a.q(2) == b.q(2));
}

TEST_CASE("inner MAP iterations anchor to the pre-instance prior") {
  std::vector<LogRecord> one(1);
  one[0].features = features({0, 1}, 4);
  one[0].click = 1;

  TrainConfig inner;
  inner.eta = 0.2;
  inner.map_iterations = 25;
  GaussianWeightModel a(4, 0.0, 1.0);
  train(a, one, inner);

  TrainConfig single;
  single.eta = 0.2;
  GaussianWeightModel b(4, 0.0, 1.0);
  train(b, one, single);

  // More inner steps move further toward the per-instance mode, and the
  // precision update stays a single bounded increment.
  CHECK(a.mu(0) > b.mu(0));
  CHECK(a.q(0) > 1.0);
  CHECK(a.q(0) <= 1.25);
  CHECK(std::isfinite(a.mu(0)));
}

TEST_CASE("training is deterministic given the shuffle seed") {
  GeneratorSpec spec;
  spec.dimension = 300;
  spec.records = 2000;
  spec.features_per_record = 6;
  const SyntheticLog log = generate_synthetic(spec, 5);

  TrainConfig tc;
  tc.eta = 0.05;
  tc.epochs = 2;
  tc.shuffle_seed = 99;
  GaussianWeightModel a(spec.dimension, 0.0, 1.0);
  GaussianWeightModel b(spec.dimension, 0.0, 1.0);
  train(a, log.records, tc);
  train(b, log.records, tc);
  for (std::uint32_t i = 0; i < spec.dimension; ++i) {
    CHECK(a.mu(i) == b.mu(i));
    CHECK(a.q(i) == b.q(i));
  }
}

TEST_CASE("trained model calibrates to the empirical click rate") {
  GeneratorSpec spec;
  spec.dimension = 2000;
  spec.records = 50000;
  spec.features_per_record = 10;
  spec.weight_mean = -0.12;
  spec.weight_std = 0.35;
  const SyntheticLog log = generate_synthetic(spec, 21);

  GaussianWeightModel m(spec.dimension, 0.0, 1.0);
  TrainConfig tc;
  tc.eta = 0.05;
  tc.epochs = 3;
  train(m, log.records, tc);

  double mean_pred = 0.0, positives = 0.0;
  for (const LogRecord& rec : log.records) {
    mean_pred += m.predict_point(rec.features);
    positives += rec.click;
  }
  mean_pred /= static_cast<double>(log.records.size());
  const double empirical = positives / static_cast<double>(log.records.size());
  CHECK(std::abs(mean_pred - empirical) / empirical < 0.10);
}

TEST_CASE("held-out AUC comes close to the true-weight AUC") {
  GeneratorSpec spec;
  spec.dimension = 600;
  spec.records = 60000;
  spec.features_per_record = 10;
  spec.weight_mean = -0.12;
  spec.weight_std = 0.5;
  spec.popularity_exponent = 1.0;
  const SyntheticLog log = generate_synthetic(spec, 31);

  const std::size_t split = 50000;
  std::vector<LogRecord> train_set(log.records.begin(), log.records.begin() + split);
  std::vector<LogRecord> held_out(log.records.begin() + split, log.records.end());

  GaussianWeightModel m(spec.dimension, 0.0, 1.0);
  TrainConfig tc;
  tc.eta = 0.02;
  tc.epochs = 6;
  train(m, train_set, tc);

  std::vector<double> model_scores, true_scores;
  std::vector<int> labels;
  for (const LogRecord& rec : held_out) {
    model_scores.push_back(m.predict_point(rec.features));
    double s = 0.0;
    for (std::uint32_t i : rec.features.indices) s += log.true_weights[i];
    true_scores.push_back(sigmoid(s));
    labels.push_back(rec.click);
  }
  const double model_auc = test::auc(model_scores, labels);
  const double oracle_auc = test::auc(true_scores, labels);
  CHECK(std::abs(model_auc - oracle_auc) < 0.02);
}

TEST_CASE("init_from_point_estimate seeds means and uniform precision") {
  CHECK_THROWS_AS(GaussianWeightModel::from_point_estimate(std::vector<double>(4, 0.0), 0.0),
                  InvalidInput);

  const std::vector<double> zeros(16, 0.0);
  GaussianWeightModel m = GaussianWeightModel::from_point_estimate(zeros, 1.0);
  const CtrPosterior p =
      m.posterior_params(features({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 16));
  CHECK(p.m == 0.0);
  CHECK(p.s2 == doctest::Approx(10.0).epsilon(1e-12));

  std::vector<double> w{0.5, -1.5, 0.25, 0.0};
  GaussianWeightModel warm = GaussianWeightModel::from_point_estimate(w, 1.0);
  const FeatureVector x = features({0, 1, 2}, 4);
  CHECK(warm.predict_point(x) ==
        doctest::Approx(sigmoid(0.5 - 1.5 + 0.25)).epsilon(1e-15));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(23);
  GaussianWeightModel m(64, 0.1, 1.5);
  for (int k = 0; k < 30; ++k) {
    m.set_weight(static_cast<std::uint32_t>(rng.uniform_below(64)),
                 rng.normal(0.0, 2.0), 1.5 + rng.uniform() * 4.0);
  }
  test::TempDir dir("ckpt");
  m.save(dir.file("a.ckpt"));
  const GaussianWeightModel loaded = GaussianWeightModel::load(dir.file("a.ckpt"));
  CHECK(loaded.dimension() == m.dimension());
  CHECK(loaded.mu0() == m.mu0());
  CHECK(loaded.q0() == m.q0());
  for (std::uint32_t i = 0; i < 64; ++i) {
    CHECK(loaded.mu(i) == m.mu(i));
    CHECK(loaded.q(i) == m.q(i));
  }
  loaded.save(dir.file("b.ckpt"));
  CHECK(test::read_file(dir.file("a.ckpt")) == test::read_file(dir.file("b.ckpt")));
}
