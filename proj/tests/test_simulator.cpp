#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "riskbid/experiment.hpp"
#include "riskbid/math_util.hpp"
#include "riskbid/rng.hpp"
#include "riskbid/simulator.hpp"
#include "support/naive_replay.hpp"
#include "support/test_util.hpp"

using namespace riskbid;

namespace {

std::vector<LogRecord> fixture(std::uint32_t dim,
                               std::vector<std::tuple<int, double, std::vector<std::uint32_t>>> rows) {
  std::vector<LogRecord> records;
  for (auto& [click, price, ids] : rows) {
    LogRecord rec;
    rec.features = FeatureVector::of(ids, dim);
    rec.click = click;
    rec.market_price = price;
    records.push_back(std::move(rec));
  }
  return records;
}

StrategyConfig make_cfg(StrategyKind kind, double alpha, double phi, double v) {
  StrategyConfig cfg;
  cfg.kind = kind;
  cfg.alpha = alpha;
  cfg.phi = phi;
  cfg.v = v;
  return cfg;
}

}  // namespace

TEST_CASE("a strategy that never bids wins and spends nothing") {
  GaussianWeightModel model(4, 0.0, 1.0);
  // Huge alpha clamps every VaR bid at 0.
  const Bidder bidder(make_cfg(StrategyKind::kVar, 1e9, 1.0, 10.0), model);
  ReplayConfig cfg;
  cfg.strategy = bidder.config();
  const auto m = replay(fixture(4, {{1, 3.0, {0}}, {0, 2.0, {1}}}), cfg, bidder);
  CHECK(m.bids == 0);
  CHECK(m.wins == 0);
  CHECK(m.cost == 0.0);
  CHECK(m.profit == 0.0);
  CHECK(!m.win_rate.has_value());
  CHECK(!m.roi.has_value());
  CHECK(m.records_consumed == 2);
}

TEST_CASE("a bid equal to the market price loses the auction") {
  GaussianWeightModel model(2, 0.0, 1.0);  // ctr = 0.5, bid = 5 at v = 10
  const Bidder bidder(make_cfg(StrategyKind::kLr, 0.0, 1.0, 10.0), model);
  ReplayConfig cfg;
  cfg.strategy = bidder.config();
  const auto m = replay(
      fixture(2, {{1, 5.0, {0}}, {1, 4.999, {0}}, {0, 5.001, {0}}}), cfg, bidder);
  CHECK(m.bids == 3);
  CHECK(m.wins == 1);  // only the 4.999 record
  CHECK(m.cost == 4.999);
  CHECK(m.clicks == 1);
  CHECK(m.revenue == 10.0);
}

TEST_CASE("budget exhaustion voids the final win and stops the replay") {
  GaussianWeightModel model(2, 0.0, 1.0);
  const Bidder bidder(make_cfg(StrategyKind::kLr, 0.0, 1.0, 20.0), model);  // bid 10
  ReplayConfig cfg;
  cfg.strategy = bidder.config();
  cfg.budget = 10.0;
  const auto m = replay(
      fixture(2, {{0, 6.0, {0}}, {1, 6.0, {0}}, {1, 1.0, {0}}}), cfg, bidder);
  CHECK(m.wins == 1);
  CHECK(m.cost == 6.0);
  CHECK(m.records_consumed == 2);  // the voiding record ends the run
  CHECK(m.clicks == 0);

  // An exact remaining-budget payment is allowed.
  ReplayConfig exact;
  exact.strategy = bidder.config();
  exact.budget = 12.0;
  const auto e = replay(fixture(2, {{0, 6.0, {0}}, {0, 6.0, {0}}}), exact, bidder);
  CHECK(e.wins == 2);
  CHECK(e.cost == 12.0);

  ReplayConfig bad;
  bad.strategy = bidder.config();
  bad.budget = 0.0;
  CHECK_THROWS_AS((void)replay({}, bad, bidder), InvalidInput);
}

TEST_CASE("budget growth never reduces wins or cost") {
  GeneratorSpec spec;
  spec.dimension = 200;
  spec.records = 3000;
  spec.features_per_record = 5;
  const SyntheticLog log = generate_synthetic(spec, 3);
  GaussianWeightModel model(spec.dimension, 0.0, 1.0);
  TrainConfig tc;
  train(model, log.records, tc);
  const double v = click_value_from_training(log.records, 1.0);
  const Bidder bidder(make_cfg(StrategyKind::kLr, 0.0, 1.0, v), model);

  std::uint64_t last_wins = 0;
  double last_cost = -1.0;
  for (double budget : {500.0, 2000.0, 8000.0, 32000.0, 128000.0}) {
    ReplayConfig cfg;
    cfg.strategy = bidder.config();
    cfg.budget = budget;
    const auto m = replay(log.records, cfg, bidder);
    CHECK(m.cost <= budget);
    CHECK(m.wins >= last_wins);
    CHECK(m.cost >= last_cost);
    CHECK(m.profit == m.revenue - m.cost);
    last_wins = m.wins;
    last_cost = m.cost;
  }
}

TEST_CASE("replay matches the naive reimplementation on synthetic logs") {
  GeneratorSpec spec;
  spec.dimension = 400;
  spec.records = 1000;
  spec.features_per_record = 8;
  const SyntheticLog log = generate_synthetic(spec, 11);

  GaussianWeightModel model(spec.dimension, 0.0, 1.0);
  TrainConfig tc;
  tc.eta = 0.05;
  train(model, log.records, tc);
  const double v = click_value_from_training(log.records, 1.0);
  const MarketPriceModel market = MarketPriceModel::lognormal(4.0, 0.5);

  GridSpec mg{0, 1, 40}, sg{0, 1, 30};
  fit_grid_ranges(model, log.records, mg, sg);
  const MomentTable moments = MomentTable::build(mg, sg, 2000, 5);
  const BidGrid grid = BidGrid::for_value(v);
  const RmpBidTable rmp = RmpBidTable::build(mg, sg, grid, 0.5, v, market, 2000, 5);

  const std::optional<double> budgets[] = {std::nullopt,
                                           0.5 * total_cost(log.records)};
  for (const auto& budget : budgets) {
    for (StrategyKind kind : {StrategyKind::kLr, StrategyKind::kVar, StrategyKind::kRmp}) {
      const StrategyConfig sc = make_cfg(kind, kind == StrategyKind::kLr ? 0.0 : 0.5,
                                         1.1, v);
      const Bidder bidder(sc, model, &moments, &rmp);
      ReplayConfig cfg;
      cfg.strategy = sc;
      cfg.budget = budget;
      const ReplayMetrics got = replay(log.records, cfg, bidder);
      const auto want = test::naive_replay(
          log.records, v, budget,
          [&](const FeatureVector& x) { return bidder.bid_for(x); });
      CHECK(test::matches(want, got));
    }
  }
}

TEST_CASE("synthetic generation is reproducible and calibrated") {
  GeneratorSpec spec;
  spec.dimension = 500;
  spec.records = 20000;
  spec.features_per_record = 8;
  const SyntheticLog a = generate_synthetic(spec, 77);
  const SyntheticLog b = generate_synthetic(spec, 77);
  CHECK(a.true_weights == b.true_weights);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].click == b.records[i].click);
    CHECK(a.records[i].market_price == b.records[i].market_price);
    CHECK(a.records[i].features.indices == b.records[i].features.indices);
  }

  // Empirical CTR within 3 binomial sigmas of the generator's mean CTR.
  double mean_ctr = 0.0, clicks = 0.0;
  for (const LogRecord& rec : a.records) {
    double s = 0.0;
    for (std::uint32_t i : rec.features.indices) s += a.true_weights[i];
    mean_ctr += sigmoid(s);
    clicks += rec.click;
  }
  mean_ctr /= static_cast<double>(a.records.size());
  const double se = std::sqrt(mean_ctr * (1.0 - mean_ctr) /
                              static_cast<double>(a.records.size()));
  CHECK(std::abs(clicks / static_cast<double>(a.records.size()) - mean_ctr) <
        3.0 * se);

  CHECK_THROWS_AS((void)generate_synthetic(GeneratorSpec{.dimension = 4,
                                                         .features_per_record = 5},
                                           1),
                  InvalidInput);
}

TEST_CASE("popularity skew produces larger posterior variance on rare features") {
  GeneratorSpec spec;
  spec.dimension = 2000;
  spec.records = 30000;
  spec.features_per_record = 10;
  spec.popularity_exponent = 1.1;
  const SyntheticLog log = generate_synthetic(spec, 101);

  GaussianWeightModel model(spec.dimension, 0.0, 1.0);
  TrainConfig tc;
  train(model, log.records, tc);

  // Rank records by the rarity of their rarest feature (highest id under the
  // Zipf layout) and compare posterior variances between the extremes.
  std::vector<std::pair<std::uint32_t, double>> rarity_s2;
  for (const LogRecord& rec : log.records) {
    const std::uint32_t rarest = rec.features.indices.back();
    rarity_s2.emplace_back(rarest, model.posterior_params(rec.features).s2);
  }
  std::sort(rarity_s2.begin(), rarity_s2.end());
  const std::size_t decile = rarity_s2.size() / 10;
  double common = 0.0, rare = 0.0;
  for (std::size_t i = 0; i < decile; ++i) {
    common += rarity_s2[i].second;
    rare += rarity_s2[rarity_s2.size() - 1 - i].second;
  }
  CHECK(rare / decile > 1.1 * (common / decile));
}

TEST_CASE("click value derives from the training eCPC") {
  auto rows = fixture(4, {{1, 20.0, {0}}, {0, 5.0, {1}}, {1, 10.0, {2}},
                          {0, 5.0, {3}}, {0, 10.0, {0}}});
  // 5 records, 2 clicks, total price 50 -> eCPC 25.
  CHECK(click_value_from_training(rows, 1.0) == doctest::Approx(25.0));
  CHECK(click_value_from_training(rows, 0.5) == doctest::Approx(12.5));
  CHECK_THROWS_AS((void)click_value_from_training(rows, 0.0), InvalidInput);

  auto no_clicks = fixture(2, {{0, 5.0, {0}}});
  CHECK_THROWS_AS((void)click_value_from_training(no_clicks, 1.0), InsufficientData);
}

TEST_CASE("log files round-trip and reject malformed rows") {
  test::TempDir dir("log");
  auto rows = fixture(6, {{1, 12.5, {0, 3}}, {0, 7.0, {1, 2, 5}}});
  write_log(dir.file("a.tsv"), rows, 6);
  const auto loaded = read_log(dir.file("a.tsv"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].features.dimension == 6);
  CHECK(loaded[0].click == 1);
  CHECK(loaded[0].market_price == 12.5);
  CHECK(loaded[1].features.indices == std::vector<std::uint32_t>{1, 2, 5});

  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir.file(name));
    out << text;
  };

  write_text("neg.tsv", "0\t5\t1 2\n1\t-3\t0\n");
  CHECK_THROWS_WITH_AS((void)read_log(dir.file("neg.tsv")),
                       doctest::Contains(":2:"), ParseError);

  write_text("label.tsv", "2\t5\t1\n");
  CHECK_THROWS_AS((void)read_log(dir.file("label.tsv")), ParseError);

  write_text("empty_feats.tsv", "0\t5\t\n");
  CHECK_THROWS_AS((void)read_log(dir.file("empty_feats.tsv")), ParseError);

  write_text("fields.tsv", "0\t5\n");
  CHECK_THROWS_AS((void)read_log(dir.file("fields.tsv")), ParseError);

  CHECK_THROWS_AS((void)read_log(dir.file("missing.tsv")), IoError);
}

TEST_CASE("raw log conversion assigns dense first-appearance ids") {
  test::TempDir dir("convert");
  {
    std::ofstream raw(dir.file("raw.tsv"));
    raw << "1\t33\tchrome\tlondon\n";
    raw << "0\t21\tfirefox\tlondon\n";
    raw << "0\t8\tchrome\tparis\n";
  }
  ConvertSpec spec;
  spec.click_col = 0;
  spec.price_col = 1;
  spec.feature_cols = {2, 3};
  Vocabulary vocab;
  const auto stats = convert_log(dir.file("raw.tsv"), dir.file("norm.tsv"), spec, vocab);
  CHECK(stats.records == 3);
  CHECK(stats.dimension == 4);  // chrome, london, firefox, paris

  const auto records = read_log(dir.file("norm.tsv"));
  REQUIRE(records.size() == 3);
  CHECK(records[0].features.indices == std::vector<std::uint32_t>{0, 1});
  CHECK(records[1].features.indices == std::vector<std::uint32_t>{1, 2});
  CHECK(records[2].features.indices == std::vector<std::uint32_t>{0, 3});

  // Extending the vocabulary keeps ids stable across files.
  {
    std::ofstream raw(dir.file("raw2.tsv"));
    raw << "0\t11\tsafari\tlondon\n";
  }
  const auto stats2 = convert_log(dir.file("raw2.tsv"), dir.file("norm2.tsv"), spec, vocab);
  CHECK(stats2.dimension == 5);
  const auto records2 = read_log(dir.file("norm2.tsv"));
  CHECK(records2[0].features.indices == std::vector<std::uint32_t>{1, 4});

  vocab.save(dir.file("vocab.tsv"));
  const Vocabulary loaded = Vocabulary::load(dir.file("vocab.tsv"));
  CHECK(loaded.size() == 5);
  CHECK(loaded.names() == vocab.names());
}
