#include <benchmark/benchmark.h>

#include "riskbid/ctr_distribution.hpp"
#include "riskbid/ctr_model.hpp"
#include "riskbid/market.hpp"
#include "riskbid/rng.hpp"
#include "riskbid/simulator.hpp"
#include "riskbid/strategies.hpp"

using namespace riskbid;

namespace {

SyntheticLog make_log(std::uint64_t records) {
  GeneratorSpec spec;
  spec.dimension = 20000;
  spec.records = records;
  spec.features_per_record = 15;
  return generate_synthetic(spec, 7);
}

GaussianWeightModel make_model(const SyntheticLog& log, std::uint32_t dimension) {
  GaussianWeightModel model(dimension, 0.0, 1.0);
  TrainConfig tc;
  tc.eta = 0.05;
  train(model, log.records, tc);
  return model;
}

}  // namespace

static void BM_Update(benchmark::State& state) {
  const SyntheticLog log = make_log(20000);
  GaussianWeightModel model(20000, 0.0, 1.0);
  std::size_t i = 0;
  for (auto _ : state) {
    const LogRecord& rec = log.records[i++ % log.records.size()];
    model.update(rec.features, rec.click, 0.05);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Update);

static void BM_PosteriorParams(benchmark::State& state) {
  const SyntheticLog log = make_log(20000);
  const GaussianWeightModel model = make_model(log, 20000);
  std::size_t i = 0;
  for (auto _ : state) {
    const LogRecord& rec = log.records[i++ % log.records.size()];
    benchmark::DoNotOptimize(model.posterior_params(rec.features));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PosteriorParams);

static void BM_MomentsQuadrature(benchmark::State& state) {
  const CtrPosterior p(-1.0, 1.0 / 3.0);
  const int panels = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(moments_quadrature(p, panels));
  }
}
BENCHMARK(BM_MomentsQuadrature)->Arg(1000)->Arg(10000);

static void BM_MomentsMc(benchmark::State& state) {
  const CtrPosterior p(-1.0, 1.0 / 3.0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(moments_mc(p, 1000, seed++));
  }
}
BENCHMARK(BM_MomentsMc);

static void BM_MomentTableLookup(benchmark::State& state) {
  const MomentTable table =
      MomentTable::build(GridSpec{-6.0, 2.0, 1000}, GridSpec{0.01, 3.0, 1000}, 500, 3);
  Rng rng(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(table.lookup(rng.normal(-1.0, 2.0), 0.01 + rng.uniform()));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MomentTableLookup);

static void BM_MomentTableBuild(benchmark::State& state) {
  const auto bins = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(MomentTable::build(
        GridSpec{-6.0, 2.0, bins}, GridSpec{0.01, 3.0, bins}, 1000, 3,
        MomentMethod::kMonteCarlo));
  }
  state.SetItemsProcessed(state.iterations() * bins * bins);
}
BENCHMARK(BM_MomentTableBuild)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_RmpTableBuild(benchmark::State& state) {
  const auto bins = static_cast<std::uint32_t>(state.range(0));
  const MarketPriceModel market = MarketPriceModel::lognormal(4.0, 0.5);
  const BidGrid grid = BidGrid::for_value(300.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(RmpBidTable::build(GridSpec{-6.0, 2.0, bins},
                                                GridSpec{0.01, 3.0, bins}, grid,
                                                1.0, 300.0, market, 500, 3));
  }
  state.SetItemsProcessed(state.iterations() * bins * bins);
}
BENCHMARK(BM_RmpTableBuild)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_Replay(benchmark::State& state) {
  const SyntheticLog log = make_log(50000);
  const GaussianWeightModel model = make_model(log, 20000);
  const double v = click_value_from_training(log.records, 1.0);
  GridSpec mg{-8.0, 2.0, 500}, sg{0.01, 3.0, 500};
  const MomentTable moments = MomentTable::build(mg, sg, 500, 5);
  StrategyConfig sc;
  sc.kind = StrategyKind::kVar;
  sc.alpha = 0.5;
  sc.v = v;
  const Bidder bidder(sc, model, &moments);
  ReplayConfig cfg;
  cfg.strategy = sc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(replay(log.records, cfg, bidder));
  }
  state.SetItemsProcessed(state.iterations() * log.records.size());
}
BENCHMARK(BM_Replay)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
