#include "riskbid/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "riskbid/math_util.hpp"
#include "riskbid/rng.hpp"

namespace riskbid {

void ReplayMetrics::finalize() {
  profit = revenue - cost;
  roi = cost > 0.0 ? std::optional<double>(profit / cost) : std::nullopt;
  cpm = wins > 0 ? std::optional<double>(1000.0 * cost / static_cast<double>(wins))
                 : std::nullopt;
  ctr = wins > 0 ? std::optional<double>(static_cast<double>(clicks) /
                                         static_cast<double>(wins))
                 : std::nullopt;
  ecpc = clicks > 0 ? std::optional<double>(cost / static_cast<double>(clicks))
                    : std::nullopt;
  win_rate = bids > 0 ? std::optional<double>(static_cast<double>(wins) /
                                              static_cast<double>(bids))
                      : std::nullopt;
}

void ReplayConfig::validate() const {
  strategy.validate();
  if (budget && !(*budget > 0.0)) {
    throw InvalidInput("ReplayConfig: budget must be > 0 when set");
  }
}

Bidder::Bidder(StrategyConfig cfg, const GaussianWeightModel& model,
               const MomentTable* moments, const RmpBidTable* rmp,
               const MarketPriceModel* market, std::optional<BidGrid> grid,
               int quadrature_panels, CtrCalibration recalibrate)
    : cfg_(cfg),
      model_(&model),
      moments_(moments),
      rmp_(rmp),
      market_(market),
      grid_(grid.value_or(BidGrid::for_value(cfg.v))),
      quadrature_panels_(quadrature_panels),
      recalibrate_(std::move(recalibrate)) {
  cfg_.validate();
  if (cfg_.kind == StrategyKind::kRmp && rmp_ == nullptr && market_ == nullptr) {
    throw InvalidInput("RMP bidder needs a bid table or a market model");
  }
}

double Bidder::bid_for(const FeatureVector& x) const {
  switch (cfg_.kind) {
    case StrategyKind::kLr: {
      double ctr = model_->predict_point(x);
      if (recalibrate_) ctr = recalibrate_(ctr);
      return bid_lr(ctr, cfg_);
    }
    case StrategyKind::kVar: {
      const CtrPosterior p = model_->posterior_params(x);
      CtrMoments moments = moments_ != nullptr
                               ? moments_->lookup(p.m, p.s2)
                               : moments_quadrature(p, quadrature_panels_);
      if (recalibrate_) moments.mean = recalibrate_(moments.mean);
      return bid_var(moments.mean, moments.stddev, cfg_);
    }
    case StrategyKind::kRmp: {
      const CtrPosterior p = model_->posterior_params(x);
      if (rmp_ != nullptr) return cfg_.phi * rmp_->lookup(p.m, p.s2);
      const CtrMoments moments = moments_quadrature(p, quadrature_panels_);
      return bid_rmp(moments, cfg_, *market_, grid_);
    }
  }
  throw InvalidInput("unknown strategy kind");
}

ReplayMetrics replay(const std::vector<LogRecord>& dataset,
                     const ReplayConfig& cfg, const Bidder& bidder) {
  cfg.validate();
  ReplayMetrics m;
  double remaining = cfg.budget.value_or(0.0);
  const bool budgeted = cfg.budget.has_value();

  for (const LogRecord& rec : dataset) {
    ++m.records_consumed;
    const double bid = bidder.bid_for(rec.features);
    if (bid > 0.0) ++m.bids;
    if (bid > rec.market_price) {
      if (budgeted && rec.market_price > remaining) {
        // Voided win: paying would overspend, so the replay ends here.
        break;
      }
      ++m.wins;
      m.cost += rec.market_price;
      if (budgeted) remaining -= rec.market_price;
      if (rec.click == 1) {
        ++m.clicks;
        m.revenue += cfg.strategy.v;
      }
    }
  }
  m.finalize();
  return m;
}

void GeneratorSpec::validate() const {
  if (dimension < 1 || records < 1) {
    throw InvalidInput("GeneratorSpec: dimension and records must be >= 1");
  }
  if (features_per_record < 1 || features_per_record > dimension) {
    throw InvalidInput("GeneratorSpec: features_per_record must be in [1, dimension]");
  }
  if (!(weight_std >= 0.0)) throw InvalidInput("GeneratorSpec: weight_std must be >= 0");
  if (!(market_sigma > 0.0)) throw InvalidInput("GeneratorSpec: market_sigma must be > 0");
  if (!(popularity_exponent >= 0.0)) {
    throw InvalidInput("GeneratorSpec: popularity_exponent must be >= 0");
  }
}

SyntheticLog generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  SyntheticLog out;
  out.true_weights.resize(spec.dimension);
  for (double& w : out.true_weights) {
    w = rng.normal(spec.weight_mean, spec.weight_std);
  }

  // Zipf-like popularity: feature i has mass proportional to (i+1)^-s.
  std::vector<double> cdf(spec.dimension);
  double acc = 0.0;
  for (std::uint32_t i = 0; i < spec.dimension; ++i) {
    acc += std::pow(static_cast<double>(i) + 1.0, -spec.popularity_exponent);
    cdf[i] = acc;
  }
  for (double& c : cdf) c /= acc;

  auto draw_feature = [&]() -> std::uint32_t {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return it == cdf.end() ? spec.dimension - 1
                           : static_cast<std::uint32_t>(it - cdf.begin());
  };

  out.records.reserve(spec.records);
  std::vector<std::uint32_t> ids;
  for (std::uint64_t r = 0; r < spec.records; ++r) {
    ids.clear();
    // Distinct draws by rejection; bail out to the first unused ids if the
    // head of the distribution is too concentrated to finish.
    std::size_t attempts = 0;
    while (ids.size() < spec.features_per_record) {
      const std::uint32_t candidate = draw_feature();
      if (std::find(ids.begin(), ids.end(), candidate) == ids.end()) {
        ids.push_back(candidate);
      }
      if (++attempts > 64ull * spec.features_per_record) {
        for (std::uint32_t i = 0; ids.size() < spec.features_per_record; ++i) {
          if (std::find(ids.begin(), ids.end(), i) == ids.end()) ids.push_back(i);
        }
      }
    }
    LogRecord rec;
    rec.features = FeatureVector::of(ids, spec.dimension);
    double score = 0.0;
    for (std::uint32_t i : rec.features.indices) score += out.true_weights[i];
    rec.click = rng.uniform() < sigmoid(score) ? 1 : 0;
    rec.market_price = std::exp(rng.normal(spec.market_mu, spec.market_sigma));
    out.records.push_back(std::move(rec));
  }
  return out;
}

double click_value_from_training(const std::vector<LogRecord>& training,
                                 double proportion) {
  const std::uint64_t clicks = total_clicks(training);
  if (clicks == 0) {
    throw InsufficientData("click_value_from_training: no clicks in training log");
  }
  const double v =
      proportion * total_cost(training) / static_cast<double>(clicks);
  if (!(v > 0.0)) {
    throw InvalidInput("click_value_from_training: derived v must be > 0");
  }
  return v;
}

}  // namespace riskbid
