#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "riskbid/ctr_model.hpp"
#include "riskbid/log.hpp"
#include "riskbid/strategies.hpp"

namespace riskbid {

/// Aggregates of one replay run. Ratio fields are null (absent) when their
/// denominator is zero.
struct ReplayMetrics {
  std::uint64_t bids = 0;     // records with a strictly positive bid price
  std::uint64_t wins = 0;     // impressions
  std::uint64_t clicks = 0;
  std::uint64_t records_consumed = 0;
  double cost = 0.0;
  double revenue = 0.0;
  double profit = 0.0;
  std::optional<double> roi;       // profit / cost
  std::optional<double> cpm;       // 1000 * cost / wins
  std::optional<double> ctr;       // clicks / wins
  std::optional<double> ecpc;      // cost / clicks
  std::optional<double> win_rate;  // wins / bids

  /// Fills the derived ratio fields from the counters.
  void finalize();

  bool operator==(const ReplayMetrics&) const = default;
};

struct ReplayConfig {
  StrategyConfig strategy;
  std::optional<double> budget;  // currency; absent = unconstrained

  void validate() const;
};

/// Post-hoc CTR recalibration hook (for, e.g., negative down-sampled
/// training data). Null means identity.
using CtrCalibration = std::function<double(double)>;

/// Deterministic per-request bid computation for one strategy over immutable
/// model artifacts. VaR reads CTR moments from the lookup table when one is
/// supplied, otherwise integrates directly; RMP reads the bid table when
/// supplied, otherwise runs the grid argmax against the market model. A
/// recalibration hook, when set, maps the CTR estimate (LR) or the CTR mean
/// (VaR) before the bid formula.
class Bidder {
 public:
  Bidder(StrategyConfig cfg, const GaussianWeightModel& model,
         const MomentTable* moments = nullptr, const RmpBidTable* rmp = nullptr,
         const MarketPriceModel* market = nullptr,
         std::optional<BidGrid> grid = std::nullopt, int quadrature_panels = 1001,
         CtrCalibration recalibrate = nullptr);

  double bid_for(const FeatureVector& x) const;

  const StrategyConfig& config() const { return cfg_; }

 private:
  StrategyConfig cfg_;
  const GaussianWeightModel* model_;
  const MomentTable* moments_;
  const RmpBidTable* rmp_;
  const MarketPriceModel* market_;
  BidGrid grid_;
  int quadrature_panels_;
  CtrCalibration recalibrate_;
};

/// Replays logged second-price auctions in order: win iff bid > market price
/// (strict), pay the market price, earn v per observed click. A would-be win
/// whose payment exceeds the remaining budget is voided and ends the replay.
/// No RNG anywhere in the loop.
ReplayMetrics replay(const std::vector<LogRecord>& dataset,
                     const ReplayConfig& cfg, const Bidder& bidder);

/// Synthetic log generator for closed-loop tests: popularity-skewed sparse
/// features, clicks from a known true weight vector, log-normal prices.
struct GeneratorSpec {
  std::uint32_t dimension = 10000;
  std::uint64_t records = 10000;
  std::uint32_t features_per_record = 15;
  double weight_mean = -0.15;   // true weights ~ N(weight_mean, weight_std^2)
  double weight_std = 0.4;
  double popularity_exponent = 1.1;  // feature i drawn with mass ~ (i+1)^-s
  double market_mu = 4.0;
  double market_sigma = 0.5;

  void validate() const;
};

struct SyntheticLog {
  std::vector<LogRecord> records;
  std::vector<double> true_weights;
};

SyntheticLog generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

/// Click value from the training log: proportion x (total market cost over
/// all records / total clicks), the dataset eCPC convention.
double click_value_from_training(const std::vector<LogRecord>& training,
                                 double proportion);

}  // namespace riskbid
