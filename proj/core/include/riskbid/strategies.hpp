#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riskbid/ctr_distribution.hpp"
#include "riskbid/errors.hpp"
#include "riskbid/market.hpp"

namespace riskbid {

enum class StrategyKind : std::uint8_t { kLr = 0, kVar = 1, kRmp = 2 };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

/// Bidding strategy parameters: alpha > 0 is risk-averse, 0 risk-neutral,
/// < 0 risk-seeking; phi scales the bid for budget/volume pacing; v is the
/// advertiser's value per click in currency units.
struct StrategyConfig {
  StrategyKind kind = StrategyKind::kLr;
  double alpha = 0.0;
  double phi = 1.0;
  double v = 0.0;

  void validate() const;
};

/// Enumerated bid range for the RMP argmax: min, min+step, ..., up to max.
struct BidGrid {
  double min = 0.0;
  double max = 0.0;
  double step = 0.0;

  /// Default grid for a click value v: [0, 3v] in 1000 steps.
  static BidGrid for_value(double v);

  void validate() const;
  std::size_t count() const;
  double at(std::size_t i) const { return min + static_cast<double>(i) * step; }
};

/// Linear bidding on the point CTR: b = phi * v * ctr.
double bid_lr(double ctr, const StrategyConfig& cfg);

/// Value-at-risk bidding on the CTR moments: b = phi * v * (mean - alpha*std),
/// clamped at 0 (a non-positive inner value means no bid).
double bid_var(double mean, double stddev, const StrategyConfig& cfg);

/// Closed-form moments of the profit R(b) = (v*ctr - z) * 1{z < b} from the
/// CTR moments and the market partial moments z_0, z_1, z_2:
///   E[R]   = v E[y] z0 - z1
///   E[R^2] = v^2 E[y^2] z0 - 2 v E[y] z1 + z2
struct ProfitMoments {
  double expectation = 0.0;
  double variance = 0.0;
  // inputs echo
  double b = 0.0;
  double v = 0.0;
  double ctr_mean = 0.0;
  double ctr_second_moment = 0.0;
  double z0 = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;

  double stddev() const { return std::sqrt(variance); }
};

ProfitMoments profit_moments(double b, double v, double ctr_mean,
                             double ctr_second_moment,
                             const MarketPriceModel& market);

/// Value-at-risk of profit at bid b: E[R(b)] - alpha * std[R(b)].
double rmp_objective(double b, double alpha, double v, double ctr_mean,
                     double ctr_second_moment, const MarketPriceModel& market);

/// Risk-managed-profit bid: phi times the grid bid maximizing the profit
/// value-at-risk. The no-bid option b=0 (objective exactly 0) is always a
/// candidate, so a grid whose best objective is <= 0 yields 0. Ties break
/// toward the lower bid.
double bid_rmp(const CtrMoments& posterior_moments, const StrategyConfig& cfg,
               const MarketPriceModel& market, const BidGrid& grid);

/// One profit point per enumerated bid, ordered by bid.
struct FrontierPoint {
  double profit_stddev = 0.0;
  double profit_expectation = 0.0;
  double bid = 0.0;
};

std::vector<FrontierPoint> efficient_frontier(const CtrPosterior& posterior,
                                              const MarketPriceModel& market,
                                              double v, const BidGrid& grid);

/// Tangent selection on the frontier at slope alpha: the point maximizing
/// expectation - alpha * std, ties toward the lower bid. Identical by
/// construction to the bid_rmp argmax over the same grid.
std::size_t frontier_tangent(const std::vector<FrontierPoint>& points,
                             double alpha);

/// Probability that a won impression loses money, P(v*ctr < z < b | z < b),
/// by joint Monte-Carlo sampling of the CTR and the market price. Returns 0
/// when no sample wins.
double negative_profit_prob(const CtrPosterior& posterior,
                            const MarketPriceModel& market, double v, double b,
                            std::size_t n, std::uint64_t seed);

/// Precomputed optimal RMP bid per (m, s2) cell. Cells hold the unscaled
/// argmax bid; phi is applied by the caller at lookup time. Immutable after
/// build; concurrent reads are safe.
class RmpBidTable {
 public:
  /// CTR moments per cell by the chosen method (shared across all enumerated
  /// bids, as one sample set per cell suffices), then argmax over the bid
  /// grid against precomputed market partial moments. Parallel per cell,
  /// schedule-independent given `seed`.
  static RmpBidTable build(const GridSpec& m_grid, const GridSpec& s2_grid,
                           const BidGrid& bid_grid, double alpha, double v,
                           const MarketPriceModel& market,
                           std::uint32_t samples_per_cell, std::uint64_t seed,
                           MomentMethod method = MomentMethod::kQuadrature,
                           unsigned threads = 0);

  /// Nearest-cell optimal bid; out-of-range keys clamp to edge cells.
  double lookup(double m, double s2) const;
  double cell(std::uint32_t mi, std::uint32_t si) const;

  const GridSpec& m_grid() const { return m_grid_; }
  const GridSpec& s2_grid() const { return s2_grid_; }
  const BidGrid& bid_grid() const { return bid_grid_; }
  double alpha() const { return alpha_; }
  double v() const { return v_; }
  std::uint64_t seed() const { return seed_; }
  std::uint32_t samples_per_cell() const { return samples_per_cell_; }
  MomentMethod method() const { return method_; }
  std::uint64_t market_digest() const { return market_digest_; }

  /// RBBT1 file: magic line, text header (grids, bid grid, alpha, v, build
  /// metadata, market digest), then little-endian float64 cells in row-major
  /// m-then-s2 order.
  void save(const std::filesystem::path& path) const;
  static RmpBidTable load(const std::filesystem::path& path);

 private:
  RmpBidTable() = default;

  GridSpec m_grid_;
  GridSpec s2_grid_;
  BidGrid bid_grid_;
  double alpha_ = 0.0;
  double v_ = 0.0;
  std::uint32_t samples_per_cell_ = 0;
  std::uint64_t seed_ = 0;
  MomentMethod method_ = MomentMethod::kQuadrature;
  std::uint64_t market_digest_ = 0;
  std::vector<double> cells_;
};

}  // namespace riskbid
