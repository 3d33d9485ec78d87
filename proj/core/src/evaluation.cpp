#include "riskbid/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "riskbid/parallel.hpp"

namespace riskbid {

std::string to_string(Split split) {
  return split == Split::kValidation ? "validation" : "test";
}

double cp_profit(double profit, double cost, double lambda) {
  if (cost < 0.0) throw InvalidInput("cp_profit: cost must be >= 0");
  return profit - lambda * cost;
}

void BudgetSpec::validate() const {
  if (!(base >= 0.0)) throw InvalidInput("BudgetSpec: base must be >= 0");
  for (double f : fractions) {
    if (!(f > 0.0) || f > 1.0) {
      throw InvalidInput("BudgetSpec: fractions must lie in (0, 1]");
    }
  }
}

std::vector<SweepPoint> sweep(
    const std::vector<LogRecord>& data, Split split, const SweepGrids& grids,
    std::optional<double> budget,
    const std::function<Bidder(double alpha, double phi)>& make_bidder,
    unsigned threads) {
  if (grids.alphas.empty() || grids.phis.empty()) {
    throw InvalidInput("sweep: alpha and phi grids must be non-empty");
  }
  const std::size_t n = grids.alphas.size() * grids.phis.size();
  std::vector<SweepPoint> points(n);
  parallel_for(n, threads, [&](std::size_t cell) {
    const double alpha = grids.alphas[cell / grids.phis.size()];
    const double phi = grids.phis[cell % grids.phis.size()];
    SweepPoint& p = points[cell];
    p.alpha = alpha;
    p.phi = phi;
    p.split = split;
    try {
      ReplayConfig cfg;
      const Bidder bidder = make_bidder(alpha, phi);
      cfg.strategy = bidder.config();
      cfg.budget = budget;
      p.metrics = replay(data, cfg, bidder);
    } catch (const std::exception& e) {
      throw InvalidInput("sweep cell (alpha=" + std::to_string(alpha) +
                         ", phi=" + std::to_string(phi) + "): " + e.what());
    }
  });
  return points;
}

std::size_t select_model(const std::vector<SweepPoint>& points, double lambda) {
  if (points.empty()) throw InvalidInput("select_model: no sweep points");
  std::size_t best = 0;
  double best_cp = cp_profit(points[0].metrics.profit, points[0].metrics.cost, lambda);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double cp = cp_profit(points[i].metrics.profit, points[i].metrics.cost, lambda);
    if (cp > best_cp ||
        (cp == best_cp && points[i].metrics.cost < points[best].metrics.cost)) {
      best_cp = cp;
      best = i;
    }
  }
  return best;
}

std::vector<bool> dominance(const std::vector<SweepPoint>& points) {
  const std::size_t n = points.size();
  std::vector<bool> dominated(n, false);
  if (n < 2) return dominated;

  // Sort by cost ascending, profit descending; a prefix point with strictly
  // lower cost and >= profit, or equal cost and strictly higher profit,
  // dominates.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].metrics.cost != points[b].metrics.cost) {
      return points[a].metrics.cost < points[b].metrics.cost;
    }
    return points[a].metrics.profit > points[b].metrics.profit;
  });

  double best_profit_lower_cost = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    const double cost = points[order[i]].metrics.cost;
    const double group_max_profit = points[order[i]].metrics.profit;
    while (j < n && points[order[j]].metrics.cost == cost) {
      const double profit = points[order[j]].metrics.profit;
      dominated[order[j]] =
          best_profit_lower_cost >= profit || group_max_profit > profit;
      ++j;
    }
    best_profit_lower_cost = std::max(best_profit_lower_cost, group_max_profit);
    i = j;
  }
  return dominated;
}

}  // namespace riskbid
