#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskbid/simulator.hpp"

namespace riskbid {

enum class Split : std::uint8_t { kValidation = 0, kTest = 1 };

std::string to_string(Split split);

/// One replay outcome inside a parameter sweep.
struct SweepPoint {
  double alpha = 0.0;
  double phi = 1.0;
  Split split = Split::kValidation;
  ReplayMetrics metrics;
};

/// Cost-penalized profit, the model-selection metric: profit - lambda * cost.
double cp_profit(double profit, double cost, double lambda);

/// Budget ladder for constrained runs: fractions of a split's total logged
/// cost (the replay base).
struct BudgetSpec {
  std::vector<double> fractions;  // each in (0, 1]
  double base = 0.0;              // the split's total market cost

  void validate() const;
  double absolute(double fraction) const { return fraction * base; }
};

struct SweepGrids {
  std::vector<double> alphas{1, 0.0};
  std::vector<double> phis{1, 1.0};
};

/// Replays each (alpha, phi) cell on the given split. Parallel across cells;
/// results are ordered by grid position regardless of scheduling.
std::vector<SweepPoint> sweep(
    const std::vector<LogRecord>& data, Split split, const SweepGrids& grids,
    std::optional<double> budget,
    const std::function<Bidder(double alpha, double phi)>& make_bidder,
    unsigned threads = 0);

/// Index of the point maximizing cp_profit; ties go to the lower cost, then
/// to the earlier point. Equivalent to the tangent construction on the
/// cost-profit plot.
std::size_t select_model(const std::vector<SweepPoint>& points, double lambda);

/// Flags each point that is dominated: some other point has profit >= and
/// cost <= with at least one strict.
std::vector<bool> dominance(const std::vector<SweepPoint>& points);

}  // namespace riskbid
