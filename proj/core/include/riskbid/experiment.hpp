#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "riskbid/config.hpp"
#include "riskbid/evaluation.hpp"

namespace riskbid {

/// One (strategy, budget) sweep over the validation split.
struct SweepCell {
  StrategyKind strategy = StrategyKind::kLr;
  std::optional<double> budget_fraction;
  std::vector<SweepPoint> points;
};

/// Validation-selected model for one lambda, with its test replay.
struct Selection {
  StrategyKind strategy = StrategyKind::kLr;
  std::optional<double> budget_fraction;
  double lambda = 0.0;
  double alpha = 0.0;
  double phi = 1.0;
  ReplayMetrics validation;
  ReplayMetrics test;
};

/// Stage-by-stage experiment pipeline. Every stage reads its inputs from the
/// config paths or the artifact directory and writes its outputs back there,
/// so `run_all` and the equivalent CLI command sequence produce identical
/// bytes. All randomness derives from the one master seed.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig cfg);

  void run_train();
  void run_fit_market();
  void run_build_tables();
  void run_sweep();
  void run_report();
  void run_all();

  const ExperimentConfig& config() const { return cfg_; }

  std::filesystem::path checkpoint_path() const;
  std::filesystem::path market_path() const;
  std::filesystem::path moment_table_path() const;
  std::filesystem::path rmp_table_path(std::size_t alpha_index) const;
  std::filesystem::path sweep_points_path() const;
  std::filesystem::path report_json_path() const;
  std::filesystem::path report_csv_path() const;

  /// Click value used throughout: the config override or the training-data
  /// eCPC scaled by the configured proportion.
  double click_value() const;

 private:
  ExperimentConfig cfg_;
};

/// Fits table grid ranges to the (m, s2) values the model produces on the
/// data: 0.1%-99.9% percentiles, slightly widened. Out-of-range keys clamp.
void fit_grid_ranges(const GaussianWeightModel& model,
                     const std::vector<LogRecord>& data, GridSpec& m_grid,
                     GridSpec& s2_grid);

}  // namespace riskbid
