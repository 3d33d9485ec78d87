#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskbid/ctr_distribution.hpp"
#include "riskbid/errors.hpp"
#include "riskbid/market.hpp"
#include "riskbid/strategies.hpp"

namespace riskbid {

/// Full experiment description, parsed from a sectioned key = value file.
/// The master seed is mandatory; every stochastic stage derives from it.
struct ExperimentConfig {
  // [paths]
  std::filesystem::path train_log;
  std::filesystem::path validation_log;
  std::filesystem::path test_log;
  std::filesystem::path artifact_dir;

  // [model]
  double eta = 0.01;
  int epochs = 1;
  double q0 = 1.0;
  double mu0 = 0.0;
  bool shuffle = false;
  int map_iterations = 1;
  std::optional<std::filesystem::path> warm_start_checkpoint;

  // [market]
  MarketKind market_kind = MarketKind::kLognormal;

  // [tables]
  std::uint32_t table_bins_m = 1000;
  std::uint32_t table_bins_s2 = 1000;
  std::uint32_t table_samples = 10000;
  MomentMethod table_method = MomentMethod::kQuadrature;
  /// Grid ranges; when absent they are fitted to the 0.1%-99.9% percentiles
  /// of the training data's (m, s2) under the trained model.
  std::optional<double> table_m_min, table_m_max;
  std::optional<double> table_s2_min, table_s2_max;
  double bid_grid_max_factor = 3.0;  // grid spans [0, factor*v]
  std::uint32_t bid_grid_steps = 1000;

  // [strategies]
  std::vector<StrategyKind> strategies{StrategyKind::kLr, StrategyKind::kVar,
                                       StrategyKind::kRmp};
  std::vector<double> alpha_grid{-2.0, -1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0, 2.0};
  /// Empty phi grid = default 13 log-spaced points 2^-6 .. 2^6.
  std::vector<double> phi_grid;
  double click_value_proportion = 1.0;
  std::optional<double> click_value_override;

  // [selection]
  std::vector<double> lambdas{0.0, 0.2, 0.4};

  // [budget]
  std::vector<double> budget_fractions;  // e.g. 0.5, 0.25, ...; none always runs

  // [run]
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 0;

  void validate() const;

  /// Grids actually swept for a strategy kind: LR has no alpha; phi is tuned
  /// only under a budget (a truth-telling bidder keeps phi = 1 otherwise).
  std::vector<double> alphas_for(StrategyKind kind) const;
  std::vector<double> phis_for(bool budgeted) const;
  std::vector<double> effective_phi_grid() const;

  /// Canonical serialization (sorted key = value lines) and its FNV-1a hash;
  /// the hash is the experiment id.
  std::string canonical_text() const;
  std::string digest_hex() const;
};

ExperimentConfig parse_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::string& origin);

/// Applies one `section.key=value` override on top of a parsed config (the
/// CLI's --set flag).
void apply_config_override(ExperimentConfig& cfg, const std::string& assignment);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace riskbid
