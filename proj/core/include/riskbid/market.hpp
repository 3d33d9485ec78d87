#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "riskbid/errors.hpp"
#include "riskbid/rng.hpp"

namespace riskbid {

enum class MarketKind : std::uint8_t { kLognormal = 0, kEmpirical = 1 };

std::string to_string(MarketKind kind);
MarketKind market_kind_from_string(const std::string& name);

/// Distribution of the winning price z in a second-price auction, either a
/// log-normal fit or a normalized histogram of integer-rounded prices.
/// Immutable after construction; concurrent reads are safe.
class MarketPriceModel {
 public:
  /// Log-normal MLE on the strictly positive prices: mu_z, sigma_z are the
  /// mean and (population) std of ln z. Non-positive prices are dropped.
  static MarketPriceModel fit_lognormal(std::span<const double> prices);

  /// Normalized histogram with unit integer bins; each price is an atom at
  /// its nearest integer. z_max is the largest observed price.
  static MarketPriceModel fit_empirical(std::span<const double> prices);

  /// Direct log-normal construction, bypassing a fit.
  static MarketPriceModel lognormal(double mu_z, double sigma_z);

  /// Partial moment z_k = integral of z^k p_z(z) dz over [0, b), k in {0,1,2}.
  /// z_0 is the win probability P(z < b).
  double partial_moment(double b, int k) const;

  double win_probability(double b) const { return partial_moment(b, 0); }

  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;
  double sample_one(Rng& rng) const;

  MarketKind kind() const { return kind_; }
  double mu_z() const { return mu_z_; }
  double sigma_z() const { return sigma_z_; }
  std::uint64_t sample_count() const { return count_; }
  /// Empirical only: mass per integer bin, indices 0..z_max.
  const std::vector<double>& histogram() const { return histogram_; }

  /// Short content hash tying derived artifacts (RMP tables) to this model.
  std::uint64_t digest() const;

  /// Text serialization, 17-significant-digit decimals.
  void save(const std::filesystem::path& path) const;
  static MarketPriceModel load(const std::filesystem::path& path);

 private:
  MarketPriceModel() = default;

  MarketKind kind_ = MarketKind::kLognormal;
  double mu_z_ = 0.0;
  double sigma_z_ = 1.0;
  std::uint64_t count_ = 0;
  std::vector<double> histogram_;      // empirical: normalized bin masses
  std::vector<double> cum_histogram_;  // empirical: inclusive CDF per bin
};

}  // namespace riskbid
