#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riskbid/errors.hpp"

namespace riskbid {

/// Parameters of the predicted-CTR density for one bid request: the CTR is
/// sigmoid(a) with a ~ N(m, s2), where m and s2 are the posterior mean and
/// variance of the active weights' sum.
struct CtrPosterior {
  double m;
  double s2;

  CtrPosterior(double m_, double s2_) : m(m_), s2(s2_) {
    if (!std::isfinite(m) || !(s2 > 0.0) || !std::isfinite(s2)) {
      throw InvalidInput("CtrPosterior requires finite m and s2 > 0");
    }
  }
};

/// Density of the predicted CTR at yhat in (0, 1):
///   pdf(y) = exp(-(logit(y) - m)^2 / (2 s2)) / ((y - y^2) sqrt(2 pi s2)).
double ctr_pdf(const CtrPosterior& p, double yhat);

struct CtrMoments {
  double mean = 0.0;
  double stddev = 0.0;

  double second_moment() const { return stddev * stddev + mean * mean; }
};

/// Deterministic moments of the predicted CTR by composite quadrature of
/// sigmoid(u) against N(m, s2) on the logit scale. panels >= 100.
CtrMoments moments_quadrature(const CtrPosterior& p, int panels = 10000);

/// Monte-Carlo moments: n draws of sigmoid(N(m, s2)); population std.
CtrMoments moments_mc(const CtrPosterior& p, std::size_t n, std::uint64_t seed);

/// Integral of ctr_pdf over (0, 1), evaluated through the logit change of
/// variables so extreme (m, s2) tails are resolved. Should be 1 for a
/// correctly implemented density.
double ctr_pdf_mass(const CtrPosterior& p, int panels = 100000);

enum class MomentMethod : std::uint8_t { kQuadrature = 0, kMonteCarlo = 1 };

std::string to_string(MomentMethod method);
MomentMethod moment_method_from_string(const std::string& name);

/// Uniform grid over one table axis; cell i covers
/// [min + i*w, min + (i+1)*w) with w = (max - min) / bins.
struct GridSpec {
  double min = 0.0;
  double max = 1.0;
  std::uint32_t bins = 1;

  void validate(const char* what) const;
  double width() const { return (max - min) / bins; }
  double center(std::uint32_t i) const { return min + (i + 0.5) * width(); }
  /// Clamping index of the cell whose center is nearest to x.
  std::uint32_t index_for(double x) const;
};

/// Precomputed (E[ctr], std[ctr]) per (m, s2) cell; the offline table read
/// with O(1) cost at bid time. Immutable after build, safe for concurrent
/// reads.
class MomentTable {
 public:
  /// Builds one cell per grid point at the cell center. Parallel across
  /// cells; per-cell RNG streams are derived from `seed` and the cell index,
  /// so the result does not depend on the schedule. With kQuadrature,
  /// samples_per_cell is used as the panel count.
  static MomentTable build(const GridSpec& m_grid, const GridSpec& s2_grid,
                           std::uint32_t samples_per_cell, std::uint64_t seed,
                           MomentMethod method = MomentMethod::kQuadrature,
                           unsigned threads = 0);

  /// Nearest-cell read; out-of-range keys clamp to edge cells.
  CtrMoments lookup(double m, double s2) const;

  CtrMoments cell(std::uint32_t mi, std::uint32_t si) const;

  const GridSpec& m_grid() const { return m_grid_; }
  const GridSpec& s2_grid() const { return s2_grid_; }
  std::uint32_t samples_per_cell() const { return samples_per_cell_; }
  std::uint64_t seed() const { return seed_; }
  MomentMethod method() const { return method_; }

  /// RBMT1 file: magic line, text header with grid parameters and seed,
  /// then bins_m x bins_s2 cells of (E, std) as little-endian float64 pairs
  /// in row-major m-then-s2 order.
  void save(const std::filesystem::path& path) const;
  static MomentTable load(const std::filesystem::path& path);

 private:
  MomentTable() = default;

  GridSpec m_grid_;
  GridSpec s2_grid_;
  std::uint32_t samples_per_cell_ = 0;
  std::uint64_t seed_ = 0;
  MomentMethod method_ = MomentMethod::kQuadrature;
  std::vector<double> cells_;  // 2 doubles per cell: mean, std
};

}  // namespace riskbid
