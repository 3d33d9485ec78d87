#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "riskbid/ctr_distribution.hpp"
#include "riskbid/errors.hpp"

namespace riskbid {

/// Sparse binary feature vector: the set of active one-hot ids (implicit
/// value 1) inside a feature space of the given dimension.
struct FeatureVector {
  std::vector<std::uint32_t> indices;  // unique, ascending
  std::uint32_t dimension = 0;

  /// Normalizes (sorts, dedups) and validates indices < dimension.
  static FeatureVector of(std::vector<std::uint32_t> indices, std::uint32_t dimension);

  bool empty() const { return indices.empty(); }
};

struct LogRecord;  // log.hpp

struct TrainConfig {
  double eta = 0.01;
  int epochs = 1;
  /// Shuffle record order per epoch when set; absent keeps logged order.
  std::optional<std::uint64_t> shuffle_seed;
  /// SGD steps of the per-instance MAP objective before each precision
  /// update. 1 is the default online pass; larger values approach the full
  /// inner MAP solve.
  int map_iterations = 1;

  void validate() const;
};

/// Diagonal-Gaussian posterior over logistic regression weights, updated
/// sequentially with a Laplace approximation per observed instance. Features
/// never touched by an update read the prior (mu0, q0) and use no memory.
///
/// Training is single-writer and sequential; after training the model is
/// immutable and safe for concurrent reads.
class GaussianWeightModel {
 public:
  GaussianWeightModel(std::uint32_t dimension, double mu0, double q0);

  /// Warm start from a plain logistic regression point estimate: mu gets the
  /// point weights, every precision starts at q0.
  static GaussianWeightModel from_point_estimate(std::span<const double> weights,
                                                 double q0);

  double mu(std::uint32_t i) const;
  double q(std::uint32_t i) const;
  std::uint32_t dimension() const { return dimension_; }
  double mu0() const { return mu0_; }
  double q0() const { return q0_; }
  std::size_t materialized_count() const { return weights_.size(); }

  /// Point CTR: sigmoid of the posterior-mean score.
  double predict_point(const FeatureVector& x) const;

  /// (m, s2) of the score sum over active features: m = sum mu_i,
  /// s2 = sum 1/q_i.
  CtrPosterior posterior_params(const FeatureVector& x) const;

  /// One online step: mean SGD step and precision increment, both evaluated
  /// at the pre-step mean. No-op when x has no active features.
  void update(const FeatureVector& x, int click, double eta);

  /// Direct posterior write; materializes the feature.
  void set_weight(std::uint32_t i, double mu, double q);

  /// Checkpoint: header line `dimension<TAB>mu0<TAB>q0`, then one line per
  /// materialized feature `id<TAB>mu<TAB>q`, ids ascending, decimals with 17
  /// significant digits.
  void save(const std::filesystem::path& path) const;
  static GaussianWeightModel load(const std::filesystem::path& path);

 private:
  struct Weight {
    double mu;
    double q;
  };

  void check_indices(const FeatureVector& x) const;
  Weight read(std::uint32_t i) const;

  std::uint32_t dimension_;
  double mu0_;
  double q0_;
  std::unordered_map<std::uint32_t, Weight> weights_;
};

/// Sequential SGD over the dataset, one pass per epoch, optionally shuffled
/// per epoch by the config seed. Deterministic given (dataset, config).
void train(GaussianWeightModel& model, const std::vector<LogRecord>& dataset,
           const TrainConfig& cfg);

}  // namespace riskbid
