#include "riskbid/ctr_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "riskbid/log.hpp"
#include "riskbid/math_util.hpp"
#include "riskbid/rng.hpp"

namespace riskbid {

FeatureVector FeatureVector::of(std::vector<std::uint32_t> indices,
                                std::uint32_t dimension) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (!indices.empty() && indices.back() >= dimension) {
    throw InvalidInput("feature index " + std::to_string(indices.back()) +
                       " out of dimension " + std::to_string(dimension));
  }
  FeatureVector x;
  x.indices = std::move(indices);
  x.dimension = dimension;
  return x;
}

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw InvalidInput("TrainConfig: eta must be > 0");
  if (epochs < 1) throw InvalidInput("TrainConfig: epochs must be >= 1");
  if (map_iterations < 1) throw InvalidInput("TrainConfig: map_iterations must be >= 1");
}

GaussianWeightModel::GaussianWeightModel(std::uint32_t dimension, double mu0,
                                         double q0)
    : dimension_(dimension), mu0_(mu0), q0_(q0) {
  if (!(q0 > 0.0)) throw InvalidInput("q0 must be > 0");
  if (!std::isfinite(mu0)) throw InvalidInput("mu0 must be finite");
}

GaussianWeightModel GaussianWeightModel::from_point_estimate(
    std::span<const double> weights, double q0) {
  GaussianWeightModel m(static_cast<std::uint32_t>(weights.size()), 0.0, q0);
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) m.weights_[i] = Weight{weights[i], q0};
  }
  return m;
}

GaussianWeightModel::Weight GaussianWeightModel::read(std::uint32_t i) const {
  const auto it = weights_.find(i);
  return it == weights_.end() ? Weight{mu0_, q0_} : it->second;
}

double GaussianWeightModel::mu(std::uint32_t i) const {
  if (i >= dimension_) throw InvalidInput("feature index out of dimension");
  return read(i).mu;
}

double GaussianWeightModel::q(std::uint32_t i) const {
  if (i >= dimension_) throw InvalidInput("feature index out of dimension");
  return read(i).q;
}

void GaussianWeightModel::check_indices(const FeatureVector& x) const {
  if (x.dimension != dimension_) {
    throw InvalidInput("feature space " + std::to_string(x.dimension) +
                       " does not match model dimension " +
                       std::to_string(dimension_));
  }
  if (!x.indices.empty() && x.indices.back() >= dimension_) {
    throw InvalidInput("feature index " + std::to_string(x.indices.back()) +
                       " out of model dimension " + std::to_string(dimension_));
  }
}

double GaussianWeightModel::predict_point(const FeatureVector& x) const {
  check_indices(x);
  if (x.empty()) throw InvalidInput("predict_point: empty feature vector");
  double score = 0.0;
  for (std::uint32_t i : x.indices) score += read(i).mu;
  return sigmoid(score);
}

CtrPosterior GaussianWeightModel::posterior_params(const FeatureVector& x) const {
  check_indices(x);
  if (x.empty()) throw InvalidInput("posterior_params: empty feature vector");
  double m = 0.0, s2 = 0.0;
  for (std::uint32_t i : x.indices) {
    const Weight w = read(i);
    m += w.mu;
    s2 += 1.0 / w.q;
  }
  return CtrPosterior(m, s2);
}

void GaussianWeightModel::update(const FeatureVector& x, int click, double eta) {
  check_indices(x);
  if (click != 0 && click != 1) throw InvalidInput("update: click must be 0 or 1");
  if (!(eta > 0.0)) throw InvalidInput("update: eta must be > 0");
  if (x.empty()) return;

  double score = 0.0;
  for (std::uint32_t i : x.indices) score += read(i).mu;
  const double p = sigmoid(score);
  const double grad = eta * (static_cast<double>(click) - p);
  const double q_inc = p * (1.0 - p);
  for (std::uint32_t i : x.indices) {
    auto [it, inserted] = weights_.try_emplace(i, Weight{mu0_, q0_});
    it->second.mu += grad;
    it->second.q += q_inc;
  }
}

void GaussianWeightModel::set_weight(std::uint32_t i, double mu, double q) {
  if (i >= dimension_) throw InvalidInput("feature index out of dimension");
  if (!(q > 0.0)) throw InvalidInput("precision must be > 0");
  weights_[i] = Weight{mu, q};
}

void GaussianWeightModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.precision(17);
  out << dimension_ << "\t" << mu0_ << "\t" << q0_ << "\n";
  std::vector<std::uint32_t> ids;
  ids.reserve(weights_.size());
  for (const auto& [id, w] : weights_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (std::uint32_t id : ids) {
    const Weight w = weights_.at(id);
    out << id << "\t" << w.mu << "\t" << w.q << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

GaussianWeightModel GaussianWeightModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, "empty checkpoint");
  std::istringstream head(line);
  std::uint32_t dimension = 0;
  double mu0 = 0.0, q0 = 0.0;
  head >> dimension >> mu0 >> q0;
  if (!head) throw ParseError(path.string(), 1, "bad checkpoint header");
  GaussianWeightModel m(dimension, mu0, q0);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::uint32_t id = 0;
    Weight w{};
    row >> id >> w.mu >> w.q;
    if (!row) throw ParseError(path.string(), line_no, "bad checkpoint row");
    if (id >= dimension) {
      throw ParseError(path.string(), line_no, "feature id out of dimension");
    }
    if (!(w.q > 0.0)) {
      throw ParseError(path.string(), line_no, "precision must be > 0");
    }
    m.weights_[id] = w;
  }
  return m;
}

namespace {

// Multi-step variant of the per-instance MAP objective: gradient of the
// log-likelihood plus the Gaussian prior anchored at the pre-instance mean.
void map_steps(GaussianWeightModel& model, const FeatureVector& x, int click,
               double eta, int iterations) {
  if (x.empty()) return;
  struct Anchor {
    std::uint32_t id;
    double mu_prior;
    double q_prior;
  };
  std::vector<Anchor> anchors;
  anchors.reserve(x.indices.size());
  std::vector<double> mu_cur;
  mu_cur.reserve(x.indices.size());
  for (std::uint32_t i : x.indices) {
    anchors.push_back(Anchor{i, model.mu(i), model.q(i)});
    mu_cur.push_back(model.mu(i));
  }
  double p = 0.0;
  for (int step = 0; step < iterations; ++step) {
    double score = std::accumulate(mu_cur.begin(), mu_cur.end(), 0.0);
    p = sigmoid(score);
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      mu_cur[k] += eta * ((static_cast<double>(click) - p) -
                          anchors[k].q_prior * (mu_cur[k] - anchors[k].mu_prior));
    }
  }
  // Precision increment at the approximate mode, then write back.
  const double score = std::accumulate(mu_cur.begin(), mu_cur.end(), 0.0);
  const double q_inc = sigmoid(score) * (1.0 - sigmoid(score));
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    model.set_weight(anchors[k].id, mu_cur[k], anchors[k].q_prior + q_inc);
  }
}

}  // namespace

void train(GaussianWeightModel& model, const std::vector<LogRecord>& dataset,
           const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw InvalidInput("train: empty dataset");

  std::vector<std::uint32_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0u);
  std::optional<Rng> shuffle_rng;
  if (cfg.shuffle_seed) shuffle_rng.emplace(*cfg.shuffle_seed);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (shuffle_rng) shuffle(order, *shuffle_rng);
    for (std::uint32_t idx : order) {
      const LogRecord& rec = dataset[idx];
      if (cfg.map_iterations == 1) {
        model.update(rec.features, rec.click, cfg.eta);
      } else {
        map_steps(model, rec.features, rec.click, cfg.eta, cfg.map_iterations);
      }
    }
  }
}

}  // namespace riskbid
