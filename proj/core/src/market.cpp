#include "riskbid/market.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "riskbid/math_util.hpp"

namespace riskbid {

std::string to_string(MarketKind kind) {
  return kind == MarketKind::kLognormal ? "lognormal" : "empirical";
}

MarketKind market_kind_from_string(const std::string& name) {
  if (name == "lognormal") return MarketKind::kLognormal;
  if (name == "empirical") return MarketKind::kEmpirical;
  throw InvalidInput("unknown market model kind: " + name);
}

MarketPriceModel MarketPriceModel::fit_lognormal(std::span<const double> prices) {
  double sum = 0.0;
  std::uint64_t n = 0;
  for (double z : prices) {
    if (z > 0.0) {
      sum += std::log(z);
      ++n;
    }
  }
  if (n < 2) {
    throw InsufficientData("fit_lognormal: need at least 2 positive prices");
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double z : prices) {
    if (z > 0.0) {
      const double d = std::log(z) - mean;
      ss += d * d;
    }
  }
  const double sigma = std::sqrt(ss / static_cast<double>(n));
  if (!(sigma > 0.0)) {
    throw InsufficientData("fit_lognormal: zero variance in log prices");
  }
  MarketPriceModel m = lognormal(mean, sigma);
  m.count_ = n;
  return m;
}

MarketPriceModel MarketPriceModel::fit_empirical(std::span<const double> prices) {
  if (prices.empty()) {
    throw InsufficientData("fit_empirical: empty price list");
  }
  long long max_bin = 0;
  for (double z : prices) {
    if (z < 0.0) throw InvalidInput("fit_empirical: negative price");
    max_bin = std::max(max_bin, std::llround(z));
  }
  MarketPriceModel m;
  m.kind_ = MarketKind::kEmpirical;
  m.count_ = prices.size();
  m.histogram_.assign(static_cast<std::size_t>(max_bin) + 1, 0.0);
  const double w = 1.0 / static_cast<double>(prices.size());
  for (double z : prices) {
    m.histogram_[static_cast<std::size_t>(std::llround(z))] += w;
  }
  m.cum_histogram_.resize(m.histogram_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < m.histogram_.size(); ++i) {
    acc += m.histogram_[i];
    m.cum_histogram_[i] = acc;
  }
  m.cum_histogram_.back() = 1.0;
  return m;
}

MarketPriceModel MarketPriceModel::lognormal(double mu_z, double sigma_z) {
  if (!(sigma_z > 0.0) || !std::isfinite(mu_z) || !std::isfinite(sigma_z)) {
    throw InvalidInput("lognormal market model requires finite mu_z and sigma_z > 0");
  }
  MarketPriceModel m;
  m.kind_ = MarketKind::kLognormal;
  m.mu_z_ = mu_z;
  m.sigma_z_ = sigma_z;
  return m;
}

double MarketPriceModel::partial_moment(double b, int k) const {
  if (k < 0 || k > 2) throw InvalidInput("partial_moment: k must be 0, 1 or 2");
  if (b < 0.0) throw InvalidInput("partial_moment: b must be >= 0");
  if (b == 0.0) return 0.0;
  if (kind_ == MarketKind::kLognormal) {
    const double scale = std::exp(k * mu_z_ + 0.5 * k * k * sigma_z_ * sigma_z_);
    const double arg = (std::log(b) - mu_z_ - k * sigma_z_ * sigma_z_) / sigma_z_;
    return scale * normal_cdf(arg);
  }
  // Atoms at integer prices j contribute while j < b (strict, matching the
  // second-price win rule).
  double acc = 0.0;
  const std::size_t last = histogram_.size();
  for (std::size_t j = 0; j < last && static_cast<double>(j) < b; ++j) {
    const double mass = histogram_[j];
    if (mass == 0.0) continue;
    double zk = 1.0;
    for (int t = 0; t < k; ++t) zk *= static_cast<double>(j);
    acc += zk * mass;
  }
  return acc;
}

std::vector<double> MarketPriceModel::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw InvalidInput("sample: n must be >= 1");
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& z : out) z = sample_one(rng);
  return out;
}

double MarketPriceModel::sample_one(Rng& rng) const {
  if (kind_ == MarketKind::kLognormal) {
    return std::exp(rng.normal(mu_z_, sigma_z_));
  }
  const double u = rng.uniform();
  const auto it =
      std::upper_bound(cum_histogram_.begin(), cum_histogram_.end(), u);
  const std::size_t j = it == cum_histogram_.end()
                            ? cum_histogram_.size() - 1
                            : static_cast<std::size_t>(it - cum_histogram_.begin());
  return static_cast<double>(j);
}

std::uint64_t MarketPriceModel::digest() const {
  // FNV-1a over the defining parameters.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint8_t kind = static_cast<std::uint8_t>(kind_);
  mix(&kind, sizeof kind);
  if (kind_ == MarketKind::kLognormal) {
    mix(&mu_z_, sizeof mu_z_);
    mix(&sigma_z_, sizeof sigma_z_);
  } else {
    mix(histogram_.data(), histogram_.size() * sizeof(double));
  }
  return h;
}

void MarketPriceModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.precision(17);
  if (kind_ == MarketKind::kLognormal) {
    out << "lognormal\t" << mu_z_ << "\t" << sigma_z_ << "\t" << count_ << "\n";
  } else {
    out << "empirical\t" << histogram_.size() << "\t" << count_ << "\n";
    for (std::size_t j = 0; j < histogram_.size(); ++j) {
      if (histogram_[j] > 0.0) out << j << "\t" << histogram_[j] << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

MarketPriceModel MarketPriceModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, "empty file");
  std::istringstream head(line);
  std::string kind;
  head >> kind;
  if (kind == "lognormal") {
    double mu = 0.0, sigma = 0.0;
    std::uint64_t count = 0;
    head >> mu >> sigma >> count;
    if (!head) throw ParseError(path.string(), 1, "bad lognormal header");
    MarketPriceModel m = lognormal(mu, sigma);
    m.count_ = count;
    return m;
  }
  if (kind == "empirical") {
    std::size_t bins = 0;
    std::uint64_t count = 0;
    head >> bins >> count;
    if (!head || bins == 0) throw ParseError(path.string(), 1, "bad empirical header");
    MarketPriceModel m;
    m.kind_ = MarketKind::kEmpirical;
    m.count_ = count;
    m.histogram_.assign(bins, 0.0);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream row(line);
      std::size_t j = 0;
      double mass = 0.0;
      row >> j >> mass;
      if (!row || j >= bins) throw ParseError(path.string(), line_no, "bad histogram row");
      m.histogram_[j] = mass;
    }
    m.cum_histogram_.resize(m.histogram_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.histogram_.size(); ++i) {
      acc += m.histogram_[i];
      m.cum_histogram_[i] = acc;
    }
    m.cum_histogram_.back() = 1.0;
    return m;
  }
  throw ParseError(path.string(), 1, "unknown market model kind: " + kind);
}

}  // namespace riskbid
