#include "riskbid/strategies.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "riskbid/math_util.hpp"
#include "riskbid/parallel.hpp"
#include "riskbid/rng.hpp"

namespace riskbid {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kLr: return "lr";
    case StrategyKind::kVar: return "var";
    case StrategyKind::kRmp: return "rmp";
  }
  return "lr";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
  if (name == "lr" || name == "LR") return StrategyKind::kLr;
  if (name == "var" || name == "VaR" || name == "VAR") return StrategyKind::kVar;
  if (name == "rmp" || name == "RMP") return StrategyKind::kRmp;
  throw InvalidInput("unknown strategy kind: " + name);
}

void StrategyConfig::validate() const {
  if (!(phi > 0.0)) throw InvalidInput("StrategyConfig: phi must be > 0");
  if (!(v > 0.0)) throw InvalidInput("StrategyConfig: v must be > 0");
  if (!std::isfinite(alpha)) throw InvalidInput("StrategyConfig: alpha must be finite");
}

BidGrid BidGrid::for_value(double v) {
  BidGrid g;
  g.min = 0.0;
  g.max = 3.0 * v;
  g.step = 3.0 * v / 1000.0;
  return g;
}

void BidGrid::validate() const {
  if (!(step > 0.0) || !(max >= min) || min < 0.0) {
    throw InvalidInput("BidGrid requires 0 <= min <= max and step > 0");
  }
}

std::size_t BidGrid::count() const {
  // Largest i with min + i*step <= max, robust to division rounding.
  return static_cast<std::size_t>((max - min) / step + 1e-9) + 1;
}

double bid_lr(double ctr, const StrategyConfig& cfg) {
  if (!(ctr > 0.0) || !(ctr < 1.0)) throw InvalidInput("bid_lr: ctr must lie in (0, 1)");
  return cfg.phi * cfg.v * ctr;
}

double bid_var(double mean, double stddev, const StrategyConfig& cfg) {
  if (!(mean > 0.0) || !(mean < 1.0)) throw InvalidInput("bid_var: mean must lie in (0, 1)");
  if (stddev < 0.0) throw InvalidInput("bid_var: stddev must be >= 0");
  const double value_at_risk = mean - cfg.alpha * stddev;
  return std::max(0.0, cfg.phi * cfg.v * value_at_risk);
}

ProfitMoments profit_moments(double b, double v, double ctr_mean,
                             double ctr_second_moment,
                             const MarketPriceModel& market) {
  if (b < 0.0) throw InvalidInput("profit_moments: b must be >= 0");
  if (ctr_second_moment < ctr_mean * ctr_mean * (1.0 - 1e-12)) {
    throw InvalidInput("profit_moments: second moment below squared mean");
  }
  ProfitMoments pm;
  pm.b = b;
  pm.v = v;
  pm.ctr_mean = ctr_mean;
  pm.ctr_second_moment = ctr_second_moment;
  pm.z0 = market.partial_moment(b, 0);
  pm.z1 = market.partial_moment(b, 1);
  pm.z2 = market.partial_moment(b, 2);
  pm.expectation = v * ctr_mean * pm.z0 - pm.z1;
  const double second = v * v * ctr_second_moment * pm.z0 -
                        2.0 * v * ctr_mean * pm.z1 + pm.z2;
  pm.variance = std::max(0.0, second - pm.expectation * pm.expectation);
  return pm;
}

double rmp_objective(double b, double alpha, double v, double ctr_mean,
                     double ctr_second_moment, const MarketPriceModel& market) {
  const ProfitMoments pm =
      profit_moments(b, v, ctr_mean, ctr_second_moment, market);
  return pm.expectation - alpha * pm.stddev();
}

namespace {

// Argmax of E[R(b)] - alpha*std[R(b)] over the grid plus the implicit no-bid
// b=0 (objective exactly 0); ties go to the lower bid.
double rmp_argmax(double alpha, double v, double ctr_mean,
                  double ctr_second_moment,
                  const std::vector<double>& z0, const std::vector<double>& z1,
                  const std::vector<double>& z2, const BidGrid& grid) {
  double best_bid = 0.0;
  double best_objective = 0.0;  // the no-bid option
  for (std::size_t i = 0; i < z0.size(); ++i) {
    const double b = grid.at(i);
    const double expectation = v * ctr_mean * z0[i] - z1[i];
    const double second =
        v * v * ctr_second_moment * z0[i] - 2.0 * v * ctr_mean * z1[i] + z2[i];
    const double variance =
        std::max(0.0, second - expectation * expectation);
    const double objective = expectation - alpha * std::sqrt(variance);
    if (objective > best_objective ||
        (objective == best_objective && b < best_bid)) {
      best_objective = objective;
      best_bid = b;
    }
  }
  return best_bid;
}

void tabulate_partial_moments(const MarketPriceModel& market, const BidGrid& grid,
                              std::vector<double>& z0, std::vector<double>& z1,
                              std::vector<double>& z2) {
  const std::size_t n = grid.count();
  z0.resize(n);
  z1.resize(n);
  z2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double b = grid.at(i);
    z0[i] = market.partial_moment(b, 0);
    z1[i] = market.partial_moment(b, 1);
    z2[i] = market.partial_moment(b, 2);
  }
}

}  // namespace

double bid_rmp(const CtrMoments& posterior_moments, const StrategyConfig& cfg,
               const MarketPriceModel& market, const BidGrid& grid) {
  cfg.validate();
  grid.validate();
  std::vector<double> z0, z1, z2;
  tabulate_partial_moments(market, grid, z0, z1, z2);
  const double b = rmp_argmax(cfg.alpha, cfg.v, posterior_moments.mean,
                              posterior_moments.second_moment(), z0, z1, z2, grid);
  return cfg.phi * b;
}

std::vector<FrontierPoint> efficient_frontier(const CtrPosterior& posterior,
                                              const MarketPriceModel& market,
                                              double v, const BidGrid& grid) {
  grid.validate();
  const CtrMoments moments = moments_quadrature(posterior);
  std::vector<FrontierPoint> points;
  points.reserve(grid.count());
  for (std::size_t i = 0; i < grid.count(); ++i) {
    const double b = grid.at(i);
    const ProfitMoments pm =
        profit_moments(b, v, moments.mean, moments.second_moment(), market);
    points.push_back(FrontierPoint{pm.stddev(), pm.expectation, b});
  }
  return points;
}

std::size_t frontier_tangent(const std::vector<FrontierPoint>& points,
                             double alpha) {
  if (points.empty()) throw InvalidInput("frontier_tangent: empty frontier");
  std::size_t best = 0;
  double best_objective =
      points[0].profit_expectation - alpha * points[0].profit_stddev;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double objective =
        points[i].profit_expectation - alpha * points[i].profit_stddev;
    if (objective > best_objective ||
        (objective == best_objective && points[i].bid < points[best].bid)) {
      best_objective = objective;
      best = i;
    }
  }
  return best;
}

double negative_profit_prob(const CtrPosterior& posterior,
                            const MarketPriceModel& market, double v, double b,
                            std::size_t n, std::uint64_t seed) {
  if (!(b > 0.0)) throw InvalidInput("negative_profit_prob: b must be > 0");
  if (n < 1) throw InvalidInput("negative_profit_prob: n must be >= 1");
  Rng rng(seed);
  const double s = std::sqrt(posterior.s2);
  std::size_t wins = 0, losses_in_profit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = sigmoid(rng.normal(posterior.m, s));
    const double z = market.sample_one(rng);
    if (z < b) {
      ++wins;
      if (v * y < z) ++losses_in_profit;
    }
  }
  if (wins == 0) return 0.0;
  return static_cast<double>(losses_in_profit) / static_cast<double>(wins);
}

RmpBidTable RmpBidTable::build(const GridSpec& m_grid, const GridSpec& s2_grid,
                               const BidGrid& bid_grid, double alpha, double v,
                               const MarketPriceModel& market,
                               std::uint32_t samples_per_cell, std::uint64_t seed,
                               MomentMethod method, unsigned threads) {
  m_grid.validate("m_grid");
  s2_grid.validate("s2_grid");
  if (!(s2_grid.min > 0.0)) throw InvalidInput("s2 grid lower bound must be > 0");
  bid_grid.validate();
  if (!(v > 0.0)) throw InvalidInput("RmpBidTable: v must be > 0");
  if (samples_per_cell < 1) throw InvalidInput("samples_per_cell must be >= 1");

  RmpBidTable t;
  t.m_grid_ = m_grid;
  t.s2_grid_ = s2_grid;
  t.bid_grid_ = bid_grid;
  t.alpha_ = alpha;
  t.v_ = v;
  t.samples_per_cell_ = samples_per_cell;
  t.seed_ = seed;
  t.method_ = method;
  t.market_digest_ = market.digest();

  std::vector<double> z0, z1, z2;
  tabulate_partial_moments(market, bid_grid, z0, z1, z2);

  const std::size_t n_cells =
      static_cast<std::size_t>(m_grid.bins) * s2_grid.bins;
  t.cells_.assign(n_cells, 0.0);
  const int panels =
      static_cast<int>(std::min(10'000'000u, std::max(100u, samples_per_cell)));

  parallel_for(n_cells, threads, [&](std::size_t cell) {
    const std::uint32_t mi = static_cast<std::uint32_t>(cell / s2_grid.bins);
    const std::uint32_t si = static_cast<std::uint32_t>(cell % s2_grid.bins);
    const CtrPosterior p(m_grid.center(mi), s2_grid.center(si));
    const CtrMoments moments =
        method == MomentMethod::kQuadrature
            ? moments_quadrature(p, panels)
            : moments_mc(p, samples_per_cell, derive_seed(seed, cell));
    t.cells_[cell] = rmp_argmax(alpha, v, moments.mean,
                                moments.second_moment(), z0, z1, z2, bid_grid);
  });
  return t;
}

double RmpBidTable::lookup(double m, double s2) const {
  return cell(m_grid_.index_for(m), s2_grid_.index_for(s2));
}

double RmpBidTable::cell(std::uint32_t mi, std::uint32_t si) const {
  return cells_[static_cast<std::size_t>(mi) * s2_grid_.bins + si];
}

namespace {
constexpr char kRmpMagic[] = "RBBT1";
}

void RmpBidTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << kRmpMagic << "\n";
  std::ostringstream header;
  header.precision(17);
  header << m_grid_.min << " " << m_grid_.max << " " << m_grid_.bins << " "
         << s2_grid_.min << " " << s2_grid_.max << " " << s2_grid_.bins << " "
         << bid_grid_.min << " " << bid_grid_.max << " " << bid_grid_.step << " "
         << alpha_ << " " << v_ << " " << samples_per_cell_ << " " << seed_
         << " " << to_string(method_) << " " << std::hex << market_digest_;
  out << header.str() << "\n";
  out.write(reinterpret_cast<const char*>(cells_.data()),
            static_cast<std::streamsize>(cells_.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

RmpBidTable RmpBidTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kRmpMagic) {
    throw ParseError(path.string(), 1, "bad magic, expected RBBT1");
  }
  std::string header;
  std::getline(in, header);
  std::istringstream fields(header);
  RmpBidTable t;
  std::string method;
  fields >> t.m_grid_.min >> t.m_grid_.max >> t.m_grid_.bins >>
      t.s2_grid_.min >> t.s2_grid_.max >> t.s2_grid_.bins >> t.bid_grid_.min >>
      t.bid_grid_.max >> t.bid_grid_.step >> t.alpha_ >> t.v_ >>
      t.samples_per_cell_ >> t.seed_ >> method >> std::hex >> t.market_digest_;
  if (!fields) throw ParseError(path.string(), 2, "bad table header");
  t.method_ = moment_method_from_string(method);
  t.m_grid_.validate("m_grid");
  t.s2_grid_.validate("s2_grid");
  t.bid_grid_.validate();

  const std::size_t n_cells =
      static_cast<std::size_t>(t.m_grid_.bins) * t.s2_grid_.bins;
  t.cells_.resize(n_cells);
  in.read(reinterpret_cast<char*>(t.cells_.data()),
          static_cast<std::streamsize>(t.cells_.size() * sizeof(double)));
  if (in.gcount() !=
      static_cast<std::streamsize>(t.cells_.size() * sizeof(double))) {
    throw ParseError(path.string(), 3, "truncated cell payload");
  }
  return t;
}

}  // namespace riskbid
