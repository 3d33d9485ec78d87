#include "riskbid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "riskbid/rng.hpp"

namespace riskbid {

using ordered_json = nlohmann::ordered_json;

namespace {

// Stable stream ids for deriving stage seeds from the master seed.
constexpr std::uint64_t kStreamTrainShuffle = 1;
constexpr std::uint64_t kStreamMomentTable = 2;
constexpr std::uint64_t kStreamRmpTableBase = 100;

constexpr int kReportSchemaVersion = 1;

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ordered_json metrics_to_json(const ReplayMetrics& m) {
  ordered_json j;
  j["bids"] = m.bids;
  j["wins"] = m.wins;
  j["clicks"] = m.clicks;
  j["records_consumed"] = m.records_consumed;
  j["cost"] = m.cost;
  j["revenue"] = m.revenue;
  j["profit"] = m.profit;
  auto opt = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  j["roi"] = opt(m.roi);
  j["cpm"] = opt(m.cpm);
  j["ctr"] = opt(m.ctr);
  j["ecpc"] = opt(m.ecpc);
  j["win_rate"] = opt(m.win_rate);
  return j;
}

ReplayMetrics metrics_from_json(const ordered_json& j) {
  ReplayMetrics m;
  m.bids = j.at("bids").get<std::uint64_t>();
  m.wins = j.at("wins").get<std::uint64_t>();
  m.clicks = j.at("clicks").get<std::uint64_t>();
  m.records_consumed = j.at("records_consumed").get<std::uint64_t>();
  m.cost = j.at("cost").get<double>();
  m.revenue = j.at("revenue").get<double>();
  m.profit = j.at("profit").get<double>();
  auto opt = [&](const char* key) -> std::optional<double> {
    const auto& v = j.at(key);
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  };
  m.roi = opt("roi");
  m.cpm = opt("cpm");
  m.ctr = opt("ctr");
  m.ecpc = opt("ecpc");
  m.win_rate = opt("win_rate");
  return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

struct SplitSummary {
  std::uint64_t records = 0;
  std::uint64_t clicks = 0;
  double cost = 0.0;
};

SplitSummary summarize(const std::vector<LogRecord>& data) {
  SplitSummary s;
  s.records = data.size();
  s.clicks = total_clicks(data);
  s.cost = total_cost(data);
  return s;
}

}  // namespace

void fit_grid_ranges(const GaussianWeightModel& model,
                     const std::vector<LogRecord>& data, GridSpec& m_grid,
                     GridSpec& s2_grid) {
  if (data.empty()) throw InvalidInput("fit_grid_ranges: empty dataset");
  std::vector<double> ms, s2s;
  ms.reserve(data.size());
  s2s.reserve(data.size());
  for (const LogRecord& rec : data) {
    const CtrPosterior p = model.posterior_params(rec.features);
    ms.push_back(p.m);
    s2s.push_back(p.s2);
  }
  std::sort(ms.begin(), ms.end());
  std::sort(s2s.begin(), s2s.end());
  auto quantile = [](const std::vector<double>& sorted, double q) {
    const auto idx = static_cast<std::size_t>(q * (sorted.size() - 1));
    return sorted[idx];
  };
  const double m_lo = quantile(ms, 0.001), m_hi = quantile(ms, 0.999);
  const double s_lo = quantile(s2s, 0.001), s_hi = quantile(s2s, 0.999);
  const double m_pad = std::max(1e-6, 0.05 * (m_hi - m_lo));
  const double s_pad = std::max(1e-9, 0.05 * (s_hi - s_lo));
  m_grid.min = m_lo - m_pad;
  m_grid.max = m_hi + m_pad;
  s2_grid.min = std::max(1e-9, s_lo - s_pad);
  s2_grid.max = s_hi + s_pad;
}

ExperimentRunner::ExperimentRunner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::filesystem::path ExperimentRunner::checkpoint_path() const {
  return cfg_.artifact_dir / "model.ckpt";
}
std::filesystem::path ExperimentRunner::market_path() const {
  return cfg_.artifact_dir / "market.txt";
}
std::filesystem::path ExperimentRunner::moment_table_path() const {
  return cfg_.artifact_dir / "moments.rbmt";
}
std::filesystem::path ExperimentRunner::rmp_table_path(std::size_t alpha_index) const {
  return cfg_.artifact_dir / ("rmp_" + std::to_string(alpha_index) + ".rbbt");
}
std::filesystem::path ExperimentRunner::sweep_points_path() const {
  return cfg_.artifact_dir / "sweep_points.json";
}
std::filesystem::path ExperimentRunner::report_json_path() const {
  return cfg_.artifact_dir / "report.json";
}
std::filesystem::path ExperimentRunner::report_csv_path() const {
  return cfg_.artifact_dir / "report.csv";
}

double ExperimentRunner::click_value() const {
  if (cfg_.click_value_override) return *cfg_.click_value_override;
  const auto training = read_log(cfg_.train_log);
  return click_value_from_training(training, cfg_.click_value_proportion);
}

void ExperimentRunner::run_train() {
  std::filesystem::create_directories(cfg_.artifact_dir);
  auto training = read_log(cfg_.train_log);
  if (training.empty()) throw InvalidInput("training log is empty");

  // The model must cover ids appearing only in later splits; size the space
  // over all three logs.
  std::uint32_t dim = infer_dimension(training);
  dim = std::max(dim, infer_dimension(read_log(cfg_.validation_log)));
  dim = std::max(dim, infer_dimension(read_log(cfg_.test_log)));
  set_dimension(training, dim);

  GaussianWeightModel model =
      cfg_.warm_start_checkpoint
          ? GaussianWeightModel::load(*cfg_.warm_start_checkpoint)
          : GaussianWeightModel(dim, cfg_.mu0, cfg_.q0);

  TrainConfig tc;
  tc.eta = cfg_.eta;
  tc.epochs = cfg_.epochs;
  tc.map_iterations = cfg_.map_iterations;
  if (cfg_.shuffle) tc.shuffle_seed = derive_seed(cfg_.seed, kStreamTrainShuffle);
  train(model, training, tc);
  model.save(checkpoint_path());
}

void ExperimentRunner::run_fit_market() {
  std::filesystem::create_directories(cfg_.artifact_dir);
  const auto training = read_log(cfg_.train_log);
  std::vector<double> prices;
  prices.reserve(training.size());
  for (const LogRecord& rec : training) prices.push_back(rec.market_price);
  const MarketPriceModel market = cfg_.market_kind == MarketKind::kLognormal
                                      ? MarketPriceModel::fit_lognormal(prices)
                                      : MarketPriceModel::fit_empirical(prices);
  market.save(market_path());
}

void ExperimentRunner::run_build_tables() {
  const GaussianWeightModel model = GaussianWeightModel::load(checkpoint_path());
  const MarketPriceModel market = MarketPriceModel::load(market_path());
  auto training = read_log(cfg_.train_log);
  set_dimension(training, model.dimension());

  GridSpec m_grid{0.0, 1.0, cfg_.table_bins_m};
  GridSpec s2_grid{0.0, 1.0, cfg_.table_bins_s2};
  fit_grid_ranges(model, training, m_grid, s2_grid);
  if (cfg_.table_m_min) m_grid.min = *cfg_.table_m_min;
  if (cfg_.table_m_max) m_grid.max = *cfg_.table_m_max;
  if (cfg_.table_s2_min) s2_grid.min = *cfg_.table_s2_min;
  if (cfg_.table_s2_max) s2_grid.max = *cfg_.table_s2_max;

  const MomentTable moments = MomentTable::build(
      m_grid, s2_grid, cfg_.table_samples, derive_seed(cfg_.seed, kStreamMomentTable),
      cfg_.table_method, cfg_.threads);
  moments.save(moment_table_path());

  const bool wants_rmp =
      std::find(cfg_.strategies.begin(), cfg_.strategies.end(),
                StrategyKind::kRmp) != cfg_.strategies.end();
  if (!wants_rmp) return;

  const double v = click_value();
  BidGrid bid_grid;
  bid_grid.min = 0.0;
  bid_grid.max = cfg_.bid_grid_max_factor * v;
  bid_grid.step = bid_grid.max / cfg_.bid_grid_steps;
  for (std::size_t ai = 0; ai < cfg_.alpha_grid.size(); ++ai) {
    const RmpBidTable table = RmpBidTable::build(
        m_grid, s2_grid, bid_grid, cfg_.alpha_grid[ai], v, market,
        cfg_.table_samples, derive_seed(cfg_.seed, kStreamRmpTableBase + ai),
        cfg_.table_method, cfg_.threads);
    table.save(rmp_table_path(ai));
  }
}

namespace {

std::vector<SweepCell> run_sweep_cells(
    const ExperimentConfig& cfg, const GaussianWeightModel& model,
    const MomentTable& moments,
    const std::map<double, RmpBidTable>& rmp_tables, double v,
    const std::vector<LogRecord>& validation) {
  const double validation_cost = total_cost(validation);

  BudgetSpec budget_spec;
  budget_spec.fractions = cfg.budget_fractions;
  budget_spec.base = validation_cost;
  budget_spec.validate();

  std::vector<std::optional<double>> budgets;
  budgets.push_back(std::nullopt);
  for (double f : budget_spec.fractions) budgets.push_back(f);

  std::vector<SweepCell> cells;
  for (StrategyKind kind : cfg.strategies) {
    for (const auto& fraction : budgets) {
      SweepCell cell;
      cell.strategy = kind;
      cell.budget_fraction = fraction;
      SweepGrids grids;
      grids.alphas = cfg.alphas_for(kind);
      grids.phis = cfg.phis_for(fraction.has_value());
      const std::optional<double> budget =
          fraction ? std::optional<double>(budget_spec.absolute(*fraction))
                   : std::nullopt;
      auto make_bidder = [&](double alpha, double phi) {
        StrategyConfig sc;
        sc.kind = kind;
        sc.alpha = alpha;
        sc.phi = phi;
        sc.v = v;
        const RmpBidTable* rmp = nullptr;
        if (kind == StrategyKind::kRmp) {
          const auto it = rmp_tables.find(alpha);
          if (it == rmp_tables.end()) {
            throw InvalidInput("no RMP table for alpha " + std::to_string(alpha));
          }
          rmp = &it->second;
        }
        return Bidder(sc, model, &moments, rmp);
      };
      cell.points = sweep(validation, Split::kValidation, grids, budget,
                          make_bidder, cfg.threads);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

ordered_json cells_to_json(const std::vector<SweepCell>& cells) {
  ordered_json arr = ordered_json::array();
  for (const SweepCell& cell : cells) {
    ordered_json c;
    c["strategy"] = to_string(cell.strategy);
    c["budget_fraction"] = cell.budget_fraction
                               ? ordered_json(*cell.budget_fraction)
                               : ordered_json(nullptr);
    ordered_json pts = ordered_json::array();
    for (const SweepPoint& p : cell.points) {
      ordered_json pj;
      pj["alpha"] = p.alpha;
      pj["phi"] = p.phi;
      pj["split"] = to_string(p.split);
      pj["metrics"] = metrics_to_json(p.metrics);
      pts.push_back(std::move(pj));
    }
    c["points"] = std::move(pts);
    arr.push_back(std::move(c));
  }
  return arr;
}

std::vector<SweepCell> cells_from_json(const ordered_json& arr) {
  std::vector<SweepCell> cells;
  for (const auto& c : arr) {
    SweepCell cell;
    cell.strategy = strategy_kind_from_string(c.at("strategy").get<std::string>());
    if (!c.at("budget_fraction").is_null()) {
      cell.budget_fraction = c.at("budget_fraction").get<double>();
    }
    for (const auto& pj : c.at("points")) {
      SweepPoint p;
      p.alpha = pj.at("alpha").get<double>();
      p.phi = pj.at("phi").get<double>();
      p.split = pj.at("split").get<std::string>() == "test" ? Split::kTest
                                                            : Split::kValidation;
      p.metrics = metrics_from_json(pj.at("metrics"));
      cell.points.push_back(std::move(p));
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void append_point_csv(std::ostringstream& csv, const std::string& strategy,
                      const std::optional<double>& fraction, const SweepPoint& p) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  csv << strategy << "," << opt(fraction) << "," << to_string(p.split) << ","
      << format_double(p.alpha) << "," << format_double(p.phi) << ","
      << p.metrics.bids << "," << p.metrics.wins << "," << p.metrics.clicks
      << "," << p.metrics.records_consumed << ","
      << format_double(p.metrics.cost) << "," << format_double(p.metrics.revenue)
      << "," << format_double(p.metrics.profit) << "," << opt(p.metrics.roi)
      << "," << opt(p.metrics.cpm) << "," << opt(p.metrics.ctr) << ","
      << opt(p.metrics.ecpc) << "," << opt(p.metrics.win_rate) << "\n";
}

constexpr char kCsvHeader[] =
    "# schema_version=1\n"
    "strategy,budget_fraction,split,alpha,phi,bids,wins,clicks,"
    "records_consumed,cost,revenue,profit,roi,cpm,ctr,ecpc,win_rate\n";

}  // namespace

void ExperimentRunner::run_sweep() {
  const GaussianWeightModel model = GaussianWeightModel::load(checkpoint_path());
  const MomentTable moments = MomentTable::load(moment_table_path());
  auto validation = read_log(cfg_.validation_log);
  set_dimension(validation, model.dimension());
  const double v = click_value();

  std::map<double, RmpBidTable> rmp_tables;
  const bool wants_rmp =
      std::find(cfg_.strategies.begin(), cfg_.strategies.end(),
                StrategyKind::kRmp) != cfg_.strategies.end();
  if (wants_rmp) {
    for (std::size_t ai = 0; ai < cfg_.alpha_grid.size(); ++ai) {
      rmp_tables.emplace(cfg_.alpha_grid[ai],
                         RmpBidTable::load(rmp_table_path(ai)));
    }
  }

  const auto cells = run_sweep_cells(cfg_, model, moments, rmp_tables, v, validation);
  ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["experiment_id"] = cfg_.digest_hex();
  doc["cells"] = cells_to_json(cells);
  write_text_file(sweep_points_path(), doc.dump(2) + "\n");
}

void ExperimentRunner::run_report() {
  const GaussianWeightModel model = GaussianWeightModel::load(checkpoint_path());
  const MarketPriceModel market = MarketPriceModel::load(market_path());
  const MomentTable moments = MomentTable::load(moment_table_path());
  auto validation = read_log(cfg_.validation_log);
  auto test = read_log(cfg_.test_log);
  set_dimension(validation, model.dimension());
  set_dimension(test, model.dimension());
  const double v = click_value();
  const double test_cost = total_cost(test);

  std::ifstream in(sweep_points_path());
  if (!in) throw IoError("cannot open: " + sweep_points_path().string());
  ordered_json sweep_doc = ordered_json::parse(in);
  const auto cells = cells_from_json(sweep_doc.at("cells"));

  std::map<double, RmpBidTable> rmp_tables;
  const bool wants_rmp =
      std::find(cfg_.strategies.begin(), cfg_.strategies.end(),
                StrategyKind::kRmp) != cfg_.strategies.end();
  if (wants_rmp) {
    for (std::size_t ai = 0; ai < cfg_.alpha_grid.size(); ++ai) {
      rmp_tables.emplace(cfg_.alpha_grid[ai],
                         RmpBidTable::load(rmp_table_path(ai)));
    }
  }

  auto make_bidder = [&](StrategyKind kind, double alpha, double phi) {
    StrategyConfig sc;
    sc.kind = kind;
    sc.alpha = alpha;
    sc.phi = phi;
    sc.v = v;
    const RmpBidTable* rmp = nullptr;
    if (kind == StrategyKind::kRmp) rmp = &rmp_tables.at(alpha);
    return Bidder(sc, model, &moments, rmp);
  };

  std::vector<Selection> selections;
  std::vector<std::pair<const SweepCell*, SweepPoint>> test_points;
  for (const SweepCell& cell : cells) {
    for (double lambda : cfg_.lambdas) {
      const std::size_t idx = select_model(cell.points, lambda);
      const SweepPoint& chosen = cell.points[idx];
      Selection sel;
      sel.strategy = cell.strategy;
      sel.budget_fraction = cell.budget_fraction;
      sel.lambda = lambda;
      sel.alpha = chosen.alpha;
      sel.phi = chosen.phi;
      sel.validation = chosen.metrics;

      ReplayConfig rc;
      const Bidder bidder = make_bidder(cell.strategy, chosen.alpha, chosen.phi);
      rc.strategy = bidder.config();
      if (cell.budget_fraction) rc.budget = *cell.budget_fraction * test_cost;
      sel.test = replay(test, rc, bidder);
      selections.push_back(sel);

      SweepPoint tp;
      tp.alpha = chosen.alpha;
      tp.phi = chosen.phi;
      tp.split = Split::kTest;
      tp.metrics = sel.test;
      test_points.emplace_back(&cell, tp);
    }
  }

  ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["experiment_id"] = cfg_.digest_hex();
  doc["config"] = ordered_json::parse(
      [&] {
        // Echo the canonical key=value form as a JSON object.
        ordered_json obj = ordered_json::object();
        std::istringstream lines(cfg_.canonical_text());
        std::string line;
        while (std::getline(lines, line)) {
          const auto eq = line.find('=');
          if (eq != std::string::npos) {
            obj[line.substr(0, eq)] = line.substr(eq + 1);
          }
        }
        return obj.dump();
      }());
  doc["click_value"] = v;
  {
    ordered_json mj;
    mj["kind"] = to_string(market.kind());
    if (market.kind() == MarketKind::kLognormal) {
      mj["mu_z"] = market.mu_z();
      mj["sigma_z"] = market.sigma_z();
    } else {
      mj["bins"] = market.histogram().size();
    }
    mj["samples"] = market.sample_count();
    doc["market"] = std::move(mj);
  }
  {
    const auto train_sum = summarize(read_log(cfg_.train_log));
    const auto val_sum = summarize(validation);
    const auto test_sum = summarize(test);
    auto split_json = [](const SplitSummary& s) {
      ordered_json j;
      j["records"] = s.records;
      j["clicks"] = s.clicks;
      j["cost"] = s.cost;
      return j;
    };
    ordered_json splits;
    splits["train"] = split_json(train_sum);
    splits["validation"] = split_json(val_sum);
    splits["test"] = split_json(test_sum);
    doc["splits"] = std::move(splits);
  }
  doc["sweeps"] = cells_to_json(cells);
  {
    ordered_json arr = ordered_json::array();
    for (const Selection& sel : selections) {
      ordered_json sj;
      sj["strategy"] = to_string(sel.strategy);
      sj["budget_fraction"] = sel.budget_fraction
                                  ? ordered_json(*sel.budget_fraction)
                                  : ordered_json(nullptr);
      sj["lambda"] = sel.lambda;
      sj["alpha"] = sel.alpha;
      sj["phi"] = sel.phi;
      sj["validation"] = metrics_to_json(sel.validation);
      sj["test"] = metrics_to_json(sel.test);
      arr.push_back(std::move(sj));
    }
    doc["selections"] = std::move(arr);
  }
  write_text_file(report_json_path(), doc.dump(2) + "\n");

  std::ostringstream csv;
  csv << kCsvHeader;
  for (const SweepCell& cell : cells) {
    for (const SweepPoint& p : cell.points) {
      append_point_csv(csv, to_string(cell.strategy), cell.budget_fraction, p);
    }
  }
  for (const auto& [cell, point] : test_points) {
    append_point_csv(csv, to_string(cell->strategy), cell->budget_fraction, point);
  }
  write_text_file(report_csv_path(), csv.str());
}

void ExperimentRunner::run_all() {
  auto stage = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(name) + " stage failed: " + e.what());
    }
  };
  stage("train", [&] { run_train(); });
  stage("fit-market", [&] { run_fit_market(); });
  stage("build-tables", [&] { run_build_tables(); });
  stage("sweep", [&] { run_sweep(); });
  stage("report", [&] { run_report(); });
}

}  // namespace riskbid
