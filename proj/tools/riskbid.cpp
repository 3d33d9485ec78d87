// riskbid command-line front end: ingestion, training, table building,
// replay, sweeps and reporting as reproducible pipeline stages.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskbid/config.hpp"
#include "riskbid/ctr_distribution.hpp"
#include "riskbid/evaluation.hpp"
#include "riskbid/experiment.hpp"
#include "riskbid/log.hpp"
#include "riskbid/simulator.hpp"
#include "riskbid/strategies.hpp"

namespace {

using riskbid::ConfigError;
using ordered_json = nlohmann::ordered_json;

void require_file(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError(std::string("missing ") + what + " path: " + path.string());
  }
}

ordered_json metrics_json(const riskbid::ReplayMetrics& m) {
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

struct ConfigArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool seed_required) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
    auto* seed_opt = cmd->add_option("--seed", seed, "master seed (overrides config)");
    if (seed_required) seed_opt->description("master seed (overrides config; mandatory)");
    cmd->add_option("--threads", threads, "worker pool size, 0 = all cores");
    cmd->add_option("--set", overrides,
                    "override any config key, e.g. --set model.eta=0.1");
  }

  riskbid::ExperimentConfig load() const {
    require_file(config_path, "config");
    riskbid::ExperimentConfig cfg = riskbid::parse_experiment_config(config_path);
    for (const std::string& assignment : overrides) {
      riskbid::apply_config_override(cfg, assignment);
    }
    if (seed) {
      cfg.seed = *seed;
      cfg.seed_set = true;
    }
    if (threads) cfg.threads = *threads;
    cfg.validate();
    require_file(cfg.train_log, "train log");
    require_file(cfg.validation_log, "validation log");
    require_file(cfg.test_log, "test log");
    return cfg;
  }
};

int cmd_demo_fig2(std::uint64_t seed) {
  const riskbid::CtrPosterior posterior(-1.0, 1.0 / 3.0);
  const riskbid::MarketPriceModel market = riskbid::MarketPriceModel::lognormal(4.0, 0.5);
  const double v = 300.0;
  const riskbid::CtrMoments moments = riskbid::moments_quadrature(posterior);
  const double bid = v * moments.mean;
  const double p_neg =
      riskbid::negative_profit_prob(posterior, market, v, 84.0, 10000, seed);
  std::cout << "CTR posterior: m = -1, s2 = 1/3; market: lognormal(4, 0.5); v = 300\n";
  std::cout << "E[ctr] = " << moments.mean << "\n";
  std::cout << "std[ctr] = " << moments.stddev << "\n";
  std::cout << "truth-telling bid v*E[ctr] = " << bid << "\n";
  std::cout << "P(negative profit | win) at b = 84: " << 100.0 * p_neg
            << "% (10000 samples)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-aware real-time bidding over a Bayesian CTR model"};
  app.require_subcommand(1);

  // --- convert ---
  auto* convert = app.add_subcommand("convert", "map raw delimited logs to the normalized TSV format");
  std::string cv_input, cv_output, cv_feature_cols, cv_vocab_in, cv_vocab_out;
  int cv_click_col = 0, cv_price_col = 1;
  std::string cv_delim = "\t";
  convert->add_option("--input", cv_input, "raw log file")->required();
  convert->add_option("--output", cv_output, "normalized TSV output")->required();
  convert->add_option("--click-col", cv_click_col, "0-based click column");
  convert->add_option("--price-col", cv_price_col, "0-based market price column");
  convert->add_option("--feature-cols", cv_feature_cols, "comma list of 0-based feature columns")->required();
  convert->add_option("--delimiter", cv_delim, "input column delimiter (default tab)");
  convert->add_option("--vocab-in", cv_vocab_in, "existing vocabulary to extend");
  convert->add_option("--vocab-out", cv_vocab_out, "where to write the vocabulary");

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "train the CTR model and write the checkpoint");
  ConfigArgs train_args;
  train_args.attach(train_cmd, true);

  // --- fit-market ---
  auto* fit_market = app.add_subcommand("fit-market", "fit the market price model on the training log");
  ConfigArgs market_args;
  market_args.attach(fit_market, false);

  // --- build-tables ---
  auto* build_tables = app.add_subcommand("build-tables", "build the moment and RMP bid lookup tables");
  ConfigArgs tables_args;
  tables_args.attach(build_tables, true);

  // --- sweep ---
  auto* sweep_cmd = app.add_subcommand("sweep", "replay the validation split over the (alpha, phi) grids");
  ConfigArgs sweep_args;
  sweep_args.attach(sweep_cmd, false);

  // --- report ---
  auto* report_cmd = app.add_subcommand("report", "select models and write the report from sweep artifacts");
  ConfigArgs report_args;
  report_args.attach(report_cmd, false);

  // --- run-experiment ---
  auto* run_cmd = app.add_subcommand("run-experiment", "full pipeline: train, fit, tables, sweep, report");
  ConfigArgs run_args;
  run_args.attach(run_cmd, true);

  // --- replay ---
  auto* replay_cmd = app.add_subcommand("replay", "replay one log with one strategy setting");
  std::string rp_log, rp_checkpoint, rp_strategy = "lr", rp_moments, rp_rmp, rp_market, rp_out;
  double rp_alpha = 0.0, rp_phi = 1.0, rp_v = 0.0;
  std::optional<double> rp_budget;
  replay_cmd->add_option("--log", rp_log, "normalized log to replay")->required();
  replay_cmd->add_option("--checkpoint", rp_checkpoint, "model checkpoint")->required();
  replay_cmd->add_option("--strategy", rp_strategy, "lr | var | rmp");
  replay_cmd->add_option("--alpha", rp_alpha, "risk coefficient");
  replay_cmd->add_option("--phi", rp_phi, "bid scaling");
  replay_cmd->add_option("--v", rp_v, "click value")->required();
  replay_cmd->add_option("--budget", rp_budget, "budget in currency units");
  replay_cmd->add_option("--moments", rp_moments, "moment table (RBMT1) for var");
  replay_cmd->add_option("--rmp-table", rp_rmp, "bid table (RBBT1) for rmp");
  replay_cmd->add_option("--market", rp_market, "market model file (rmp fallback)");
  replay_cmd->add_option("--out", rp_out, "write metrics JSON here instead of stdout");

  // --- select ---
  auto* select_cmd = app.add_subcommand("select", "pick the CP-Profit maximizing sweep point");
  std::string sl_points, sl_strategy;
  double sl_lambda = 0.0;
  std::optional<double> sl_fraction;
  select_cmd->add_option("--points", sl_points, "sweep_points.json from the sweep stage")->required();
  select_cmd->add_option("--lambda", sl_lambda, "cost penalty")->required();
  select_cmd->add_option("--strategy", sl_strategy, "lr | var | rmp")->required();
  select_cmd->add_option("--budget-fraction", sl_fraction, "budgeted cell to select from");

  // --- demo-fig2 ---
  auto* demo = app.add_subcommand("demo-fig2", "worked example: posterior (-1, 1/3), lognormal(4, 0.5), v = 300");
  std::uint64_t demo_seed = 0;
  demo->add_option("--seed", demo_seed, "MC seed")->required();

  // --- gen-synthetic ---
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic log with known ground truth");
  riskbid::GeneratorSpec gen_spec;
  std::string gen_out, gen_truth_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output log path")->required();
  gen->add_option("--records", gen_spec.records, "number of records");
  gen->add_option("--dimension", gen_spec.dimension, "feature space size");
  gen->add_option("--features-per-record", gen_spec.features_per_record, "active features per record");
  gen->add_option("--weight-mean", gen_spec.weight_mean, "true weight mean");
  gen->add_option("--weight-std", gen_spec.weight_std, "true weight std");
  gen->add_option("--popularity-exponent", gen_spec.popularity_exponent, "feature popularity skew");
  gen->add_option("--market-mu", gen_spec.market_mu, "log price mean");
  gen->add_option("--market-sigma", gen_spec.market_sigma, "log price std");
  gen->add_option("--truth-out", gen_truth_out, "write true weights here");
  gen->add_option("--seed", gen_seed, "generator seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (convert->parsed()) {
      require_file(cv_input, "input log");
      riskbid::ConvertSpec spec;
      spec.click_col = cv_click_col;
      spec.price_col = cv_price_col;
      for (double c : riskbid::parse_double_list(cv_feature_cols)) {
        spec.feature_cols.push_back(static_cast<int>(c));
      }
      spec.delimiter = cv_delim.empty() ? '\t' : cv_delim[0];
      riskbid::Vocabulary vocab;
      if (!cv_vocab_in.empty()) {
        require_file(cv_vocab_in, "vocabulary");
        vocab = riskbid::Vocabulary::load(cv_vocab_in);
      }
      const auto stats = riskbid::convert_log(cv_input, cv_output, spec, vocab);
      if (!cv_vocab_out.empty()) vocab.save(cv_vocab_out);
      std::cerr << "convert: " << stats.records << " records, dimension "
                << stats.dimension << "\n";
      return 0;
    }
    if (train_cmd->parsed()) {
      riskbid::ExperimentRunner runner(train_args.load());
      runner.run_train();
      std::cerr << "train: wrote " << runner.checkpoint_path().string() << "\n";
      return 0;
    }
    if (fit_market->parsed()) {
      riskbid::ExperimentRunner runner(market_args.load());
      runner.run_fit_market();
      std::cerr << "fit-market: wrote " << runner.market_path().string() << "\n";
      return 0;
    }
    if (build_tables->parsed()) {
      riskbid::ExperimentRunner runner(tables_args.load());
      const auto start = std::chrono::steady_clock::now();
      runner.run_build_tables();
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      std::cerr << "build-tables: " << elapsed.count() << " ms\n";
      return 0;
    }
    if (sweep_cmd->parsed()) {
      riskbid::ExperimentRunner runner(sweep_args.load());
      runner.run_sweep();
      std::cerr << "sweep: wrote " << runner.sweep_points_path().string() << "\n";
      return 0;
    }
    if (report_cmd->parsed()) {
      riskbid::ExperimentRunner runner(report_args.load());
      runner.run_report();
      std::cerr << "report: wrote " << runner.report_json_path().string() << "\n";
      return 0;
    }
    if (run_cmd->parsed()) {
      riskbid::ExperimentRunner runner(run_args.load());
      runner.run_all();
      std::cerr << "run-experiment: wrote " << runner.report_json_path().string()
                << "\n";
      return 0;
    }
    if (replay_cmd->parsed()) {
      require_file(rp_log, "log");
      require_file(rp_checkpoint, "checkpoint");
      const auto model = riskbid::GaussianWeightModel::load(rp_checkpoint);
      auto records = riskbid::read_log(rp_log);
      riskbid::set_dimension(records, model.dimension());

      riskbid::StrategyConfig sc;
      sc.kind = riskbid::strategy_kind_from_string(rp_strategy);
      sc.alpha = rp_alpha;
      sc.phi = rp_phi;
      sc.v = rp_v;

      std::optional<riskbid::MomentTable> moments;
      if (!rp_moments.empty()) {
        require_file(rp_moments, "moment table");
        moments = riskbid::MomentTable::load(rp_moments);
      }
      std::optional<riskbid::RmpBidTable> rmp;
      if (!rp_rmp.empty()) {
        require_file(rp_rmp, "rmp table");
        rmp = riskbid::RmpBidTable::load(rp_rmp);
      }
      std::optional<riskbid::MarketPriceModel> market;
      if (!rp_market.empty()) {
        require_file(rp_market, "market model");
        market = riskbid::MarketPriceModel::load(rp_market);
      }

      const riskbid::Bidder bidder(sc, model, moments ? &*moments : nullptr,
                                   rmp ? &*rmp : nullptr,
                                   market ? &*market : nullptr);
      riskbid::ReplayConfig rc;
      rc.strategy = sc;
      rc.budget = rp_budget;
      const auto metrics = riskbid::replay(records, rc, bidder);
      const std::string text = metrics_json(metrics).dump(2) + "\n";
      if (rp_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(rp_out, std::ios::trunc);
        if (!out) throw riskbid::IoError("cannot open for writing: " + rp_out);
        out << text;
      }
      return 0;
    }
    if (select_cmd->parsed()) {
      require_file(sl_points, "sweep points");
      std::ifstream in(sl_points);
      ordered_json doc = ordered_json::parse(in);
      const std::string want = sl_strategy;
      for (const auto& cell : doc.at("cells")) {
        if (cell.at("strategy").get<std::string>() != want) continue;
        const bool has_fraction = !cell.at("budget_fraction").is_null();
        if (sl_fraction.has_value() != has_fraction) continue;
        if (sl_fraction &&
            cell.at("budget_fraction").get<double>() != *sl_fraction) {
          continue;
        }
        std::vector<riskbid::SweepPoint> points;
        for (const auto& pj : cell.at("points")) {
          riskbid::SweepPoint p;
          p.alpha = pj.at("alpha").get<double>();
          p.phi = pj.at("phi").get<double>();
          p.metrics.profit = pj.at("metrics").at("profit").get<double>();
          p.metrics.cost = pj.at("metrics").at("cost").get<double>();
          points.push_back(p);
        }
        const std::size_t idx = riskbid::select_model(points, sl_lambda);
        ordered_json out;
        out["strategy"] = want;
        out["lambda"] = sl_lambda;
        out["alpha"] = points[idx].alpha;
        out["phi"] = points[idx].phi;
        out["profit"] = points[idx].metrics.profit;
        out["cost"] = points[idx].metrics.cost;
        out["cp_profit"] = riskbid::cp_profit(points[idx].metrics.profit,
                                              points[idx].metrics.cost, sl_lambda);
        std::cout << out.dump(2) << "\n";
        return 0;
      }
      throw ConfigError("no sweep cell matches strategy " + want);
    }
    if (demo->parsed()) {
      return cmd_demo_fig2(demo_seed);
    }
    if (gen->parsed()) {
      const auto log = riskbid::generate_synthetic(gen_spec, gen_seed);
      riskbid::write_log(gen_out, log.records, gen_spec.dimension);
      if (!gen_truth_out.empty()) {
        std::ofstream out(gen_truth_out, std::ios::trunc);
        if (!out) throw riskbid::IoError("cannot open for writing: " + gen_truth_out);
        out.precision(17);
        for (std::size_t i = 0; i < log.true_weights.size(); ++i) {
          out << i << "\t" << log.true_weights[i] << "\n";
        }
      }
      std::cerr << "gen-synthetic: " << log.records.size() << " records\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
