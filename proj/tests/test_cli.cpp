#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "riskbid/log.hpp"
#include "riskbid/simulator.hpp"
#include "support/test_util.hpp"

using ordered_json = nlohmann::ordered_json;
using riskbid::test::TempDir;
using riskbid::test::read_file;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const TempDir& dir, const std::string& args, const std::string& tag) {
  const auto out_path = dir.file("cli_" + tag + ".out");
  const auto err_path = dir.file("cli_" + tag + ".err");
  const std::string command = std::string(RISKBID_CLI_PATH) + " " + args + " > " +
                              out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string experiment_config(const TempDir& dir, std::uint64_t seed) {
  std::ostringstream cfg;
  cfg << "[paths]\n"
      << "train = " << dir.file("train.tsv").string() << "\n"
      << "validation = " << dir.file("val.tsv").string() << "\n"
      << "test = " << dir.file("test.tsv").string() << "\n"
      << "artifacts = " << dir.file("artifacts").string() << "\n"
      << "[model]\n"
      << "eta = 0.05\n"
      << "epochs = 2\n"
      << "[tables]\n"
      << "bins_m = 24\n"
      << "bins_s2 = 16\n"
      << "samples = 800\n"
      << "[strategies]\n"
      << "list = lr, var, rmp\n"
      << "alpha_grid = -0.5, 0, 0.5, 1\n"
      << "[selection]\n"
      << "lambdas = 0, 0.2, 0.4\n"
      << "[budget]\n"
      << "fractions = 0.5\n"
      << "[run]\n"
      << "seed = " << seed << "\n"
      << "threads = 2\n";
  return cfg.str();
}

void write_corpus(const TempDir& dir) {
  riskbid::GeneratorSpec spec;
  spec.dimension = 300;
  spec.records = 3000;
  spec.features_per_record = 6;
  const auto log = riskbid::generate_synthetic(spec, 512);
  using Records = std::vector<riskbid::LogRecord>;
  const Records train(log.records.begin(), log.records.begin() + 2000);
  const Records val(log.records.begin() + 2000, log.records.begin() + 2500);
  const Records test_split(log.records.begin() + 2500, log.records.end());
  riskbid::write_log(dir.file("train.tsv"), train, spec.dimension);
  riskbid::write_log(dir.file("val.tsv"), val, spec.dimension);
  riskbid::write_log(dir.file("test.tsv"), test_split, spec.dimension);
}

}  // namespace

TEST_CASE("usage and missing-path failures exit with code 2") {
  TempDir dir("cli_usage");
  CHECK(run_cli(dir, "no-such-command", "bad").exit_code == 2);

  const auto missing = run_cli(dir, "train --config " + dir.file("nope.cfg").string(),
                               "missing_cfg");
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.find("nope.cfg") != std::string::npos);

  // Config referencing a non-existent training log also fails with its path.
  write_text(dir.file("exp.cfg"), experiment_config(dir, 1));
  const auto no_log = run_cli(dir, "train --config " + dir.file("exp.cfg").string(),
                              "missing_log");
  CHECK(no_log.exit_code == 2);
  CHECK(no_log.err.find("train.tsv") != std::string::npos);
}

TEST_CASE("demo-fig2 prints the worked example values") {
  TempDir dir("cli_demo");
  const auto result = run_cli(dir, "demo-fig2 --seed 42", "demo");
  REQUIRE(result.exit_code == 0);

  const auto grab = [&](const std::string& key) {
    const auto pos = result.out.find(key);
    REQUIRE(pos != std::string::npos);
    const auto eq = result.out.find('=', pos + key.size() - 1);
    return std::stod(result.out.substr(eq + 1));
  };
  CHECK(std::abs(grab("E[ctr] =") - 0.283) < 0.005);
  CHECK(std::abs(grab("truth-telling bid v*E[ctr] =") - 84.9) < 1.5);
  const auto pct_pos = result.out.find("b = 84:");
  REQUIRE(pct_pos != std::string::npos);
  const double pct = std::stod(result.out.substr(pct_pos + 7));
  CHECK(std::abs(pct - 16.7) < 1.5);
}

TEST_CASE("gen-synthetic and train are byte-deterministic") {
  TempDir dir("cli_train");
  const std::string gen_args =
      " --records 2000 --dimension 300 --features-per-record 6 --seed 99";
  CHECK(run_cli(dir, "gen-synthetic --out " + dir.file("a.tsv").string() + gen_args,
                "gen_a").exit_code == 0);
  CHECK(run_cli(dir, "gen-synthetic --out " + dir.file("b.tsv").string() + gen_args,
                "gen_b").exit_code == 0);
  CHECK(read_file(dir.file("a.tsv")) == read_file(dir.file("b.tsv")));

  write_corpus(dir);
  write_text(dir.file("exp.cfg"), experiment_config(dir, 7));
  const std::string cfg_arg = " --config " + dir.file("exp.cfg").string();

  REQUIRE(run_cli(dir, "train" + cfg_arg, "train1").exit_code == 0);
  const std::string first = read_file(dir.file("artifacts/model.ckpt"));
  REQUIRE(run_cli(dir, "train" + cfg_arg, "train2").exit_code == 0);
  const std::string second = read_file(dir.file("artifacts/model.ckpt"));
  CHECK(first == second);
  CHECK(!first.empty());

  // Every trained precision is at least the prior q0 = 1.
  std::istringstream ckpt(first);
  std::string line;
  std::getline(ckpt, line);  // header
  std::size_t rows = 0;
  while (std::getline(ckpt, line)) {
    std::istringstream row(line);
    std::uint64_t id;
    double mu, q;
    row >> id >> mu >> q;
    CHECK(q >= 1.0);
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("build-tables writes stable table files quickly") {
  TempDir dir("cli_tables");
  write_corpus(dir);
  write_text(dir.file("exp.cfg"), experiment_config(dir, 21));
  const std::string cfg_arg = " --config " + dir.file("exp.cfg").string();
  REQUIRE(run_cli(dir, "train" + cfg_arg, "train").exit_code == 0);
  REQUIRE(run_cli(dir, "fit-market" + cfg_arg, "market").exit_code == 0);

  const auto start = std::chrono::steady_clock::now();
  REQUIRE(run_cli(dir, "build-tables" + cfg_arg, "tables1").exit_code == 0);
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  CHECK(elapsed.count() < 10000);  // small smoke grid stays fast

  const std::string moments = read_file(dir.file("artifacts/moments.rbmt"));
  CHECK(moments.rfind("RBMT1", 0) == 0);
  const std::string rmp = read_file(dir.file("artifacts/rmp_0.rbbt"));
  CHECK(rmp.rfind("RBBT1", 0) == 0);

  REQUIRE(run_cli(dir, "build-tables" + cfg_arg, "tables2").exit_code == 0);
  CHECK(read_file(dir.file("artifacts/moments.rbmt")) == moments);
  CHECK(read_file(dir.file("artifacts/rmp_0.rbbt")) == rmp);
}

TEST_CASE("replay reproduces hand-computed metrics on a fixture log") {
  TempDir dir("cli_replay");
  // Feature 0 has mu = 0: ctr = 0.5, so bid = 5 at v = 10, phi = 1.
  write_text(dir.file("model.ckpt"), "2\t0\t1\n0\t0\t1\n");
  write_text(dir.file("tiny.tsv"), "#dim=2\n1\t2\t0\n0\t10\t0\n1\t3\t0 1\n");

  const auto result = run_cli(dir,
                              "replay --log " + dir.file("tiny.tsv").string() +
                                  " --checkpoint " + dir.file("model.ckpt").string() +
                                  " --strategy lr --phi 1 --v 10",
                              "replay");
  REQUIRE(result.exit_code == 0);
  const ordered_json m = ordered_json::parse(result.out);
  CHECK(m.at("bids").get<int>() == 3);
  CHECK(m.at("wins").get<int>() == 2);
  CHECK(m.at("clicks").get<int>() == 2);
  CHECK(m.at("cost").get<double>() == 5.0);
  CHECK(m.at("revenue").get<double>() == 20.0);
  CHECK(m.at("profit").get<double>() == 15.0);
  CHECK(m.at("roi").get<double>() == doctest::Approx(3.0));
  CHECK(m.at("cpm").get<double>() == doctest::Approx(2500.0));
  CHECK(m.at("ctr").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("ecpc").get<double>() == doctest::Approx(2.5));
  CHECK(m.at("win_rate").get<double>() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("the staged pipeline equals run-experiment byte for byte") {
  TempDir staged("cli_staged");
  write_corpus(staged);
  write_text(staged.file("exp.cfg"), experiment_config(staged, 33));
  const std::string cfg_a = " --config " + staged.file("exp.cfg").string();
  REQUIRE(run_cli(staged, "train" + cfg_a, "s1").exit_code == 0);
  REQUIRE(run_cli(staged, "fit-market" + cfg_a, "s2").exit_code == 0);
  REQUIRE(run_cli(staged, "build-tables" + cfg_a, "s3").exit_code == 0);
  REQUIRE(run_cli(staged, "sweep" + cfg_a, "s4").exit_code == 0);
  REQUIRE(run_cli(staged, "report" + cfg_a, "s5").exit_code == 0);

  TempDir full("cli_full");
  write_corpus(full);
  write_text(full.file("exp.cfg"), experiment_config(full, 33));
  const std::string cfg_b = " --config " + full.file("exp.cfg").string();
  REQUIRE(run_cli(full, "run-experiment" + cfg_b, "all").exit_code == 0);

  // Identical corpora and seeds: the reports differ only if the pipelines do.
  const std::string report_a = read_file(staged.file("artifacts/report.json"));
  const std::string report_b = read_file(full.file("artifacts/report.json"));
  CHECK(report_a == report_b);
  const std::string csv_a = read_file(staged.file("artifacts/report.csv"));
  const std::string csv_b = read_file(full.file("artifacts/report.csv"));
  CHECK(csv_a == csv_b);

  // select picks the same point the report recorded for lambda = 0.
  const auto sel = run_cli(staged,
                           "select --points " +
                               staged.file("artifacts/sweep_points.json").string() +
                               " --lambda 0 --strategy var",
                           "select");
  REQUIRE(sel.exit_code == 0);
  const ordered_json chosen = ordered_json::parse(sel.out);
  const ordered_json report = ordered_json::parse(report_a);
  bool found = false;
  for (const auto& s : report.at("selections")) {
    if (s.at("strategy") == "var" && s.at("budget_fraction").is_null() &&
        s.at("lambda").get<double>() == 0.0) {
      CHECK(s.at("alpha").get<double>() == chosen.at("alpha").get<double>());
      CHECK(s.at("phi").get<double>() == chosen.at("phi").get<double>());
      found = true;
    }
  }
  CHECK(found);
}
