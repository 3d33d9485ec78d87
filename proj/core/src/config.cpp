#include "riskbid/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace riskbid {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(d)) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": " + value);
  }
}

std::uint64_t to_u64(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long u = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return u;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": " + value);
  }
}

bool to_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean value for " + key + ": " + value);
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_double(item, "list item"));
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (!seed_set) throw ConfigError("config: [run] seed is mandatory");
  if (train_log.empty() || validation_log.empty() || test_log.empty()) {
    throw ConfigError("config: [paths] train, validation and test are required");
  }
  if (artifact_dir.empty()) throw ConfigError("config: [paths] artifacts is required");
  if (!(eta > 0.0)) throw ConfigError("config: eta must be > 0");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (!(q0 > 0.0)) throw ConfigError("config: q0 must be > 0");
  if (strategies.empty()) throw ConfigError("config: strategy list must be non-empty");
  if (alpha_grid.empty()) throw ConfigError("config: alpha grid must be non-empty");
  if (lambdas.empty()) throw ConfigError("config: lambda list must be non-empty");
  if (table_bins_m < 1 || table_bins_s2 < 1 || table_samples < 1) {
    throw ConfigError("config: table bins and samples must be >= 1");
  }
  if (bid_grid_steps < 1 || !(bid_grid_max_factor > 0.0)) {
    throw ConfigError("config: bid grid must have steps >= 1 and factor > 0");
  }
  for (double f : budget_fractions) {
    if (!(f > 0.0) || f > 1.0) {
      throw ConfigError("config: budget fractions must lie in (0, 1]");
    }
  }
  if (click_value_override && !(*click_value_override > 0.0)) {
    throw ConfigError("config: click value override must be > 0");
  }
  if (!(click_value_proportion > 0.0)) {
    throw ConfigError("config: click value proportion must be > 0");
  }
}

std::vector<double> ExperimentConfig::effective_phi_grid() const {
  if (!phi_grid.empty()) return phi_grid;
  std::vector<double> phis;
  for (int e = -6; e <= 6; ++e) phis.push_back(std::pow(2.0, e));
  return phis;
}

std::vector<double> ExperimentConfig::alphas_for(StrategyKind kind) const {
  if (kind == StrategyKind::kLr) return {0.0};
  return alpha_grid;
}

std::vector<double> ExperimentConfig::phis_for(bool budgeted) const {
  if (!budgeted) return {1.0};
  return effective_phi_grid();
}

namespace {

void apply(ExperimentConfig& cfg, const std::string& section,
           const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  if (full == "paths.train") cfg.train_log = value;
  else if (full == "paths.validation") cfg.validation_log = value;
  else if (full == "paths.test") cfg.test_log = value;
  else if (full == "paths.artifacts") cfg.artifact_dir = value;
  else if (full == "model.eta") cfg.eta = to_double(value, full);
  else if (full == "model.epochs") cfg.epochs = static_cast<int>(to_u64(value, full));
  else if (full == "model.q0") cfg.q0 = to_double(value, full);
  else if (full == "model.mu0") cfg.mu0 = to_double(value, full);
  else if (full == "model.shuffle") cfg.shuffle = to_bool(value, full);
  else if (full == "model.map_iterations") cfg.map_iterations = static_cast<int>(to_u64(value, full));
  else if (full == "model.warm_start") cfg.warm_start_checkpoint = value;
  else if (full == "market.kind") cfg.market_kind = market_kind_from_string(value);
  else if (full == "tables.bins_m") cfg.table_bins_m = static_cast<std::uint32_t>(to_u64(value, full));
  else if (full == "tables.bins_s2") cfg.table_bins_s2 = static_cast<std::uint32_t>(to_u64(value, full));
  else if (full == "tables.samples") cfg.table_samples = static_cast<std::uint32_t>(to_u64(value, full));
  else if (full == "tables.method") cfg.table_method = moment_method_from_string(value);
  else if (full == "tables.m_min") cfg.table_m_min = to_double(value, full);
  else if (full == "tables.m_max") cfg.table_m_max = to_double(value, full);
  else if (full == "tables.s2_min") cfg.table_s2_min = to_double(value, full);
  else if (full == "tables.s2_max") cfg.table_s2_max = to_double(value, full);
  else if (full == "tables.bid_max_factor") cfg.bid_grid_max_factor = to_double(value, full);
  else if (full == "tables.bid_steps") cfg.bid_grid_steps = static_cast<std::uint32_t>(to_u64(value, full));
  else if (full == "strategies.list") {
    cfg.strategies.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) cfg.strategies.push_back(strategy_kind_from_string(item));
    }
  } else if (full == "strategies.alpha_grid") cfg.alpha_grid = parse_double_list(value);
  else if (full == "strategies.phi_grid") cfg.phi_grid = parse_double_list(value);
  else if (full == "strategies.click_value_proportion") cfg.click_value_proportion = to_double(value, full);
  else if (full == "strategies.click_value") cfg.click_value_override = to_double(value, full);
  else if (full == "selection.lambdas") cfg.lambdas = parse_double_list(value);
  else if (full == "budget.fractions") cfg.budget_fractions = parse_double_list(value);
  else if (full == "run.seed") { cfg.seed = to_u64(value, full); cfg.seed_set = true; }
  else if (full == "run.threads") cfg.threads = static_cast<unsigned>(to_u64(value, full));
  else throw ConfigError("unknown config key: " + full);
}

}  // namespace

ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside a section");
    }
    apply(cfg, section, key, value);
  }
  return cfg;
}

void apply_config_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  apply(cfg, trim(assignment.substr(0, dot)),
        trim(assignment.substr(dot + 1, eq - dot - 1)),
        trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config_text(buffer.str(), path.string());
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out.precision(17);
  auto list = [](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s << ",";
      s << v[i];
    }
    return s.str();
  };
  out << "budget.fractions=" << list(budget_fractions) << "\n";
  out << "market.kind=" << to_string(market_kind) << "\n";
  out << "model.epochs=" << epochs << "\n";
  out << "model.eta=" << eta << "\n";
  out << "model.map_iterations=" << map_iterations << "\n";
  out << "model.mu0=" << mu0 << "\n";
  out << "model.q0=" << q0 << "\n";
  out << "model.shuffle=" << (shuffle ? "true" : "false") << "\n";
  out << "model.warm_start="
      << (warm_start_checkpoint ? warm_start_checkpoint->string() : "") << "\n";
  // Paths are deliberately excluded: the id addresses the experiment's
  // parameters, not where its files happen to live.
  out << "run.seed=" << seed << "\n";
  out << "selection.lambdas=" << list(lambdas) << "\n";
  out << "strategies.alpha_grid=" << list(alpha_grid) << "\n";
  out << "strategies.click_value="
      << (click_value_override ? *click_value_override : 0.0) << "\n";
  out << "strategies.click_value_proportion=" << click_value_proportion << "\n";
  std::string kinds;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    if (i) kinds += ",";
    kinds += to_string(strategies[i]);
  }
  out << "strategies.list=" << kinds << "\n";
  out << "strategies.phi_grid=" << list(effective_phi_grid()) << "\n";
  out << "tables.bid_max_factor=" << bid_grid_max_factor << "\n";
  out << "tables.bid_steps=" << bid_grid_steps << "\n";
  out << "tables.bins_m=" << table_bins_m << "\n";
  out << "tables.bins_s2=" << table_bins_s2 << "\n";
  auto bound = [](const std::optional<double>& v) {
    if (!v) return std::string("auto");
    std::ostringstream s;
    s.precision(17);
    s << *v;
    return s.str();
  };
  out << "tables.m_min=" << bound(table_m_min) << "\n";
  out << "tables.m_max=" << bound(table_m_max) << "\n";
  out << "tables.s2_min=" << bound(table_s2_min) << "\n";
  out << "tables.s2_max=" << bound(table_s2_max) << "\n";
  out << "tables.method=" << to_string(table_method) << "\n";
  out << "tables.samples=" << table_samples << "\n";
  return out.str();
}

std::string ExperimentConfig::digest_hex() const {
  const std::string text = canonical_text();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace riskbid
