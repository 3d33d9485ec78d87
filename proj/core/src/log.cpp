#include "riskbid/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace riskbid {

namespace {

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::vector<LogRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());

  std::vector<LogRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::uint32_t declared_dim = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#dim=", 0) == 0) {
        const std::string value = line.substr(5);
        declared_dim = static_cast<std::uint32_t>(std::stoul(value));
      }
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(path.string(), line_no,
                       "expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    LogRecord rec;
    if (fields[0] == "0") {
      rec.click = 0;
    } else if (fields[0] == "1") {
      rec.click = 1;
    } else {
      throw ParseError(path.string(), line_no, "click label must be 0 or 1");
    }
    {
      const std::string_view price_text = fields[1];
      const auto [ptr, ec] =
          std::from_chars(price_text.data(), price_text.data() + price_text.size(),
                          rec.market_price);
      if (ec != std::errc() || ptr != price_text.data() + price_text.size() ||
          !std::isfinite(rec.market_price)) {
        throw ParseError(path.string(), line_no, "bad market price");
      }
      if (rec.market_price < 0.0) {
        throw ParseError(path.string(), line_no, "negative market price");
      }
    }
    std::vector<std::uint32_t> ids;
    for (std::string_view token : split(fields[2], ' ')) {
      if (token.empty()) continue;
      std::uint32_t id = 0;
      const auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), id);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError(path.string(), line_no,
                         "bad feature id: " + std::string(token));
      }
      ids.push_back(id);
    }
    if (ids.empty()) {
      throw ParseError(path.string(), line_no, "record has no features");
    }
    // Dimension is finalized after the scan; parse with an open bound.
    rec.features.indices = std::move(ids);
    std::sort(rec.features.indices.begin(), rec.features.indices.end());
    rec.features.indices.erase(
        std::unique(rec.features.indices.begin(), rec.features.indices.end()),
        rec.features.indices.end());
    records.push_back(std::move(rec));
  }

  std::uint32_t dim = declared_dim;
  for (const LogRecord& rec : records) {
    if (!rec.features.indices.empty()) {
      dim = std::max(dim, rec.features.indices.back() + 1);
    }
  }
  for (LogRecord& rec : records) rec.features.dimension = dim;
  return records;
}

void write_log(const std::filesystem::path& path,
               const std::vector<LogRecord>& records, std::uint32_t dimension) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.precision(17);
  out << "#dim=" << dimension << "\n";
  for (const LogRecord& rec : records) {
    out << rec.click << "\t" << rec.market_price << "\t";
    for (std::size_t k = 0; k < rec.features.indices.size(); ++k) {
      if (k > 0) out << ' ';
      out << rec.features.indices[k];
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::uint32_t infer_dimension(const std::vector<LogRecord>& records) {
  std::uint32_t dim = 0;
  for (const LogRecord& rec : records) {
    if (!rec.features.indices.empty()) {
      dim = std::max(dim, rec.features.indices.back() + 1);
    }
  }
  return dim;
}

void set_dimension(std::vector<LogRecord>& records, std::uint32_t dimension) {
  for (LogRecord& rec : records) {
    if (!rec.features.indices.empty() && rec.features.indices.back() >= dimension) {
      throw InvalidInput("set_dimension: feature id exceeds requested dimension");
    }
    rec.features.dimension = dimension;
  }
}

double total_cost(const std::vector<LogRecord>& records) {
  double acc = 0.0;
  for (const LogRecord& rec : records) acc += rec.market_price;
  return acc;
}

std::uint64_t total_clicks(const std::vector<LogRecord>& records) {
  std::uint64_t acc = 0;
  for (const LogRecord& rec : records) acc += rec.click;
  return acc;
}

std::uint32_t Vocabulary::lookup_or_add(const std::string& key) {
  const auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  ids_.emplace(key, id);
  names_.push_back(key);
  return id;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (std::size_t id = 0; id < names_.size(); ++id) {
    out << id << "\t" << names_[id] << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string(), line_no, "expected id<TAB>name");
    }
    const auto id = static_cast<std::uint32_t>(std::stoul(line.substr(0, tab)));
    if (id != v.names_.size()) {
      throw ParseError(path.string(), line_no, "vocabulary ids must be dense");
    }
    v.names_.push_back(line.substr(tab + 1));
    v.ids_.emplace(v.names_.back(), id);
  }
  return v;
}

ConvertStats convert_log(const std::filesystem::path& input,
                         const std::filesystem::path& output,
                         const ConvertSpec& spec, Vocabulary& vocab) {
  if (spec.feature_cols.empty()) {
    throw InvalidInput("convert: at least one feature column required");
  }
  std::ifstream in(input);
  if (!in) throw IoError("cannot open: " + input.string());
  std::ofstream out(output, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + output.string());

  int max_col = std::max(spec.click_col, spec.price_col);
  for (int c : spec.feature_cols) max_col = std::max(max_col, c);

  std::ostringstream body;
  body.precision(17);
  ConvertStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, spec.delimiter);
    if (static_cast<int>(fields.size()) <= max_col) {
      throw ParseError(input.string(), line_no,
                       "row has " + std::to_string(fields.size()) +
                           " columns, need > " + std::to_string(max_col));
    }
    const std::string_view click = fields[static_cast<std::size_t>(spec.click_col)];
    if (click != "0" && click != "1") {
      throw ParseError(input.string(), line_no, "click column must be 0 or 1");
    }
    double price = 0.0;
    try {
      price = std::stod(std::string(fields[static_cast<std::size_t>(spec.price_col)]));
    } catch (const std::exception&) {
      throw ParseError(input.string(), line_no, "bad price column");
    }
    if (price < 0.0 || !std::isfinite(price)) {
      throw ParseError(input.string(), line_no, "negative price");
    }
    std::vector<std::uint32_t> ids;
    ids.reserve(spec.feature_cols.size());
    for (int c : spec.feature_cols) {
      const std::string key =
          std::to_string(c) + ":" + std::string(fields[static_cast<std::size_t>(c)]);
      ids.push_back(vocab.lookup_or_add(key));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    body << click << "\t" << price << "\t";
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k > 0) body << ' ';
      body << ids[k];
    }
    body << "\n";
    ++stats.records;
  }
  stats.dimension = vocab.size();
  out << "#dim=" << stats.dimension << "\n" << body.str();
  if (!out) throw IoError("write failed: " + output.string());
  return stats;
}

}  // namespace riskbid
