#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "riskbid/ctr_model.hpp"
#include "riskbid/errors.hpp"

namespace riskbid {

/// One replayable auction record: bid-request features, observed click, and
/// the winning (market) price paid in the logged auction.
struct LogRecord {
  FeatureVector features;
  int click = 0;
  double market_price = 0.0;
};

/// Normalized log file: TSV lines `click<TAB>market_price<TAB>f1 f2 f3 ...`,
/// optional leading header `#dim=<N>`. Malformed rows raise ParseError with
/// the line number.
std::vector<LogRecord> read_log(const std::filesystem::path& path);

void write_log(const std::filesystem::path& path,
               const std::vector<LogRecord>& records, std::uint32_t dimension);

/// Smallest feature space covering every record (max id + 1).
std::uint32_t infer_dimension(const std::vector<LogRecord>& records);

/// Re-homes every record into `dimension` (ids must already fit).
void set_dimension(std::vector<LogRecord>& records, std::uint32_t dimension);

double total_cost(const std::vector<LogRecord>& records);
std::uint64_t total_clicks(const std::vector<LogRecord>& records);

/// Dense-id vocabulary for raw categorical columns: `field:value` strings
/// get ids in order of first appearance.
class Vocabulary {
 public:
  std::uint32_t lookup_or_add(const std::string& key);
  std::uint32_t size() const { return static_cast<std::uint32_t>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> names_;
};

/// Column mapping for converting raw delimited logs (iPinYou-style) into the
/// normalized format. Column indices are 0-based.
struct ConvertSpec {
  int click_col = 0;
  int price_col = 1;
  std::vector<int> feature_cols;
  char delimiter = '\t';
};

struct ConvertStats {
  std::uint64_t records = 0;
  std::uint32_t dimension = 0;
};

/// Converts a raw log into the normalized TSV format, assigning dense ids
/// through the shared vocabulary (extend it across splits to keep ids
/// consistent).
ConvertStats convert_log(const std::filesystem::path& input,
                         const std::filesystem::path& output,
                         const ConvertSpec& spec, Vocabulary& vocab);

}  // namespace riskbid
