#pragma once

#include "modcl/kv.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header plus rows; RFC 4180 quoting (quoted fields may contain commas and "").
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);

struct AggregateRow {
  std::vector<std::string> key;  // values of the grouping columns
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 when n == 1
};

struct Aggregate {
  std::vector<std::string> group_columns;
  std::string metric;
  std::vector<AggregateRow> rows;  // first-appearance order of each key
};

inline constexpr const char* kReportIgnoredColumns[] = {"seed", "wall_s", "acc_per_snr_json"};

/// Groups rows by `group_columns` (default: every column except the metric,
/// seed, wall_s and acc_per_snr_json) and reports mean and sample std of the
/// metric. Rows with an empty metric cell are skipped.
Aggregate aggregate(const CsvTable& table, const std::string& metric,
                    std::optional<std::vector<std::string>> group_columns = {});
/// Concatenates tables with identical headers.
CsvTable concat(const std::vector<CsvTable>& tables);
std::string format_aggregate(const Aggregate& agg);

// ------------------------------------------------------------------ run manifest

inline constexpr const char* kRunManifestFile = "run_manifest.txt";

/// Record of one CLI run: config snapshot, revision, platform, timing and the
/// artifacts it produced (paths relative to the run directory).
class RunManifest {
 public:
  RunManifest(std::string command, std::filesystem::path run_dir);

  void set_config(const KeyValueList& snapshot, const std::string& fingerprint);
  void add_artifact(const std::filesystem::path& relative);
  void set(const std::string& key, const std::string& value);
  /// Verifies every listed artifact exists, stamps the end time and writes the file.
  void finish(const std::string& status);

  [[nodiscard]] const std::filesystem::path& run_dir() const noexcept { return run_dir_; }

 private:
  std::string command_;
  std::filesystem::path run_dir_;
  std::string started_;
  KeyValueList config_;
  std::string fingerprint_;
  KeyValueList extra_;
  std::vector<std::filesystem::path> artifacts_;
};

std::string utc_timestamp(std::chrono::system_clock::time_point t, bool compact);
std::string platform_fingerprint();

/// Reads config_fingerprint from a run_manifest.txt next to `file`, if any.
std::optional<std::string> sibling_fingerprint(const std::filesystem::path& file);

}  // namespace modcl
