#include "modcl/report.hpp"

#include <Eigen/Core>
#include <sys/utsname.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#ifndef MODCL_SOURCE_REVISION
#define MODCL_SOURCE_REVISION "unknown"
#endif

namespace modcl {
namespace fs = std::filesystem;

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ReportError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw ReportError("CSV input is empty");

  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw ReportError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                        " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str());
  } catch (const ReportError& e) {
    throw ReportError(path.string() + ": " + e.what());
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    out += c;
    if (c == '"') out += '"';
  }
  return out + "\"";
}

Aggregate aggregate(const CsvTable& table, const std::string& metric,
                    std::optional<std::vector<std::string>> group_columns) {
  const auto metric_col = table.column(metric);
  if (!metric_col) throw ReportError("metric column '" + metric + "' not found");

  Aggregate agg;
  agg.metric = metric;
  if (group_columns) {
    agg.group_columns = *group_columns;
  } else {
    for (const auto& h : table.header) {
      const bool ignored = std::find(std::begin(kReportIgnoredColumns), std::end(kReportIgnoredColumns), h) !=
                           std::end(kReportIgnoredColumns);
      if (h != metric && !ignored) agg.group_columns.push_back(h);
    }
  }
  std::vector<std::size_t> cols;
  for (const auto& g : agg.group_columns) {
    const auto c = table.column(g);
    if (!c) throw ReportError("group column '" + g + "' not found");
    cols.push_back(*c);
  }

  std::map<std::vector<std::string>, std::size_t> slot;
  std::vector<std::vector<double>> values;
  for (const auto& row : table.rows) {
    const std::string& cell = row[*metric_col];
    if (cell.empty()) continue;
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ReportError("non-numeric " + metric + " value '" + cell + "'");
    }
    std::vector<std::string> key;
    for (auto c : cols) key.push_back(row[c]);
    auto [it, inserted] = slot.emplace(key, values.size());
    if (inserted) {
      values.emplace_back();
      agg.rows.push_back({key, 0, 0.0, 0.0});
    }
    values[it->second].push_back(v);
  }
  for (std::size_t i = 0; i < agg.rows.size(); ++i) {
    const auto& v = values[i];
    auto& row = agg.rows[i];
    row.n = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    row.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - row.mean) * (x - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  return agg;
}

CsvTable concat(const std::vector<CsvTable>& tables) {
  if (tables.empty()) throw ReportError("no tables to combine");
  CsvTable out;
  out.header = tables.front().header;
  for (const auto& t : tables) {
    if (t.header != out.header) throw ReportError("cannot combine CSV files with different headers");
    out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());
  }
  return out;
}

std::string format_aggregate(const Aggregate& agg) {
  std::string out;
  for (const auto& g : agg.group_columns) out += csv_escape(g) + ",";
  out += "n," + agg.metric + "_mean," + agg.metric + "_std\n";
  char buf[64];
  for (const auto& row : agg.rows) {
    for (const auto& k : row.key) out += csv_escape(k) + ",";
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", row.n, row.mean, row.stddev);
    out += buf;
  }
  return out;
}

// ------------------------------------------------------------------ run manifest

std::string utc_timestamp(std::chrono::system_clock::time_point t, bool compact) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), compact ? "%Y%m%dT%H%M%SZ" : "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string platform_fingerprint() {
  std::string out;
  utsname u{};
  if (uname(&u) == 0) out += std::string(u.sysname) + " " + u.release + " " + u.machine;
#if defined(__clang__)
  out += "; clang " __clang_version__;
#elif defined(__GNUC__)
  out += "; gcc " __VERSION__;
#endif
  out += "; eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
#if defined(__AVX2__)
  out += "; avx2";
#endif
  return out;
}

RunManifest::RunManifest(std::string command, fs::path run_dir)
    : command_(std::move(command)), run_dir_(std::move(run_dir)),
      started_(utc_timestamp(std::chrono::system_clock::now(), false)) {}

void RunManifest::set_config(const KeyValueList& snapshot, const std::string& fingerprint) {
  config_ = snapshot;
  fingerprint_ = fingerprint;
}

void RunManifest::add_artifact(const fs::path& relative) {
  if (std::find(artifacts_.begin(), artifacts_.end(), relative) == artifacts_.end()) artifacts_.push_back(relative);
}

void RunManifest::set(const std::string& key, const std::string& value) {
  for (auto& kv : extra_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  extra_.emplace_back(key, value);
}

void RunManifest::finish(const std::string& status) {
  for (const auto& a : artifacts_) {
    if (!fs::exists(run_dir_ / a)) throw ReportError("run artifact " + a.string() + " is missing");
  }
  KeyValueList kv = {
      {"command", command_},
      {"status", status},
      {"source_revision", MODCL_SOURCE_REVISION},
      {"platform", platform_fingerprint()},
      {"started_at", started_},
      {"finished_at", utc_timestamp(std::chrono::system_clock::now(), false)},
  };
  if (!fingerprint_.empty()) kv.emplace_back("config_fingerprint", fingerprint_);
  for (const auto& e : extra_) kv.push_back(e);
  for (std::size_t i = 0; i < artifacts_.size(); ++i) {
    kv.emplace_back("artifact." + std::to_string(i), artifacts_[i].generic_string());
  }
  for (const auto& [k, v] : config_) kv.emplace_back("config." + k, v);
  fs::create_directories(run_dir_);
  write_key_values(run_dir_ / kRunManifestFile, kv);
}

std::optional<std::string> sibling_fingerprint(const fs::path& file) {
  const fs::path manifest = file.parent_path() / kRunManifestFile;
  if (!fs::exists(manifest)) return std::nullopt;
  const auto kv = read_key_values(manifest);
  const auto it = kv.find("config_fingerprint");
  if (it == kv.end()) return std::nullopt;
  return it->second;
}

}  // namespace modcl
