#pragma once

// Result files: RFC-4180 CSV tables and JSON sidecars with the config
// fingerprint. Files are written to a temporary name and renamed, so an
// interrupted run never leaves a half-written table behind.

#include <string>
#include <vector>

#include <json.hpp>

#include "rotdop/fitkit.hpp"
#include "rotdop/spectra.hpp"

namespace rotdop {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string &field);
std::string to_csv(const CsvTable &t);
/// Shortest round-tripping representation.
std::string format_number(double x);

CsvTable spectrum_table(const Spectrum &s);
CsvTable scan_table(const ScanResult &s);
CsvTable interval_table(const IntervalScan &s);
CsvTable dataset_table(const DepthDataset &d);

enum class OutputFormat { Csv, Json, Both };
OutputFormat output_format_from_string(const std::string &s);

/// CLI value if non-empty, else $ROTDOP_OUTPUT_DIR, else "out".
std::string resolve_output_dir(const std::string &cli_value);

void write_text_atomic(const std::string &path, const std::string &text);

/// Writes <dir>/<stem>.csv and/or <dir>/<stem>.json; the JSON carries `meta`
/// (which should include the fingerprint) and, when present, `body`.
/// Returns the paths written.
std::vector<std::string> write_result(const std::string &dir, const std::string &stem, OutputFormat fmt,
                                      const CsvTable &table, const nlohmann::ordered_json &meta);

} // namespace rotdop
