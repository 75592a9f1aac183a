#include "rotdop/output.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <system_error>

namespace rotdop {

std::string csv_escape(const std::string &field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string to_csv(const CsvTable &t) {
  std::string out;
  auto line = [&out](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(cells[i]);
    }
    out += "\r\n";
  };
  line(t.header);
  for (const auto &r : t.rows) line(r);
  return out;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {
std::string num(double x) { return format_number(x); }
} // namespace

CsvTable spectrum_table(const Spectrum &s) {
  CsvTable t{{"detuning_mhz", "fluorescence"}, {}};
  for (std::size_t i = 0; i < s.detunings.size(); ++i)
    t.add({num(to_mhz(s.detunings[i])), num(s.fluorescence[i])});
  return t;
}

CsvTable scan_table(const ScanResult &s) {
  const bool radial = s.kind == "radial";
  CsvTable t{{radial ? "r_um" : "phi_deg", "valid", "center_mhz", "fwhm_khz", "depth", "sigma_depth",
              "relative_depth", "beam_intensity", "error"},
             {}};
  for (const auto &p : s.points) {
    const double x = radial ? p.abscissa * 1e6 : to_deg(p.abscissa);
    if (!p.valid) {
      t.add({num(x), "0", "", "", "", "", "", num(p.beam_intensity), p.error});
      continue;
    }
    t.add({num(x), "1", num(to_mhz(p.fit.center)), num(to_mhz(p.fit.fwhm) * 1e3), num(p.fit.depth),
           num(p.fit.sigma_depth), num(p.relative_depth), num(p.beam_intensity), ""});
  }
  return t;
}

CsvTable interval_table(const IntervalScan &s) {
  CsvTable t{{"velocity_m_s", "chi2", "accepted", "plausible", "converged", "parameters"}, {}};
  for (const auto &r : s.rows) {
    std::string params;
    for (std::size_t i = 0; i < r.fit.names.size(); ++i) {
      if (i) params += ';';
      params += r.fit.names[i] + "=" + num(r.fit.values[i]);
    }
    t.add({num(r.velocity), num(r.chi2), r.accepted ? "1" : "0", r.plausible ? "1" : "0",
           r.converged ? "1" : "0", params});
  }
  return t;
}

CsvTable dataset_table(const DepthDataset &d) {
  CsvTable t{{"r_um", "depth", "sigma"}, {}};
  for (const auto &p : d.points) t.add({num(p.r * 1e6), num(p.depth), num(p.sigma)});
  return t;
}

OutputFormat output_format_from_string(const std::string &s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  if (s == "both") return OutputFormat::Both;
  throw ValidationError("unknown output format '" + s + "' (csv, json, both)");
}

std::string resolve_output_dir(const std::string &cli_value) {
  if (!cli_value.empty()) return cli_value;
  if (const char *env = std::getenv("ROTDOP_OUTPUT_DIR"); env && *env) return env;
  return "out";
}

void write_text_atomic(const std::string &path, const std::string &text) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::vector<std::string> write_result(const std::string &dir, const std::string &stem, OutputFormat fmt,
                                      const CsvTable &table, const nlohmann::ordered_json &meta) {
  std::vector<std::string> written;
  const auto base = (std::filesystem::path(dir) / stem).string();
  if (fmt != OutputFormat::Json) {
    write_text_atomic(base + ".csv", to_csv(table));
    written.push_back(base + ".csv");
  }
  // The sidecar is always written: it is what ties a table to its config.
  nlohmann::ordered_json j = meta;
  if (fmt != OutputFormat::Csv) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto &r : table.rows) {
      nlohmann::ordered_json row;
      for (std::size_t i = 0; i < table.header.size() && i < r.size(); ++i) row[table.header[i]] = r[i];
      rows.push_back(row);
    }
    j["rows"] = rows;
  }
  write_text_atomic(base + ".json", j.dump(2) + "\n");
  written.push_back(base + ".json");
  return written;
}

} // namespace rotdop
