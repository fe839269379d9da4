// Machine-readable run reports: per-check rows, CSV emission with exact
// round-trip formatting (deterministic bytes for identical inputs), and a
// JSON summary mirroring the report fields.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "surflab/core.hpp"

namespace surflab::report {

struct CheckRow {
  std::string name;
  bool pass = false;
  bool expected_fail = false;  // excluded from the exit-code conjunction
  double measured = 0.0;
  double tolerance = 0.0;
  double runtime_s = 0.0;
  std::string note;
};

struct RunReport {
  std::string command;
  std::string scenario_name;
  std::map<std::string, std::string> config_echo;
  std::vector<CheckRow> checks;
  std::vector<std::string> artifacts;  // file paths written by the command

  void add(const std::string& name, bool pass, double measured, double tolerance,
           double runtime_s = 0.0, const std::string& note = "", bool expected_fail = false) {
    checks.push_back({name, pass, expected_fail, measured, tolerance, runtime_s, note});
  }

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.expected_fail && !c.pass) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// CSV writing: fixed schemas, g17 floats, '\n' line ends, no locale effects.

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw InvalidInput("cannot open csv for writing: " + path);
    for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
    cols_ = header.size();
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != cols_) throw InvalidInput("csv row arity mismatch");
    for (size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << "\n";
  }

  static std::string num(double v) { return fmt_g17(v); }
  static std::string num(int v) { return std::to_string(v); }
  static std::string flag(bool b) { return b ? "1" : "0"; }

 private:
  std::ofstream out_;
  size_t cols_ = 0;
};

inline std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory: " + dir);
}

// checks.csv: one row per executed check.  Wall-clock timing lives in
// summary.json only, so identical config + seed reproduces the CSV bytes.
inline std::string write_checks_csv(const std::string& dir, const RunReport& rep) {
  const std::string path = join_path(dir, "checks.csv");
  CsvWriter w(path, {"name", "status", "expected_fail", "measured", "tolerance", "note"});
  for (const auto& c : rep.checks)
    w.row({c.name, c.pass ? "pass" : "fail", CsvWriter::flag(c.expected_fail),
           CsvWriter::num(c.measured), CsvWriter::num(c.tolerance), c.note});
  return path;
}

// summary.json: full RunReport echo.
inline std::string write_summary_json(const std::string& dir, const RunReport& rep) {
  nlohmann::ordered_json j;
  j["command"] = rep.command;
  j["scenario"] = rep.scenario_name;
  j["all_pass"] = rep.all_pass();
  j["config"] = rep.config_echo;  // std::map: sorted, deterministic
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& c : rep.checks) {
    nlohmann::ordered_json r;
    r["name"] = c.name;
    r["status"] = c.pass ? "pass" : "fail";
    r["expected_fail"] = c.expected_fail;
    r["measured"] = fmt_g17(c.measured);
    r["tolerance"] = fmt_g17(c.tolerance);
    r["runtime_s"] = fmt_g17(c.runtime_s);
    if (!c.note.empty()) r["note"] = c.note;
    rows.push_back(r);
  }
  j["checks"] = rows;
  j["artifacts"] = rep.artifacts;
  const std::string path = join_path(dir, "summary.json");
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open summary.json for writing");
  out << j.dump(2) << "\n";
  return path;
}

}  // namespace surflab::report
