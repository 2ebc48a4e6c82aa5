#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvex/expansion.hpp"

namespace curvex {

/// `[section]` headers followed by `key = value` lines; `#` and `;` start
/// comments.
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string str(const std::string& section, const std::string& key, const std::string& def) const;
  std::string str(const std::string& section, const std::string& key) const;
  double num(const std::string& section, const std::string& key, double def) const;
  double num(const std::string& section, const std::string& key) const;
  int integer(const std::string& section, const std::string& key, int def) const;
  bool flag(const std::string& section, const std::string& key, bool def) const;
  std::vector<double> list(const std::string& section, const std::string& key, std::vector<double> def) const;
  /// Semicolon-separated points of comma-separated coordinates.
  std::vector<std::vector<double>> points(const std::string& section, const std::string& key,
                                          std::vector<std::vector<double>> def) const;

  using Schema = std::map<std::string, std::set<std::string>>;
  /// Throws ConfigInvalid on the first section or key the schema lacks.
  void check_schema(const Schema& schema) const;
  /// Throws ConfigInvalid with source:line and the field name.
  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) const;

  nlohmann::json to_json() const;
  const std::string& source() const { return source_; }

 private:
  const Entry* find(const std::string& section, const std::string& key) const;

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

struct RunOptions {
  std::string experiment;
  Config config;
  std::optional<std::uint64_t> seed;
  /// Empty means no files are written.
  std::string out_dir;
  bool timestamp = true;
};

struct PlotRow {
  double t = 0.0, value = 0.0, fitted = 0.0, predicted = 0.0, residual = 0.0;
};

struct RunResult {
  nlohmann::json doc;
  bool pass = false;
  std::vector<PlotRow> rows;
};

const std::vector<std::string>& experiment_names();

/// Runs one experiment. Library errors propagate; a failed tolerance comes
/// back as pass = false. Writes <out_dir>/<experiment>.json and, when there
/// are samples, <experiment>.csv.
RunResult run_experiment(const RunOptions& opts);

/// Rows of (t, value, fitted, predicted, residual); fitted and predicted
/// evaluate c0 + c1 t + c2 t². Throws InvalidSpec on empty input.
std::vector<PlotRow> plot_rows(const std::vector<SeriesSample>& samples, const SeriesCoefficients& fit,
                               const SeriesCoefficients& prediction);

/// Writes the CSV with a header line. Throws InvalidSpec for empty input,
/// IoError when the file cannot be written; nothing is written on error.
void emit_plotdata(const std::vector<SeriesSample>& samples, const SeriesCoefficients& fit,
                   const SeriesCoefficients& prediction, const std::string& path);
void write_plot_rows(const std::vector<PlotRow>& rows, const std::string& path);

/// Full command line handling; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace curvex
