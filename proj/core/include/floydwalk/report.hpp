#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace floydwalk {

inline constexpr const char* kRngDescription =
    "mt19937_64, per-stream seeds derived with splitmix64";

/// Self-describing result envelope written as report.json next to the CSV
/// artifacts: config hash, toolkit version, the Green diagonal convention and
/// RNG identity, wall clock, warnings, and the per-operation results tree.
struct ExperimentReport {
  std::string verb;
  std::string config_hash;
  std::string version;
  std::string green_convention;
  std::string rng;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
  nlohmann::json results = nlohmann::json::object();

  nlohmann::json to_json() const;
};

void write_report(const std::string& path, const ExperimentReport& rep);
void write_text_file(const std::string& path, const std::string& content);

/// Shortest round-trip decimal form, identical across runs and platforms that
/// implement to_chars correctly.
std::string format_double(double v);

/// CSV artifact writer. Every file carries '#' comment lines naming units and
/// conventions before the single header row; numeric cells go through
/// format_double so identical runs produce identical bytes.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  void comment(const std::string& line);
  void header(const std::vector<std::string>& cols);
  void row(const std::vector<std::string>& cells);
  void close();

  static std::string num(double v) { return format_double(v); }

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t cols_ = 0;
  bool closed_ = false;
};

}  // namespace floydwalk
