#include "floydwalk/report.hpp"

#include <charconv>

#include "floydwalk/error.hpp"

namespace floydwalk {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw_numeric("double formatting failed");
  return {buf, res.ptr};
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["verb"] = verb;
  j["config_hash"] = config_hash;
  j["version"] = version;
  j["conventions"]["green"] = green_convention;
  j["conventions"]["rng"] = rng;
  j["wall_seconds"] = wall_seconds;
  j["warnings"] = warnings;
  j["results"] = results;
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_config("cannot open file for writing: " + path);
  out << content;
  if (!out) throw_config("failed while writing: " + path);
}

void write_report(const std::string& path, const ExperimentReport& rep) {
  write_text_file(path, rep.to_json().dump(2) + "\n");
}

CsvWriter::CsvWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw_config("cannot open CSV for writing: " + path);
}

CsvWriter::~CsvWriter() {
  if (!closed_) out_.flush();
}

void CsvWriter::comment(const std::string& line) { out_ << "# " << line << "\n"; }

void CsvWriter::header(const std::vector<std::string>& cols) {
  cols_ = cols.size();
  for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
  out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cols_ != 0 && cells.size() != cols_)
    throw_config("CSV row width mismatch in " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << "\n";
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw_config("failed while writing CSV: " + path_);
  out_.close();
  closed_ = true;
}

}  // namespace floydwalk
