#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace mris {

// 17 significant digits; non-finite values as inf / -inf / nan.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    for (double v : values) cells.push_back(format_double(v));
    rows_.push_back(std::move(cells));
  }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << str();
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// FNV-1a 64-bit digest, hex encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  bool required = true;  // informational verdicts do not affect the exit code
};

class RunReport {
 public:
  RunReport(std::string command, std::string inputs_digest, std::uint64_t seed)
      : command_(std::move(command)), digest_(std::move(inputs_digest)), seed_(seed) {}

  void add_output(const std::filesystem::path& p) { outputs_.push_back(p.string()); }
  void add(Verdict v) { verdicts_.push_back(std::move(v)); }
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  bool all_pass() const {
    for (const auto& v : verdicts_)
      if (v.required && !v.pass) return false;
    return true;
  }
  const std::vector<Verdict>& verdicts() const { return verdicts_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command_;
    j["inputs_digest"] = digest_;
    j["seed"] = seed_;
    j["outputs"] = outputs_;
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : verdicts_)
      vs.push_back({{"name", v.name},
                    {"pass", v.pass},
                    {"value", format_double(v.value)},
                    {"threshold", format_double(v.threshold)},
                    {"required", v.required}});
    j["verdicts"] = vs;
    j["results"] = extra_;
    j["all_pass"] = all_pass();
    return j;
  }

  std::string table() const {
    std::ostringstream os;
    for (const auto& v : verdicts_) {
      os << (v.pass ? "PASS " : (v.required ? "FAIL " : "info ")) << v.name << "  value=" << format_double(v.value)
         << "  threshold=" << format_double(v.threshold) << '\n';
    }
    return os.str();
  }

 private:
  std::string command_;
  std::string digest_;
  std::uint64_t seed_;
  std::vector<std::string> outputs_;
  std::vector<Verdict> verdicts_;
  nlohmann::json extra_ = nlohmann::json::object();
};

// Gnuplot script plotting column `ycol` against `xcol` of each CSV.
inline std::string plot_script(const std::string& title, const std::vector<std::string>& csv_files, int xcol, int ycol,
                               const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set title '" << title << "'\n"
     << "set xlabel '" << xlabel << "'\n"
     << "set ylabel '" << ylabel << "'\n"
     << "plot ";
  for (std::size_t i = 0; i < csv_files.size(); ++i)
    os << (i ? ", \\\n     " : "") << "'" << csv_files[i] << "' using " << xcol << ":" << ycol << " with linespoints";
  os << "\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace mris
