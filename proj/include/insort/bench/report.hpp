#pragma once

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "insort/core.hpp"

namespace insort::bench {

// One CSV line; columns keep insertion order.
struct ReportRow {
  std::vector<std::pair<std::string, std::string>> cells;

  void set(const std::string& name, const std::string& value) {
    for (auto& [n, v] : cells)
      if (n == name) {
        v = value;
        return;
      }
    cells.emplace_back(name, value);
  }
  void set(const std::string& name, std::uint64_t v) { set(name, std::to_string(v)); }
  void set(const std::string& name, std::int64_t v) { set(name, std::to_string(v)); }
  void set(const std::string& name, int v) { set(name, std::to_string(v)); }
  void set(const std::string& name, double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    set(name, os.str());
  }
  void set(const std::string& name, const char* v) { set(name, std::string(v)); }
  void set(const std::string& name, bool v) { set(name, std::string(v ? "true" : "false")); }

  const std::string* get(const std::string& name) const {
    for (const auto& [n, v] : cells)
      if (n == name) return &v;
    return nullptr;
  }
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Header is the union of column names in first-seen order.
inline void write_csv(const std::vector<ReportRow>& rows, std::ostream& os) {
  std::vector<std::string> header;
  for (const auto& r : rows)
    for (const auto& [n, _] : r.cells)
      if (std::find(header.begin(), header.end(), n) == header.end()) header.push_back(n);
  if (header.empty()) header = {"scenario"};
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << csv_escape(header[i]);
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string* v = r.get(header[i]);
      os << (i ? "," : "") << (v ? csv_escape(*v) : "");
    }
    os << "\n";
  }
}

inline void emit_report(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ResourceError("cannot open report " + path);
  write_csv(rows, f);
  if (!f) throw ResourceError("write failed for report " + path);
}

}  // namespace insort::bench
