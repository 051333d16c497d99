#ifndef GEOBRIDGE_OUTPUT_HPP_
#define GEOBRIDGE_OUTPUT_HPP_

// Deterministic serialization: doubles rounded to 12 significant digits,
// insertion-ordered JSON objects, files written to a temporary name and
// renamed into place.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geobridge/errors.hpp"
#include "geobridge/numerics.hpp"
#include "geobridge/report.hpp"

namespace geobridge {

using Json = nlohmann::ordered_json;

// Non-finite values become null.
inline Json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

inline Json num(const Vector& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline Json num(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::string fmt12(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline Json check_json(const Check& c) {
  Json j;
  j["name"] = c.name;
  j["value"] = num(c.value);
  j["tolerance"] = num(c.tolerance);
  j["pass"] = c.pass;
  j["expected"] = c.expect_pass ? "pass" : "fail";
  return j;
}

// Writes `content` to `path` via a sibling temporary file and rename, so a
// reader never sees a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw ConfigError("cannot create directory '" + path.parent_path().string() + "'");
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ConfigError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot move output into place at '" + path.string() + "'");
  }
}

// Rows of numbers as CSV with a header line.
inline std::string csv_table(const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  s += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + fmt12(r[i]);
    s += "\n";
  }
  return s;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_OUTPUT_HPP_
