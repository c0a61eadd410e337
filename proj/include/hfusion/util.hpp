#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hfusion/errors.hpp"

namespace hfusion {

// %.17g round-trips IEEE-754 doubles exactly through text.
inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Report files use 6 significant digits.
inline std::string fmt_g6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline double parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) fail(Errc::bad_config, "empty number");
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    fail(Errc::bad_config, "not a number: '" + t + "'");
  return v;
}

inline long long parse_int(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) fail(Errc::bad_config, "empty integer");
  char* end = nullptr;
  long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    fail(Errc::bad_config, "not an integer: '" + t + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) fail(Errc::bad_config, "empty integer");
  char* end = nullptr;
  unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    fail(Errc::bad_config, "not an integer: '" + t + "'");
  return v;
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& p,
                            const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write " + p.string());
  out << content;
  if (!out) fail(Errc::io_error, "write failed: " + p.string());
}

}  // namespace hfusion
