#pragma once

// Shared plumbing: error types, ';'-separated record helpers, fixed-width
// timestamp encoding, hex checks, small file utilities.

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace reuse {

namespace fs = std::filesystem;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad command lines / bad configuration; the CLI maps this to exit code 1.
struct UsageError : Error {
  using Error::Error;
};

constexpr char kFieldSep = ';';

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(kFieldSep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Fills out[0..out.size()) with the first fields of the line; returns how many
// were present. Fields beyond out.size() are not scanned.
inline std::size_t split_prefix_fields(std::string_view line,
                                       std::span<std::string_view> out) {
  std::size_t n = 0;
  std::size_t start = 0;
  while (n < out.size()) {
    std::size_t pos = line.find(kFieldSep, start);
    if (pos == std::string_view::npos) {
      out[n++] = line.substr(start);
      return n;
    }
    out[n++] = line.substr(start, pos - start);
    start = pos + 1;
  }
  return n;
}

inline std::string join_fields(std::initializer_list<std::string_view> fields) {
  std::string line;
  std::size_t total = 0;
  for (auto f : fields) total += f.size() + 1;
  line.reserve(total);
  bool first = true;
  for (auto f : fields) {
    if (!first) line.push_back(kFieldSep);
    line.append(f);
    first = false;
  }
  return line;
}

// Timestamps in intermediate files are zero-padded to 10 digits so byte-wise
// key comparison equals numeric comparison. Export strips the padding.
constexpr int kTimeDigits = 10;
constexpr std::int64_t kMaxEncodableTime = 9999999999LL;  // width-10 ceiling

inline std::string pad_time(std::int64_t t) {
  if (t < 0 || t > kMaxEncodableTime)
    throw Error("timestamp out of encodable range: " + std::to_string(t));
  char buf[kTimeDigits + 1];
  std::snprintf(buf, sizeof buf, "%010lld", static_cast<long long>(t));
  return std::string(buf, kTimeDigits);
}

inline std::string_view strip_time_padding(std::string_view padded) {
  std::size_t i = 0;
  while (i + 1 < padded.size() && padded[i] == '0') ++i;
  return padded.substr(i);
}

inline std::int64_t parse_decimal(std::string_view s) {
  std::int64_t value = 0;
  if (s.empty()) throw Error("empty number");
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw Error("malformed number: '" + std::string(s) + "'");
  return value;
}

inline bool is_lower_hex(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
}

inline bool is_hex40(std::string_view s) {
  if (s.size() != 40) return false;
  for (char c : s)
    if (!is_lower_hex(c)) return false;
  return true;
}

inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Diagnostics-only path encoding: ';', '%', and control bytes become %XX so
// report lines stay one-record-per-line.
inline std::string percent_encode(std::string_view raw) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (c == kFieldSep || c == '%' || c < 0x20 || c == 0x7f) {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xf]);
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline void ensure_dir(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw Error("cannot create directory " + path.string() + ": " + ec.message());
}

}  // namespace reuse
