#pragma once

// 128-way shard routing. Object keys (sha1 hex) shard by the top seven bits
// of the leading byte; project names shard by the top seven bits of their
// 32-bit FNV-1a digest.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/fnv.hpp"
#include "reuse/gzio.hpp"

namespace reuse {

constexpr int kPartitionCount = 128;

struct PartitionId {
  int value = 0;

  explicit PartitionId(int v) : value(v) {
    if (v < 0 || v >= kPartitionCount)
      throw Error("partition id out of range: " + std::to_string(v));
  }

  friend bool operator==(PartitionId, PartitionId) = default;
};

inline PartitionId partition_by_sha1(std::string_view sha1_hex) {
  if (!is_hex40(sha1_hex))
    throw Error("malformed sha1 key: '" + std::string(sha1_hex) + "'");
  int first_byte = hex_nibble(sha1_hex[0]) * 16 + hex_nibble(sha1_hex[1]);
  return PartitionId(first_byte >> 1);
}

inline PartitionId partition_by_name(std::string_view name) {
  return PartitionId(static_cast<int>(fnv1a32(name) >> 25));
}

// Intermediate shard files are named `<map>.<iii>.<ext>`, index zero-padded
// to three digits.
inline std::string partition_file_name(std::string_view map, PartitionId id,
                                       std::string_view ext = "gz") {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", id.value);
  std::string name(map);
  name.push_back('.');
  name.append(buf);
  name.push_back('.');
  name.append(ext);
  return name;
}

// `<map>.<iii>.<jjj>.<ext>` for doubly partitioned spill files.
inline std::string sub_partition_file_name(std::string_view map, PartitionId i,
                                           PartitionId j,
                                           std::string_view ext = "gz") {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d.%03d", i.value, j.value);
  std::string name(map);
  name.push_back('.');
  name.append(buf);
  name.push_back('.');
  name.append(ext);
  return name;
}

namespace detail {

// Lazily opened per-partition spill writers; partitions nothing was routed
// to get no file at all (readers treat a missing spill as empty).
class PartitionedSinks {
 public:
  PartitionedSinks(fs::path dir, std::string stem)
      : dir_(std::move(dir)), stem_(std::move(stem)), sinks_(kPartitionCount) {}

  void write(PartitionId id, std::string_view line) {
    auto& sink = sinks_[static_cast<std::size_t>(id.value)];
    if (!sink)
      sink = std::make_unique<GzipLineSink>(dir_ / partition_file_name(stem_, id));
    sink->write_line(line);
  }

  void close() {
    for (auto& sink : sinks_)
      if (sink) sink->close();
  }

  fs::path path_of(PartitionId id) const {
    return dir_ / partition_file_name(stem_, id);
  }

 private:
  fs::path dir_;
  std::string stem_;
  std::vector<std::unique_ptr<GzipLineSink>> sinks_;
};

inline void write_empty_gz(const fs::path& path) {
  GzipLineSink sink(path);
  sink.close();
}

}  // namespace detail

}  // namespace reuse
