#pragma once

// Release-format output. One line per copy instance:
//
//   originating_project;origin_time;blob_sha1;destination_project;dest_time
//
// Timestamps are plain decimal (internal zero-padding stripped), blobs are
// lowercase hex, lines are newline-terminated and sorted by
// (origin project, origin time, blob, destination project). Release files
// are named Ptb2PtFull<TAG>.<k>.gz for k in 0..127.

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/gzio.hpp"
#include "reuse/partition.hpp"
#include "reuse/thread_pool.hpp"

namespace reuse {

struct CopyInstance {
  std::string project_o;
  std::int64_t time_o = 0;
  std::string blob;
  std::string project_d;
  std::int64_t time_d = 0;

  auto operator<=>(const CopyInstance&) const = default;
};

inline std::string format_instance_line(const CopyInstance& inst) {
  return join_fields({inst.project_o, std::to_string(inst.time_o), inst.blob,
                      inst.project_d, std::to_string(inst.time_d)});
}

// Strict parse of one release line; nullopt when the grammar is violated.
inline std::optional<CopyInstance> parse_instance_line(std::string_view line) {
  auto fields = split_fields(line);
  if (fields.size() != 5) return std::nullopt;
  auto valid_name = [](std::string_view name) {
    if (name.empty()) return false;
    for (unsigned char c : name)
      if (c < 0x20 || c == 0x7f || c == kFieldSep) return false;
    return true;
  };
  auto valid_time = [](std::string_view t) {
    if (t.empty() || t.size() > 10) return false;
    if (t.size() > 1 && t[0] == '0') return false;  // padding must be stripped
    for (char c : t)
      if (c < '0' || c > '9') return false;
    return true;
  };
  if (!valid_name(fields[0]) || !valid_name(fields[3])) return std::nullopt;
  if (!valid_time(fields[1]) || !valid_time(fields[4])) return std::nullopt;
  if (!is_hex40(fields[2])) return std::nullopt;
  CopyInstance inst;
  inst.project_o = std::string(fields[0]);
  inst.time_o = parse_decimal(fields[1]);
  inst.blob = std::string(fields[2]);
  inst.project_d = std::string(fields[3]);
  inst.time_d = parse_decimal(fields[4]);
  return inst;
}

inline std::string release_file_name(const std::string& tag, int partition) {
  return "Ptb2PtFull" + tag + "." + std::to_string(partition) + ".gz";
}

struct ExportStageResult {
  std::map<std::string, std::uint64_t> counts;
};

inline ExportStageResult run_export(const fs::path& detect_dir,
                                    const fs::path& out_dir,
                                    const std::string& tag, ThreadPool& pool) {
  ensure_dir(out_dir);
  std::vector<std::uint64_t> lines(kPartitionCount, 0);
  pool.parallel_for(kPartitionCount, [&](std::size_t pk) {
    PartitionId k(static_cast<int>(pk));
    GzipLineSource src(detect_dir / partition_file_name("Ptb2Pt", k));
    GzipLineSink sink(out_dir / release_file_name(tag, k.value),
                      kReleaseGzipLevel);
    std::string line;
    while (src.next_line(line)) {
      std::array<std::string_view, 5> f{};
      if (split_prefix_fields(line, f) != 5)
        throw Error("corrupt Ptb2Pt record: '" + line + "'");
      sink.write_line(join_fields({f[0], strip_time_padding(f[1]), f[2], f[3],
                                   strip_time_padding(f[4])}));
      ++lines[pk];
    }
    sink.close();
  });
  ExportStageResult result;
  std::uint64_t total = 0;
  for (auto v : lines) total += v;
  result.counts = {{"exported_instances", total}};
  return result;
}

// Reads every instance back from a release directory (verification path).
inline std::vector<CopyInstance> read_release_instances(const fs::path& dir,
                                                        const std::string& tag) {
  std::vector<CopyInstance> out;
  for (int k = 0; k < kPartitionCount; ++k) {
    fs::path path = dir / release_file_name(tag, k);
    GzipLineSource src(path);
    std::string line;
    while (src.next_line(line)) {
      auto inst = parse_instance_line(line);
      if (!inst)
        throw Error("malformed release line in " + path.string() + ": '" +
                    line + "'");
      out.push_back(std::move(*inst));
    }
  }
  return out;
}

}  // namespace reuse
