#pragma once

// Copy detection over blob timelines. Per blob partition: a sweep over b2tP
// elects the originating project (first entry), splits off never-reused
// singleton blobs, and drops independently-creatable blobs (exclusion list).
// Origins are then joined back against the timeline to expand one copy
// instance per (origin, destination) pair, and instances are regrouped into
// 128 partitions keyed by the originating project's name hash.

#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/gzio.hpp"
#include "reuse/join.hpp"
#include "reuse/partition.hpp"
#include "reuse/sort.hpp"
#include "reuse/thread_pool.hpp"

namespace reuse {

// sha1 of a zero-length git blob ("blob 0\0"); independently creatable by
// definition, so it is always excluded.
constexpr std::string_view kEmptyBlobSha1 =
    "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391";

struct ExclusionList {
  std::unordered_set<std::string> blobs{std::string(kEmptyBlobSha1)};

  bool contains(std::string_view blob) const {
    return blobs.find(std::string(blob)) != blobs.end();
  }

  // One lowercase sha1 per line; '#' comments and blank lines ignored.
  static ExclusionList load(const fs::path& path) {
    ExclusionList list;
    PlainLineSource src(path);
    std::string line;
    std::size_t lineno = 0;
    while (src.next_line(line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (!is_hex40(line))
        throw Error("exclusion list " + path.string() + ":" +
                    std::to_string(lineno) + ": not a lowercase sha1");
      list.blobs.insert(line);
    }
    return list;
  }

  // Fingerprint for stage input hashing.
  std::string canonical() const {
    std::vector<std::string> sorted(blobs.begin(), blobs.end());
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (const auto& b : sorted) {
      out += b;
      out.push_back('\n');
    }
    return out;
  }
};

struct OriginSweepStats {
  std::uint64_t origin_blobs = 0;
  std::uint64_t singleton_blobs = 0;
  std::uint64_t excluded_blobs = 0;
};

// Sweeps one b2tP partition (sorted by blob, time, project; unique (blob,
// project)). The first entry of a multi-project blob goes to `origins`, the
// sole entry of a single-project blob to `singletons`, excluded blobs to
// neither. Aborts on unsorted input.
inline OriginSweepStats find_origins(const fs::path& b2tp_path,
                                     const ExclusionList& exclusions,
                                     LineSink& origins, LineSink& singletons) {
  OriginSweepStats stats;
  CheckedRunReader reader(b2tp_path, KeySpec{0, 1, 2});
  std::string line;
  std::string group_first;
  std::string group_blob;
  std::uint64_t group_size = 0;

  auto close_group = [&]() {
    if (group_size == 0) return;
    if (exclusions.contains(group_blob)) {
      ++stats.excluded_blobs;
    } else if (group_size == 1) {
      std::array<std::string_view, 3> f{};
      split_prefix_fields(group_first, f);
      singletons.write_line(
          join_fields({f[0], strip_time_padding(f[1]), f[2]}));
      ++stats.singleton_blobs;
    } else {
      origins.write_line(group_first);
      ++stats.origin_blobs;
    }
  };

  while (reader.next(line)) {
    std::array<std::string_view, 1> f{};
    split_prefix_fields(line, f);
    if (f[0] != group_blob) {
      close_group();
      group_blob.assign(f[0]);
      group_first = line;
      group_size = 1;
    } else {
      ++group_size;
    }
  }
  close_group();
  return stats;
}

// Joins one origins partition with its b2tP partition and emits one
// `P_o;t_o;blob;P_d;t_d` instance per destination project (timestamps still
// zero-padded for the downstream sort). Aborts if an origin blob is missing
// from the timeline.
template <typename Emit>
std::uint64_t expand_copy_instances(const fs::path& origins_path,
                                    const fs::path& b2tp_path, Emit&& emit) {
  std::uint64_t instances = 0;
  JoinHandlers handlers;
  handlers.left_unmatched = [&](const std::vector<std::string>& group) {
    std::array<std::string_view, 1> f{};
    split_prefix_fields(group.front(), f);
    throw Error("origin blob " + std::string(f[0]) +
                " missing from b2tP (inconsistent inputs)");
  };
  merge_join(origins_path, KeySpec{0}, b2tp_path, KeySpec{0},
             [&](const std::string& origin, const std::string& entry) {
               std::array<std::string_view, 3> of{}, ef{};
               split_prefix_fields(origin, of);
               split_prefix_fields(entry, ef);
               if (of[2] == ef[2]) return;  // the origin itself
               emit(join_fields({of[2], of[1], of[0], ef[2], ef[1]}));
               ++instances;
             },
             handlers);
  return instances;
}

struct DetectStageResult {
  std::map<std::string, std::uint64_t> counts;
};

inline DetectStageResult run_detect(const fs::path& timeline_dir,
                                    const ExclusionList& exclusions,
                                    const fs::path& out_dir,
                                    const fs::path& tmp_dir, ThreadPool& pool,
                                    std::uint64_t sort_budget) {
  ensure_dir(out_dir);
  ensure_dir(tmp_dir);

  // per blob partition: origin sweep + instance expansion, fanned out by
  // the originating project's name partition
  std::vector<OriginSweepStats> sweep_stats(kPartitionCount);
  std::vector<std::uint64_t> instance_count(kPartitionCount, 0);
  pool.parallel_for(kPartitionCount, [&](std::size_t pj) {
    PartitionId j(static_cast<int>(pj));
    fs::path b2tp = timeline_dir / partition_file_name("b2tP", j);
    fs::path origins_path = out_dir / partition_file_name("origins", j);
    fs::path singletons_path = out_dir / partition_file_name("singletons", j);
    {
      GzipLineSink origins(origins_path);
      GzipLineSink singletons(singletons_path);
      sweep_stats[pj] = find_origins(b2tp, exclusions, origins, singletons);
      origins.close();
      singletons.close();
    }

    char stem[16];
    std::snprintf(stem, sizeof stem, "inst.%03d", j.value);
    detail::PartitionedSinks spills(tmp_dir, stem);
    instance_count[pj] = expand_copy_instances(
        origins_path, b2tp, [&](const std::string& instance) {
          std::array<std::string_view, 1> f{};
          split_prefix_fields(instance, f);
          spills.write(partition_by_name(f[0]), instance);
        });
    spills.close();
  });

  // regroup: per name partition, sort every blob-side spill by
  // (P_o, t_o, blob, P_d) and merge them
  std::vector<std::uint64_t> regrouped(kPartitionCount, 0);
  const KeySpec instance_key{0, 1, 2, 3};
  pool.parallel_for(kPartitionCount, [&](std::size_t pk) {
    PartitionId k(static_cast<int>(pk));
    SortOptions opt;
    opt.memory_budget = sort_budget;
    opt.temp_dir = tmp_dir;
    std::vector<SortedRun> runs;
    for (int j = 0; j < kPartitionCount; ++j) {
      char name[24];
      std::snprintf(name, sizeof name, "inst.%03d.%03d.gz", j, k.value);
      fs::path spill = tmp_dir / name;
      if (!fs::exists(spill)) continue;
      fs::path sorted = spill;
      sorted += ".sorted.gz";
      runs.push_back(external_sort(spill, sorted, instance_key, opt));
      fs::remove(spill);
    }
    GzipLineSink sink(out_dir / partition_file_name("Ptb2Pt", k));
    regrouped[pk] = k_way_merge(runs, instance_key, sink);
    sink.close();
    for (const auto& run : runs) fs::remove(run.path);
  });

  DetectStageResult result;
  std::uint64_t origins = 0, singletons = 0, excluded = 0, instances = 0,
                out_instances = 0;
  for (int i = 0; i < kPartitionCount; ++i) {
    origins += sweep_stats[static_cast<std::size_t>(i)].origin_blobs;
    singletons += sweep_stats[static_cast<std::size_t>(i)].singleton_blobs;
    excluded += sweep_stats[static_cast<std::size_t>(i)].excluded_blobs;
    instances += instance_count[static_cast<std::size_t>(i)];
    out_instances += regrouped[static_cast<std::size_t>(i)];
  }
  if (instances != out_instances)
    throw Error("regroup lost instances: expanded " + std::to_string(instances) +
                ", regrouped " + std::to_string(out_instances));
  result.counts = {{"origin_blobs", origins},
                   {"singleton_blobs", singletons},
                   {"excluded_blobs", excluded},
                   {"copy_instances", instances}};
  return result;
}

}  // namespace reuse
