#pragma once

// Blob timeline construction: turns the raw maps into b2tP — for every blob
// and deforked project, the earliest sanitized commit time.
//
// Per commit partition i:  c2fbb ⋈ c2dat ⋈ c2P  →  c2Ptb(i)
// then each c2Ptb(i) is split by blob into 128 sub-partitions, each sorted
// by (blob, time, project) and reduced to the first commit per (blob,
// project); the 128 commit-side slices of every blob partition j are merged
// and reduced again into b2tP(j).

#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/defork.hpp"
#include "reuse/gzio.hpp"
#include "reuse/ingest.hpp"
#include "reuse/join.hpp"
#include "reuse/partition.hpp"
#include "reuse/sort.hpp"
#include "reuse/thread_pool.hpp"

namespace reuse {

struct SanitizeBounds {
  std::int64_t min_time = 631152000;  // 1990-01-01
  std::int64_t max_time = 0;
};

struct SanitizeStats {
  std::uint64_t commits = 0;
  std::uint64_t repaired = 0;        // raw time outside bounds
  std::uint64_t missing_parents = 0; // parent ids not present in the set
};

// Fills effective_time so that no parent postdates a child:
//   in-bounds commit:      eff = max(raw, max over parents' eff)
//   out-of-bounds commit:  eff = max over parents' eff (min_time for roots),
//                          flagged repaired
// Missing parents count as having eff = min_time. Aborts on cycles.
inline SanitizeStats sanitize_times(std::vector<CommitMeta>& commits,
                                    const SanitizeBounds& bounds) {
  SanitizeStats stats;
  stats.commits = commits.size();

  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(commits.size() * 2);
  for (std::size_t i = 0; i < commits.size(); ++i)
    index.emplace(commits[i].commit, i);

  std::vector<std::vector<std::size_t>> children(commits.size());
  std::vector<std::size_t> pending_parents(commits.size(), 0);
  for (std::size_t i = 0; i < commits.size(); ++i) {
    for (const auto& parent : commits[i].parents) {
      auto it = index.find(parent);
      if (it == index.end()) {
        ++stats.missing_parents;
        continue;
      }
      children[it->second].push_back(i);
      ++pending_parents[i];
    }
  }

  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < commits.size(); ++i)
    if (pending_parents[i] == 0) ready.push_back(i);

  std::vector<std::int64_t> parent_eff(commits.size(), bounds.min_time);
  std::size_t processed = 0;
  while (!ready.empty()) {
    std::size_t i = ready.front();
    ready.pop_front();
    ++processed;
    CommitMeta& c = commits[i];
    bool in_bounds = c.raw_time >= bounds.min_time && c.raw_time <= bounds.max_time;
    c.effective_time = in_bounds ? std::max(c.raw_time, parent_eff[i]) : parent_eff[i];
    c.repaired = !in_bounds;
    if (c.repaired) ++stats.repaired;
    for (std::size_t child : children[i]) {
      parent_eff[child] = std::max(parent_eff[child], c.effective_time);
      if (--pending_parents[child] == 0) ready.push_back(child);
    }
  }
  if (processed != commits.size())
    throw Error("commit graph contains a cycle");
  return stats;
}

namespace detail {

// Streaming keep-first reduction over records sorted by (blob, time, ...):
// admits the first record of each (blob, project) pair.
class KeepFirstPerProject {
 public:
  bool admit(std::string_view blob, std::string_view project) {
    if (blob != current_blob_) {
      current_blob_.assign(blob);
      seen_.clear();
    }
    return seen_.insert(std::string(project)).second;
  }

 private:
  std::string current_blob_;
  std::unordered_set<std::string> seen_;
};

}  // namespace detail

struct TimelineStageResult {
  std::map<std::string, std::uint64_t> counts;
};

inline TimelineStageResult run_timeline(const fs::path& ingest_dir,
                                        const ForkMap& fork_map,
                                        const SanitizeBounds& bounds,
                                        const fs::path& out_dir,
                                        const fs::path& tmp_dir,
                                        ThreadPool& pool,
                                        std::uint64_t sort_budget) {
  ensure_dir(out_dir);
  ensure_dir(tmp_dir);

  // -- sanitize commit times, emit c2te (commit -> effective time) --
  std::vector<CommitMeta> commits;
  {
    std::unordered_set<std::string> seen;
    GzipLineSource src(ingest_dir / "c2dat.gz");
    std::string line;
    while (src.next_line(line)) {
      auto fields = split_fields(line);
      if (fields.size() != 3)
        throw Error("corrupt c2dat record: '" + line + "'");
      if (!seen.insert(std::string(fields[0])).second) continue;
      CommitMeta meta;
      meta.commit = std::string(fields[0]);
      meta.raw_time = parse_decimal(fields[1]);
      std::string_view parents = fields[2];
      std::size_t start = 0;
      while (start < parents.size()) {
        std::size_t comma = parents.find(',', start);
        if (comma == std::string_view::npos) comma = parents.size();
        meta.parents.emplace_back(parents.substr(start, comma - start));
        start = comma + 1;
      }
      commits.push_back(std::move(meta));
    }
  }
  SanitizeStats sanitize_stats = sanitize_times(commits, bounds);
  {
    std::vector<std::vector<std::string>> lines(kPartitionCount);
    for (const auto& c : commits) {
      PartitionId i = partition_by_sha1(c.commit);
      lines[static_cast<std::size_t>(i.value)].push_back(
          join_fields({c.commit, pad_time(c.effective_time)}));
    }
    for (int i = 0; i < kPartitionCount; ++i) {
      auto& part = lines[static_cast<std::size_t>(i)];
      std::sort(part.begin(), part.end());
      GzipLineSink sink(out_dir / partition_file_name("c2te", PartitionId(i)));
      for (const auto& l : part) sink.write_line(l);
      sink.close();
    }
  }
  commits.clear();
  commits.shrink_to_fit();

  // -- partition c2P (fork-resolved) and c2fbb by commit --
  auto fan_out = [&](const char* in_name, const char* stem, auto&& transform) {
    detail::PartitionedSinks sinks(tmp_dir, std::string(stem) + ".raw");
    GzipLineSource src(ingest_dir / in_name);
    std::string line;
    while (src.next_line(line)) {
      std::array<std::string_view, 1> f{};
      if (split_prefix_fields(line, f) != 1 || !is_hex40(f[0]))
        throw Error("corrupt record in " + std::string(in_name) + ": '" + line + "'");
      std::string routed = transform(line);
      sinks.write(partition_by_sha1(f[0]), routed);
    }
    sinks.close();
    return sinks;
  };

  auto c2p_spills = fan_out("c2p.gz", "c2P", [&](const std::string& line) {
    auto fields = split_fields(line);
    if (fields.size() != 2)
      throw Error("corrupt c2p record: '" + line + "'");
    return join_fields({fields[0], fork_map.resolve(std::string(fields[1]))});
  });
  auto c2fbb_spills = fan_out("c2fbb.gz", "c2fbb",
                              [](const std::string& line) { return line; });

  pool.parallel_for(kPartitionCount, [&](std::size_t pi) {
    PartitionId i(static_cast<int>(pi));
    SortOptions opt;
    opt.memory_budget = sort_budget;
    opt.temp_dir = tmp_dir;
    opt.unique = true;
    for (auto [spills, stem, key] :
         {std::tuple{&c2p_spills, "c2P", KeySpec{0, 1}},
          std::tuple{&c2fbb_spills, "c2fbb", KeySpec{0, 2}}}) {
      fs::path raw = spills->path_of(i);
      fs::path sorted = out_dir / partition_file_name(stem, i);
      if (fs::exists(raw)) {
        external_sort(raw, sorted, key, opt);
        fs::remove(raw);
      } else {
        detail::write_empty_gz(sorted);
      }
    }
  });

  // -- per commit partition: two joins, then split by blob --
  std::vector<std::uint64_t> c2ptb_rows(kPartitionCount, 0);
  std::vector<std::uint64_t> dropped_no_c2dat(kPartitionCount, 0);
  pool.parallel_for(kPartitionCount, [&](std::size_t pi) {
    PartitionId i(static_cast<int>(pi));
    fs::path c2fbb_path = out_dir / partition_file_name("c2fbb", i);
    fs::path c2te_path = out_dir / partition_file_name("c2te", i);
    fs::path c2p_path = out_dir / partition_file_name("c2P", i);
    fs::path c2tb_path = tmp_dir / partition_file_name("c2tb", i);
    fs::path c2ptb_path = out_dir / partition_file_name("c2Ptb", i);

    // join 1: events with commit times
    {
      GzipLineSink sink(c2tb_path);
      JoinHandlers handlers;
      handlers.left_unmatched = [&](const std::vector<std::string>& group) {
        dropped_no_c2dat[pi] += group.size();
      };
      merge_join(c2fbb_path, KeySpec{0}, c2te_path, KeySpec{0},
                 [&](const std::string& event, const std::string& te) {
                   // commit;project;blob;old + commit;time -> commit;time;blob
                   auto ef = split_fields(event);
                   auto tf = split_fields(te);
                   sink.write_line(join_fields({ef[0], tf[1], ef[2]}));
                 },
                 handlers);
      sink.close();
    }

    // join 2: expand to every deforked project containing the commit
    {
      GzipLineSink sink(c2ptb_path);
      merge_join(c2tb_path, KeySpec{0}, c2p_path, KeySpec{0},
                 [&](const std::string& ctb, const std::string& cp) {
                   auto cf = split_fields(ctb);
                   auto pf = split_fields(cp);
                   sink.write_line(join_fields({cf[0], pf[1], cf[1], cf[2]}));
                   ++c2ptb_rows[pi];
                 });
      sink.close();
    }
    fs::remove(c2tb_path);

    // split by blob into 128 sub-partitions: blob;time;project;commit
    char split_stem[16];
    std::snprintf(split_stem, sizeof split_stem, "btpraw.%03d", i.value);
    detail::PartitionedSinks splits(tmp_dir, split_stem);
    {
      GzipLineSource src(c2ptb_path);
      std::string line;
      while (src.next_line(line)) {
        auto f = split_fields(line);
        splits.write(partition_by_sha1(f[3]),
                     join_fields({f[3], f[2], f[1], f[0]}));
      }
      splits.close();
    }

    // sort each sub-partition by (blob, time, project), keep the first
    // commit per (blob, project), drop the commit column
    SortOptions opt;
    opt.memory_budget = sort_budget;
    opt.temp_dir = tmp_dir;
    for (int j = 0; j < kPartitionCount; ++j) {
      fs::path raw = splits.path_of(PartitionId(j));
      if (!fs::exists(raw)) continue;
      fs::path sorted = raw;
      sorted += ".sorted.gz";
      external_sort(raw, sorted, KeySpec{0, 1, 2}, opt);
      fs::remove(raw);
      fs::path reduced =
          tmp_dir / sub_partition_file_name("btp", i, PartitionId(j));
      detail::KeepFirstPerProject keep;
      GzipLineSource src(sorted);
      GzipLineSink sink(reduced);
      std::string line;
      while (src.next_line(line)) {
        std::array<std::string_view, 3> f{};
        split_prefix_fields(line, f);
        if (keep.admit(f[0], f[2]))
          sink.write_line(join_fields({f[0], f[1], f[2]}));
      }
      sink.close();
      fs::remove(sorted);
    }
  });

  // -- merge the commit-side slices of every blob partition --
  std::vector<std::uint64_t> b2tp_rows(kPartitionCount, 0);
  pool.parallel_for(kPartitionCount, [&](std::size_t pj) {
    PartitionId j(static_cast<int>(pj));
    std::vector<SortedRun> runs;
    for (int i = 0; i < kPartitionCount; ++i) {
      fs::path slice = tmp_dir / sub_partition_file_name("btp", PartitionId(i), j);
      if (fs::exists(slice)) runs.push_back({slice, KeySpec{0, 1, 2}, 0});
    }
    GzipLineSink sink(out_dir / partition_file_name("b2tP", j));
    detail::KeepFirstPerProject keep;
    k_way_merge_visit(runs, KeySpec{0, 1, 2}, false, [&](const std::string& line) {
      std::array<std::string_view, 3> f{};
      split_prefix_fields(line, f);
      if (keep.admit(f[0], f[2])) {
        sink.write_line(line);
        ++b2tp_rows[pj];
      }
    });
    sink.close();
    for (const auto& run : runs) fs::remove(run.path);
  });

  TimelineStageResult result;
  std::uint64_t total_c2ptb = 0, total_b2tp = 0, dropped = 0;
  for (int i = 0; i < kPartitionCount; ++i) {
    total_c2ptb += c2ptb_rows[static_cast<std::size_t>(i)];
    total_b2tp += b2tp_rows[static_cast<std::size_t>(i)];
    dropped += dropped_no_c2dat[static_cast<std::size_t>(i)];
  }
  result.counts = {{"commits", sanitize_stats.commits},
                   {"repaired_times", sanitize_stats.repaired},
                   {"missing_parents", sanitize_stats.missing_parents},
                   {"c2Ptb_rows", total_c2ptb},
                   {"b2tP_rows", total_b2tp},
                   {"events_missing_c2dat", dropped}};
  return result;
}

}  // namespace reuse
