#pragma once

// Corpus ingestion: walks each manifest repository once and extracts the
// three raw relations the pipeline consumes.
//
//   c2p    commit;project
//   c2dat  commit;raw_time;parent1,parent2,...   (parent list empty for roots)
//   c2fbb  commit;project;new_blob;old_blob_or_-
//
// A blob-creation event exists for (commit, path) iff the blob at that path
// differs from the blob at the same path in every parent (an absent path
// counts as differing). Merges therefore propagate, they do not create.
// Symlinks and gitlink (submodule) entries are excluded. Paths are used for
// intra-commit bookkeeping and diagnostics only; they never enter pipeline
// records.

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/git_store.hpp"
#include "reuse/gzio.hpp"
#include "reuse/manifest.hpp"
#include "reuse/thread_pool.hpp"

namespace reuse {

struct CommitMeta {
  std::string commit;
  std::vector<std::string> parents;
  std::int64_t raw_time = 0;
  std::int64_t effective_time = 0;  // filled by sanitize_times
  bool repaired = false;
};

struct BlobEvent {
  std::string commit;
  std::string project;
  std::string path;
  std::optional<std::string> old_blob;
  std::string new_blob;
};

struct IngestReport {
  std::string project;
  std::uint64_t commits = 0;
  std::uint64_t blob_events = 0;
  std::uint64_t malformed_commits = 0;   // unreadable/unparsable, skipped
  std::uint64_t incomplete_commits = 0;  // missing tree/blob while diffing
  std::uint64_t skipped_refs = 0;        // refs not resolving to commits
  std::vector<std::string> diagnostics;

  void note(const std::string& what) {
    if (diagnostics.size() < 64) diagnostics.push_back(percent_encode(what));
  }
};

namespace detail {

struct TreeEntryOwned {
  std::uint32_t mode = 0;
  std::string name;
  git::ObjectId id;
  bool is_dir() const { return (mode & 0170000) == 0040000; }
  bool is_file() const { return (mode & 0170000) == 0100000; }
};

// Loads a tree's entries; nullopt when the object is missing or corrupt.
inline std::optional<std::vector<TreeEntryOwned>> load_tree(
    const git::ObjectStore& store, const git::ObjectId& id) {
  std::optional<git::Object> obj;
  try {
    obj = store.try_read(id);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!obj || obj->type != git::ObjectType::Tree) return std::nullopt;
  std::vector<TreeEntryOwned> entries;
  git::TreeCursor cursor(obj->data);
  git::TreeEntry e;
  while (cursor.next(e))
    entries.push_back({e.mode, std::string(e.name), e.id});
  return entries;
}

struct DiffSink {
  std::vector<BlobEvent>* events;
  const std::string* commit;
  const std::string* project;
  IngestReport* report;
  bool incomplete = false;

  void emit(const std::string& path, std::optional<git::ObjectId> old_id,
            const git::ObjectId& new_id) {
    BlobEvent ev;
    ev.commit = *commit;
    ev.project = *project;
    ev.path = path;
    if (old_id) ev.old_blob = old_id->hex();
    ev.new_blob = new_id.hex();
    events->push_back(std::move(ev));
  }

  void missing(const std::string& path) {
    incomplete = true;
    if (report) report->note("missing object under '" + path + "'");
  }
};

// Every regular file under `tree` becomes an added event.
inline void enumerate_all(const git::ObjectStore& store,
                          const git::ObjectId& tree, const std::string& prefix,
                          DiffSink& sink) {
  auto entries = load_tree(store, tree);
  if (!entries) {
    sink.missing(prefix);
    return;
  }
  for (const auto& e : *entries) {
    if (e.is_dir()) {
      enumerate_all(store, e.id, prefix + e.name + "/", sink);
    } else if (e.is_file()) {
      sink.emit(prefix + e.name, std::nullopt, e.id);
    }
    // symlinks and gitlinks are not tracked
  }
}

// Structural diff: emits an event for every path whose regular-file blob in
// `b` differs from the blob at that path in `a`.
inline void diff_trees(const git::ObjectStore& store,
                       std::optional<git::ObjectId> a_tree,
                       const git::ObjectId& b_tree, const std::string& prefix,
                       DiffSink& sink) {
  if (a_tree && *a_tree == b_tree) return;
  auto b_entries = load_tree(store, b_tree);
  if (!b_entries) {
    sink.missing(prefix);
    return;
  }
  std::vector<TreeEntryOwned> a_entries;
  if (a_tree) {
    auto loaded = load_tree(store, *a_tree);
    if (loaded) {
      a_entries = std::move(*loaded);
    } else {
      sink.missing(prefix);
    }
  }

  std::size_t ai = 0;
  for (const auto& be : *b_entries) {
    if (!be.is_dir() && !be.is_file()) continue;
    const TreeEntryOwned* at = nullptr;
    while (ai < a_entries.size()) {
      const auto& ae = a_entries[ai];
      int c = git::tree_name_compare(ae.name, ae.is_dir(), be.name, be.is_dir());
      if (c < 0) {
        ++ai;  // deleted path, not an event
        continue;
      }
      if (c == 0) at = &ae;
      break;
    }
    if (be.is_dir()) {
      if (at && at->is_dir()) {
        if (at->id != be.id)
          diff_trees(store, at->id, be.id, prefix + be.name + "/", sink);
        ++ai;
      } else {
        // brand-new directory (or a non-directory replaced by one)
        enumerate_all(store, be.id, prefix + be.name + "/", sink);
        if (at) ++ai;
      }
    } else {  // regular file
      if (at && at->is_file()) {
        if (at->id != be.id) sink.emit(prefix + be.name, at->id, be.id);
        ++ai;
      } else {
        sink.emit(prefix + be.name, std::nullopt, be.id);
        if (at) ++ai;
      }
    }
  }
}

// Blob at `path` in `tree`, considering regular-file entries only.
inline std::optional<git::ObjectId> blob_at_path(const git::ObjectStore& store,
                                                 git::ObjectId tree,
                                                 std::string_view path) {
  std::size_t start = 0;
  for (;;) {
    std::size_t slash = path.find('/', start);
    std::string_view component = slash == std::string_view::npos
                                     ? path.substr(start)
                                     : path.substr(start, slash - start);
    auto entries = load_tree(store, tree);
    if (!entries) return std::nullopt;
    const TreeEntryOwned* found = nullptr;
    for (const auto& e : *entries)
      if (e.name == component) {
        found = &e;
        break;
      }
    if (!found) return std::nullopt;
    if (slash == std::string_view::npos)
      return found->is_file() ? std::optional(found->id) : std::nullopt;
    if (!found->is_dir()) return std::nullopt;
    tree = found->id;
    start = slash + 1;
  }
}

inline std::optional<git::CommitInfo> read_commit_info(
    const git::ObjectStore& store, const git::ObjectId& id) {
  try {
    auto obj = store.try_read(id);
    if (!obj || obj->type != git::ObjectType::Commit) return std::nullopt;
    return git::parse_commit(obj->data);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

// Every commit reachable from refs/heads and refs/tags, each exactly once,
// in deterministic (ref-name, then parent) discovery order. Unreadable or
// unparsable commits are skipped and counted.
inline std::vector<CommitMeta> enumerate_commits(const git::ObjectStore& store,
                                                 const std::string& project,
                                                 IngestReport& report) {
  report.project = project;
  std::vector<CommitMeta> out;
  std::unordered_set<std::string> visited;
  std::deque<git::ObjectId> pending;

  for (const auto& ref : store.refs()) {
    std::optional<git::ObjectId> tip =
        ref.peeled ? ref.peeled : store.peel_to_commit(ref.target);
    if (!tip) {
      ++report.skipped_refs;
      continue;
    }
    pending.push_back(*tip);
  }

  while (!pending.empty()) {
    git::ObjectId id = pending.front();
    pending.pop_front();
    std::string hex = id.hex();
    if (!visited.insert(hex).second) continue;
    auto info = detail::read_commit_info(store, id);
    if (!info) {
      ++report.malformed_commits;
      report.note("skipped malformed or missing commit " + hex);
      continue;
    }
    CommitMeta meta;
    meta.commit = std::move(hex);
    meta.raw_time = info->committer_time;
    meta.parents.reserve(info->parents.size());
    for (const auto& p : info->parents) {
      meta.parents.push_back(p.hex());
      pending.push_back(p);
    }
    out.push_back(std::move(meta));
    ++report.commits;
  }
  return out;
}

// Blob-creation events of one commit.
inline std::vector<BlobEvent> extract_blob_events(const git::ObjectStore& store,
                                                  const CommitMeta& commit,
                                                  const std::string& project,
                                                  IngestReport& report) {
  std::vector<BlobEvent> events;
  auto id = git::ObjectId::parse_hex(commit.commit);
  if (!id) throw Error("bad commit id: " + commit.commit);
  auto info = detail::read_commit_info(store, *id);
  if (!info) {
    ++report.incomplete_commits;
    report.note("cannot read commit " + commit.commit);
    return events;
  }

  detail::DiffSink sink{&events, &commit.commit, &project, &report, false};

  std::vector<git::ObjectId> parent_trees;
  for (const auto& parent_hex : commit.parents) {
    auto pid = git::ObjectId::parse_hex(parent_hex);
    if (!pid) continue;
    if (auto pinfo = detail::read_commit_info(store, *pid))
      parent_trees.push_back(pinfo->tree);
  }

  if (commit.parents.empty()) {
    detail::enumerate_all(store, info->tree, "", sink);
  } else if (parent_trees.empty()) {
    sink.incomplete = true;
    report.note("all parents unreadable for " + commit.commit);
    detail::enumerate_all(store, info->tree, "", sink);
  } else {
    detail::diff_trees(store, parent_trees.front(), info->tree, "", sink);
    if (parent_trees.size() > 1) {
      // keep only events whose blob is absent at that path in every parent
      std::vector<BlobEvent> filtered;
      filtered.reserve(events.size());
      for (auto& ev : events) {
        bool present_in_other = false;
        for (std::size_t pi = 1; pi < parent_trees.size(); ++pi) {
          auto blob = detail::blob_at_path(store, parent_trees[pi], ev.path);
          if (blob && blob->hex() == ev.new_blob) {
            present_in_other = true;
            break;
          }
        }
        if (!present_in_other) filtered.push_back(std::move(ev));
      }
      events = std::move(filtered);
    }
  }

  if (sink.incomplete) ++report.incomplete_commits;
  report.blob_events += events.size();
  return events;
}

// --- ingest stage driver ---

struct IngestStageResult {
  std::vector<IngestReport> entries;
  std::map<std::string, std::uint64_t> counts;
};

namespace detail {

inline fs::path spill_path(const fs::path& dir, const char* map, std::size_t e) {
  return dir / ("spill." + std::string(map) + "." + std::to_string(e) + ".gz");
}

}  // namespace detail

inline IngestStageResult run_ingest(const CorpusManifest& manifest,
                                    const fs::path& out_dir, ThreadPool& pool) {
  ensure_dir(out_dir);
  const std::size_t n = manifest.entries.size();
  std::vector<IngestReport> reports(n);

  pool.parallel_for(n, [&](std::size_t e) {
    const ManifestEntry& entry = manifest.entries[e];
    std::unique_ptr<git::ObjectStore> store;
    try {
      store = std::make_unique<git::ObjectStore>(entry.repo_path);
    } catch (const Error& err) {
      throw Error("ingest: manifest entry '" + entry.project +
                  "': " + err.what());
    }
    GzipLineSink c2p(detail::spill_path(out_dir, "c2p", e));
    GzipLineSink c2dat(detail::spill_path(out_dir, "c2dat", e));
    GzipLineSink c2fbb(detail::spill_path(out_dir, "c2fbb", e));

    IngestReport& report = reports[e];
    auto commits = enumerate_commits(*store, entry.project, report);
    for (const auto& meta : commits) {
      c2p.write_line(join_fields({meta.commit, entry.project}));
      std::string parents;
      for (std::size_t i = 0; i < meta.parents.size(); ++i) {
        if (i) parents.push_back(',');
        parents.append(meta.parents[i]);
      }
      c2dat.write_line(
          join_fields({meta.commit, std::to_string(meta.raw_time), parents}));
      for (const auto& ev : extract_blob_events(*store, meta, entry.project, report)) {
        c2fbb.write_line(join_fields(
            {ev.commit, ev.project, ev.new_blob,
             ev.old_blob ? std::string_view(*ev.old_blob) : std::string_view("-")}));
      }
    }
    c2p.close();
    c2dat.close();
    c2fbb.close();
  });

  // Worker-private spills concatenate into one logical file per map.
  for (const char* map : {"c2p", "c2dat", "c2fbb"}) {
    std::vector<fs::path> parts;
    parts.reserve(n);
    for (std::size_t e = 0; e < n; ++e)
      parts.push_back(detail::spill_path(out_dir, map, e));
    concatenate_gzip_files(out_dir / (std::string(map) + ".gz"), parts);
    for (const auto& p : parts) fs::remove(p);
  }

  IngestStageResult result;
  result.entries = std::move(reports);
  std::uint64_t commits = 0, events = 0, malformed = 0, incomplete = 0;
  for (const auto& r : result.entries) {
    commits += r.commits;
    events += r.blob_events;
    malformed += r.malformed_commits;
    incomplete += r.incomplete_commits;
  }
  result.counts = {{"entries", n},
                   {"commits", commits},
                   {"blob_events", events},
                   {"malformed_commits", malformed},
                   {"incomplete_commits", incomplete}};
  return result;
}

}  // namespace reuse
