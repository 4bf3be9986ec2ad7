#pragma once

// Stage orchestration. Stages run serially in dependency order; each stage
// fans its shards out over a worker pool, writes its outputs into its own
// directory under the work dir, and finishes by writing a completion marker.
// Markers carry a hash of the stage's inputs (config slice + upstream
// marker hashes + manifest bytes), so re-runs skip completed stages and any
// config change invalidates exactly the stages it affects. A stage directory
// without a valid marker is wiped and rebuilt from its inputs.

#include <array>
#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "reuse/common.hpp"
#include "reuse/defork.hpp"
#include "reuse/detect.hpp"
#include "reuse/exporter.hpp"
#include "reuse/ingest.hpp"
#include "reuse/manifest.hpp"
#include "reuse/oracle.hpp"
#include "reuse/sha1.hpp"
#include "reuse/thread_pool.hpp"
#include "reuse/timeline.hpp"

namespace reuse {

enum class Stage { Ingest, Defork, Timeline, Detect, Export };

constexpr std::array<Stage, 5> kAllStages = {Stage::Ingest, Stage::Defork,
                                             Stage::Timeline, Stage::Detect,
                                             Stage::Export};

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Defork: return "defork";
    case Stage::Timeline: return "timeline";
    case Stage::Detect: return "detect";
    case Stage::Export: return "export";
  }
  return "?";
}

inline std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kAllStages)
    if (stage_name(s) == name) return s;
  return std::nullopt;
}

inline std::vector<Stage> stage_dependencies(Stage s) {
  switch (s) {
    case Stage::Ingest: return {};
    case Stage::Defork: return {Stage::Ingest};
    case Stage::Timeline: return {Stage::Ingest, Stage::Defork};
    case Stage::Detect: return {Stage::Timeline};
    case Stage::Export: return {Stage::Detect};
  }
  return {};
}

struct PipelineConfig {
  fs::path manifest_path;
  fs::path work_dir;
  int workers = 1;
  std::int64_t min_time = 631152000;        // 1990-01-01
  std::optional<std::int64_t> max_time;     // default: wall clock, persisted
  std::optional<fs::path> exclude_blobs_path;
  std::vector<std::string> stages;          // empty = all
  bool force = false;
  std::string tag = "local";
  std::uint64_t sort_budget = 64ull << 20;
};

struct StageRun {
  Stage stage;
  bool skipped = false;
  double seconds = 0.0;
  std::map<std::string, std::uint64_t> counts;
};

struct PipelineReport {
  std::vector<StageRun> stages;
  std::int64_t resolved_max_time = 0;
};

inline fs::path stage_dir(const fs::path& work_dir, Stage s) {
  return work_dir / std::string(stage_name(s));
}

namespace detail {

inline fs::path marker_path(const fs::path& work_dir, Stage s) {
  return work_dir / "markers" / (std::string(stage_name(s)) + ".json");
}

struct ResolvedPipeline {
  PipelineConfig cfg;
  std::int64_t max_time = 0;
  CorpusManifest manifest;
  ExclusionList exclusions;
  std::map<Stage, std::string> input_hash;
};

inline ResolvedPipeline resolve_pipeline(const PipelineConfig& cfg) {
  if (cfg.workers < 1) throw UsageError("workers must be >= 1");
  if (cfg.min_time < 0) throw UsageError("min-time must be >= 0");
  if (cfg.manifest_path.empty()) throw UsageError("manifest path is required");
  if (cfg.work_dir.empty()) throw UsageError("work dir is required");
  for (const auto& name : cfg.stages)
    if (!parse_stage(name))
      throw UsageError("unknown stage '" + name +
                       "' (expected ingest,defork,timeline,detect,export)");

  ResolvedPipeline res;
  res.cfg = cfg;
  ensure_dir(cfg.work_dir / "markers");

  // The default upper bound is the wall clock of the first run; it is
  // persisted so later resumptions hash identically.
  fs::path stamp = cfg.work_dir / "markers" / "resolved_max_time";
  if (cfg.max_time) {
    res.max_time = *cfg.max_time;
    write_file(stamp, std::to_string(res.max_time));
  } else if (fs::exists(stamp)) {
    res.max_time = parse_decimal(read_file(stamp));
  } else {
    res.max_time = static_cast<std::int64_t>(std::time(nullptr));
    write_file(stamp, std::to_string(res.max_time));
  }
  if (cfg.min_time >= res.max_time)
    throw UsageError("min-time must be below max-time");
  if (res.max_time > kMaxEncodableTime)
    throw UsageError("max-time exceeds the encodable range");

  std::string manifest_bytes;
  try {
    manifest_bytes = read_file(cfg.manifest_path);
    res.manifest = CorpusManifest::load(cfg.manifest_path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  if (cfg.exclude_blobs_path) {
    try {
      res.exclusions = ExclusionList::load(*cfg.exclude_blobs_path);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }

  auto& h = res.input_hash;
  h[Stage::Ingest] = Sha1::hex_digest("ingest|" + Sha1::hex_digest(manifest_bytes));
  h[Stage::Defork] = Sha1::hex_digest("defork|" + h[Stage::Ingest]);
  h[Stage::Timeline] = Sha1::hex_digest(
      "timeline|" + h[Stage::Defork] + "|" + std::to_string(cfg.min_time) +
      "|" + std::to_string(res.max_time));
  h[Stage::Detect] = Sha1::hex_digest(
      "detect|" + h[Stage::Timeline] + "|" +
      Sha1::hex_digest(res.exclusions.canonical()));
  h[Stage::Export] =
      Sha1::hex_digest("export|" + h[Stage::Detect] + "|" + cfg.tag);
  return res;
}

inline bool marker_valid(const fs::path& marker, const std::string& expected_hash) {
  if (!fs::exists(marker)) return false;
  try {
    auto j = nlohmann::json::parse(read_file(marker));
    return j.value("input_hash", "") == expected_hash;
  } catch (...) {
    return false;
  }
}

inline StageRun read_marker(const fs::path& marker, Stage s) {
  StageRun run;
  run.stage = s;
  run.skipped = true;
  auto j = nlohmann::json::parse(read_file(marker));
  run.seconds = j.value("seconds", 0.0);
  if (j.contains("counts"))
    for (auto& [key, value] : j.at("counts").items())
      run.counts[key] = value.get<std::uint64_t>();
  return run;
}

inline void write_marker(const fs::path& marker, Stage s,
                         const std::string& hash, double seconds,
                         const std::map<std::string, std::uint64_t>& counts) {
  nlohmann::json j;
  j["stage"] = std::string(stage_name(s));
  j["input_hash"] = hash;
  j["seconds"] = seconds;
  j["counts"] = counts;
  write_file(marker, j.dump(2) + "\n");
}

inline void persist_ingest_report(const fs::path& dir,
                                  const IngestStageResult& result) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& r : result.entries) {
    nlohmann::json e;
    e["project"] = r.project;
    e["commits"] = r.commits;
    e["blob_events"] = r.blob_events;
    e["malformed_commits"] = r.malformed_commits;
    e["incomplete_commits"] = r.incomplete_commits;
    e["skipped_refs"] = r.skipped_refs;
    e["diagnostics"] = r.diagnostics;
    entries.push_back(std::move(e));
  }
  nlohmann::json j;
  j["entries"] = std::move(entries);
  write_file(dir / "report.json", j.dump(2) + "\n");
}

inline std::map<std::string, std::uint64_t> run_stage(Stage s,
                                                      const ResolvedPipeline& res,
                                                      ThreadPool& pool,
                                                      const fs::path& dir,
                                                      const fs::path& tmp) {
  const fs::path& work = res.cfg.work_dir;
  switch (s) {
    case Stage::Ingest: {
      auto result = run_ingest(res.manifest, dir, pool);
      persist_ingest_report(dir, result);
      return result.counts;
    }
    case Stage::Defork: {
      auto result = run_defork(stage_dir(work, Stage::Ingest), res.manifest,
                               dir, tmp, res.cfg.sort_budget);
      return result.counts;
    }
    case Stage::Timeline: {
      ForkMap fork_map = ForkMap::load(stage_dir(work, Stage::Defork) / "p2P");
      SanitizeBounds bounds{res.cfg.min_time, res.max_time};
      auto result = run_timeline(stage_dir(work, Stage::Ingest), fork_map,
                                 bounds, dir, tmp, pool, res.cfg.sort_budget);
      return result.counts;
    }
    case Stage::Detect: {
      auto result = run_detect(stage_dir(work, Stage::Timeline), res.exclusions,
                               dir, tmp, pool, res.cfg.sort_budget);
      return result.counts;
    }
    case Stage::Export: {
      auto result = run_export(stage_dir(work, Stage::Detect), dir,
                               res.cfg.tag, pool);
      return result.counts;
    }
  }
  throw Error("unreachable stage");
}

}  // namespace detail

inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
  auto res = detail::resolve_pipeline(cfg);
  ThreadPool pool(cfg.workers);

  std::set<Stage> requested;
  if (cfg.stages.empty()) {
    requested.insert(kAllStages.begin(), kAllStages.end());
  } else {
    for (const auto& name : cfg.stages) requested.insert(*parse_stage(name));
  }

  PipelineReport report;
  report.resolved_max_time = res.max_time;

  for (Stage s : kAllStages) {
    if (!requested.contains(s)) continue;
    fs::path marker = detail::marker_path(cfg.work_dir, s);
    const std::string& hash = res.input_hash.at(s);
    if (!cfg.force && detail::marker_valid(marker, hash)) {
      report.stages.push_back(detail::read_marker(marker, s));
      continue;
    }
    for (Stage dep : stage_dependencies(s)) {
      if (!detail::marker_valid(detail::marker_path(cfg.work_dir, dep),
                                res.input_hash.at(dep)))
        throw Error("stage '" + std::string(stage_name(s)) +
                    "' requires completed stage '" +
                    std::string(stage_name(dep)) +
                    "'; run it first or include it in --stages");
    }

    fs::remove(marker);
    fs::path dir = stage_dir(cfg.work_dir, s);
    fs::path tmp = cfg.work_dir / "tmp" / std::string(stage_name(s));
    fs::remove_all(dir);
    fs::remove_all(tmp);
    ensure_dir(dir);
    ensure_dir(tmp);

    auto t0 = std::chrono::steady_clock::now();
    StageRun run;
    run.stage = s;
    run.counts = detail::run_stage(s, res, pool, dir, tmp);
    run.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0).count();
    fs::remove_all(tmp);
    detail::write_marker(marker, s, hash, run.seconds, run.counts);
    report.stages.push_back(std::move(run));
  }
  return report;
}

// Stage summaries from the markers of a previous run.
inline std::vector<StageRun> read_pipeline_state(const fs::path& work_dir) {
  std::vector<StageRun> out;
  for (Stage s : kAllStages) {
    fs::path marker = detail::marker_path(work_dir, s);
    if (!fs::exists(marker)) continue;
    try {
      out.push_back(detail::read_marker(marker, s));
      out.back().stage = s;
    } catch (...) {
      // unreadable marker: treated as absent
    }
  }
  return out;
}

// --- end-to-end verification against the oracle ---

struct VerifyResult {
  std::vector<CopyInstance> missing_instances;  // oracle only
  std::vector<CopyInstance> extra_instances;    // pipeline only
  std::vector<std::string> timeline_mismatches;
  std::uint64_t pipeline_instances = 0;
  std::uint64_t oracle_instances = 0;
  std::uint64_t oracle_commits = 0;

  bool passed() const {
    return missing_instances.empty() && extra_instances.empty() &&
           timeline_mismatches.empty();
  }
};

inline VerifyResult verify_corpus(const PipelineConfig& config,
                                  std::size_t commit_limit = 10000) {
  PipelineConfig cfg = config;
  cfg.stages.clear();  // verification always covers the whole pipeline
  PipelineReport report = run_pipeline(cfg);
  auto res = detail::resolve_pipeline(cfg);

  VerifyResult out;
  OracleOptions opt;
  opt.bounds = SanitizeBounds{cfg.min_time, report.resolved_max_time};
  opt.commit_limit = commit_limit;
  OracleResult oracle = oracle_copy_instances(res.manifest, res.exclusions, opt);
  out.oracle_commits = oracle.total_commits;
  out.oracle_instances = oracle.instances.size();

  std::vector<CopyInstance> exported =
      read_release_instances(stage_dir(cfg.work_dir, Stage::Export), cfg.tag);
  out.pipeline_instances = exported.size();
  std::sort(exported.begin(), exported.end());
  std::vector<CopyInstance> expected = oracle.instances;
  std::sort(expected.begin(), expected.end());
  std::set_difference(expected.begin(), expected.end(), exported.begin(),
                      exported.end(), std::back_inserter(out.missing_instances));
  std::set_difference(exported.begin(), exported.end(), expected.begin(),
                      expected.end(), std::back_inserter(out.extra_instances));

  // b2tP vs the oracle's (blob, project) minima
  std::map<std::pair<std::string, std::string>, std::int64_t> pipeline_timeline;
  for (int j = 0; j < kPartitionCount; ++j) {
    GzipLineSource src(stage_dir(cfg.work_dir, Stage::Timeline) /
                       partition_file_name("b2tP", PartitionId(j)));
    std::string line;
    while (src.next_line(line)) {
      std::array<std::string_view, 3> f{};
      if (split_prefix_fields(line, f) != 3)
        throw Error("corrupt b2tP record: '" + line + "'");
      auto key = std::make_pair(std::string(f[0]), std::string(f[2]));
      if (!pipeline_timeline.emplace(key, parse_decimal(f[1])).second)
        out.timeline_mismatches.push_back("duplicate (blob, project): " +
                                          key.first + ", " + key.second);
    }
  }
  // the oracle keeps excluded blobs out of its timeline; mirror that here
  for (auto it = pipeline_timeline.begin(); it != pipeline_timeline.end();) {
    if (res.exclusions.contains(it->first.first))
      it = pipeline_timeline.erase(it);
    else
      ++it;
  }
  for (const auto& [key, when] : oracle.timeline) {
    auto it = pipeline_timeline.find(key);
    if (it == pipeline_timeline.end())
      out.timeline_mismatches.push_back("missing timeline entry: " + key.first +
                                        " in " + key.second);
    else if (it->second != when)
      out.timeline_mismatches.push_back(
          "timeline time differs for " + key.first + " in " + key.second +
          ": pipeline " + std::to_string(it->second) + ", oracle " +
          std::to_string(when));
  }
  for (const auto& [key, when] : pipeline_timeline) {
    (void)when;
    if (!oracle.timeline.count(key))
      out.timeline_mismatches.push_back("unexpected timeline entry: " +
                                        key.first + " in " + key.second);
  }
  return out;
}

}  // namespace reuse
