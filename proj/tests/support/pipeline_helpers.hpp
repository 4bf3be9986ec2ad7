#pragma once

// Shared helpers for stage- and pipeline-level tests.

#include <string>
#include <tuple>
#include <vector>

#include "reuse/exporter.hpp"
#include "reuse/gzio.hpp"
#include "reuse/partition.hpp"
#include "reuse/pipeline.hpp"

#include "support/fixture_repo.hpp"

namespace testsupport {

constexpr std::int64_t kFixtureMaxTime = 1700000000;  // 2023-11-14

inline reuse::PipelineConfig fixture_config(const CorpusBuilder& corpus,
                                            const reuse::fs::path& manifest,
                                            int workers = 2) {
  reuse::PipelineConfig cfg;
  cfg.manifest_path = manifest;
  cfg.work_dir = corpus.work_dir();
  cfg.workers = workers;
  cfg.min_time = 631152000;
  cfg.max_time = kFixtureMaxTime;
  return cfg;
}

inline std::vector<std::string> read_gz_lines(const reuse::fs::path& path) {
  reuse::GzipLineSource src(path);
  std::vector<std::string> lines;
  std::string line;
  while (src.next_line(line)) lines.push_back(line);
  return lines;
}

// All b2tP rows as (blob, time, project), padding stripped.
inline std::vector<std::tuple<std::string, std::int64_t, std::string>>
read_b2tp(const reuse::fs::path& work_dir) {
  std::vector<std::tuple<std::string, std::int64_t, std::string>> rows;
  for (int j = 0; j < reuse::kPartitionCount; ++j) {
    auto path = reuse::stage_dir(work_dir, reuse::Stage::Timeline) /
                reuse::partition_file_name("b2tP", reuse::PartitionId(j));
    for (const auto& line : read_gz_lines(path)) {
      auto f = reuse::split_fields(line);
      rows.emplace_back(std::string(f[0]), reuse::parse_decimal(f[1]),
                        std::string(f[2]));
    }
  }
  return rows;
}

inline std::vector<reuse::CopyInstance> read_exported(
    const reuse::fs::path& work_dir, const std::string& tag = "local") {
  return reuse::read_release_instances(
      reuse::stage_dir(work_dir, reuse::Stage::Export), tag);
}

}  // namespace testsupport
