// reuse-tracer: detects whole-file copy-based reuse across a corpus of git
// repositories and exports the origin/destination instance dataset.
//
//   reuse-tracer run      --manifest corpus.tsv --work-dir out [...]
//   reuse-tracer export   --manifest corpus.tsv --work-dir out --tag V
//   reuse-tracer verify   --manifest corpus.tsv --work-dir out
//   reuse-tracer report   --work-dir out
//
// Exit codes: 0 success, 1 usage error, 2 stage failure, 3 verification
// mismatch.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "reuse/pipeline.hpp"

namespace {

struct CliOptions {
  reuse::PipelineConfig cfg;
  std::int64_t max_time = -1;
  std::string exclude_blobs;
  std::size_t oracle_limit = 10000;
};

void add_pipeline_options(CLI::App* cmd, CliOptions& opts, bool with_stages) {
  cmd->add_option("--manifest", opts.cfg.manifest_path,
                  "corpus manifest: project<TAB>repo_path per line")
      ->required();
  cmd->add_option("--work-dir", opts.cfg.work_dir,
                  "directory for intermediate and output files")
      ->required();
  cmd->add_option("--workers", opts.cfg.workers, "worker pool size");
  cmd->add_option("--min-time", opts.cfg.min_time,
                  "lower bound for plausible commit times (unix seconds)");
  cmd->add_option("--max-time", opts.max_time,
                  "upper bound for plausible commit times (defaults to the "
                  "wall clock of the first run)");
  cmd->add_option("--exclude-blobs", opts.exclude_blobs,
                  "file of blob sha1s to exclude (empty blob always is)");
  cmd->add_option("--sort-budget", opts.cfg.sort_budget,
                  "external sort memory budget in bytes");
  cmd->add_option("--tag", opts.cfg.tag, "version tag in release file names");
  cmd->add_flag("--force", opts.cfg.force, "re-run stages even if up to date");
  if (with_stages)
    cmd->add_option("--stages", opts.cfg.stages,
                    "comma-separated subset of ingest,defork,timeline,detect,export")
        ->delimiter(',');
}

reuse::PipelineConfig finish_config(CliOptions& opts) {
  if (opts.max_time >= 0) opts.cfg.max_time = opts.max_time;
  if (!opts.exclude_blobs.empty())
    opts.cfg.exclude_blobs_path = reuse::fs::path(opts.exclude_blobs);
  return opts.cfg;
}

void print_stage_runs(const std::vector<reuse::StageRun>& stages) {
  for (const auto& run : stages) {
    std::string counts;
    for (const auto& [key, value] : run.counts) {
      counts += ' ';
      counts += key;
      counts += '=';
      counts += std::to_string(value);
    }
    std::printf("[%-8s] %-7s %7.2fs%s\n",
                std::string(reuse::stage_name(run.stage)).c_str(),
                run.skipped ? "skipped" : "done", run.seconds, counts.c_str());
  }
}

int cmd_run(CliOptions& opts) {
  auto report = reuse::run_pipeline(finish_config(opts));
  print_stage_runs(report.stages);
  return 0;
}

int cmd_verify(CliOptions& opts) {
  auto result = reuse::verify_corpus(finish_config(opts), opts.oracle_limit);
  std::printf("pipeline instances: %llu\n",
              static_cast<unsigned long long>(result.pipeline_instances));
  std::printf("oracle instances:   %llu (over %llu commits)\n",
              static_cast<unsigned long long>(result.oracle_instances),
              static_cast<unsigned long long>(result.oracle_commits));
  for (const auto& inst : result.missing_instances)
    std::printf("missing from pipeline: %s\n",
                reuse::format_instance_line(inst).c_str());
  for (const auto& inst : result.extra_instances)
    std::printf("not in oracle:         %s\n",
                reuse::format_instance_line(inst).c_str());
  for (const auto& line : result.timeline_mismatches)
    std::printf("timeline: %s\n", line.c_str());
  if (result.passed()) {
    std::printf("verify: PASS\n");
    return 0;
  }
  std::printf("verify: FAIL\n");
  return 3;
}

int cmd_report(const std::string& work_dir) {
  auto stages = reuse::read_pipeline_state(work_dir);
  if (stages.empty()) {
    std::printf("no completed stages under %s\n", work_dir.c_str());
    return 0;
  }
  print_stage_runs(stages);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"whole-file copy-based reuse tracer for git corpora"};
  app.require_subcommand(1);

  CliOptions run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "run pipeline stages");
  add_pipeline_options(run_cmd, run_opts, /*with_stages=*/true);

  CliOptions export_opts;
  CLI::App* export_cmd =
      app.add_subcommand("export", "write release files from detect output");
  add_pipeline_options(export_cmd, export_opts, /*with_stages=*/false);

  CliOptions verify_opts;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "run the pipeline and compare against the brute-force oracle");
  add_pipeline_options(verify_cmd, verify_opts, /*with_stages=*/false);
  verify_cmd->add_option("--oracle-limit", verify_opts.oracle_limit,
                         "maximum corpus size (commits) the oracle accepts");

  std::string report_dir;
  CLI::App* report_cmd =
      app.add_subcommand("report", "print stage stats from a work dir");
  report_cmd->add_option("--work-dir", report_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_opts);
    if (export_cmd->parsed()) {
      export_opts.cfg.stages = {"export"};
      return cmd_run(export_opts);
    }
    if (verify_cmd->parsed()) return cmd_verify(verify_opts);
    if (report_cmd->parsed()) return cmd_report(report_dir);
  } catch (const reuse::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
