#pragma once

// Independent verification oracle. Recomputes copy instances by walking
// every repository directly: full-tree enumeration of every commit,
// in-memory minima per (blob, deforked project), brute-force component
// closure, and a from-the-definition timestamp sanitizer. It shares the git
// object decoding layer and the hash primitives with the pipeline, nothing
// else — no sort/merge/join/sweep code paths.
//
// Deliberately memory-bound: refuses corpora above the commit limit.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/detect.hpp"
#include "reuse/exporter.hpp"
#include "reuse/git_store.hpp"
#include "reuse/manifest.hpp"
#include "reuse/timeline.hpp"

namespace reuse {

struct OracleOptions {
  SanitizeBounds bounds;
  std::size_t commit_limit = 10000;
};

struct OracleResult {
  std::vector<CopyInstance> instances;  // sorted by (P_o, t_o, blob, P_d)
  // (blob, deforked project) -> earliest sanitized time
  std::map<std::pair<std::string, std::string>, std::int64_t> timeline;
  std::map<std::string, std::string> fork_map;
  std::uint64_t total_commits = 0;
};

namespace oracle_detail {

struct CommitNode {
  std::vector<std::string> parents;
  std::string tree;
  std::int64_t raw_time = 0;
};

// Walks refs/heads + refs/tags and collects every reachable commit.
inline void collect_commits(const git::ObjectStore& store,
                            std::map<std::string, CommitNode>& nodes,
                            std::vector<std::string>& project_commits) {
  std::vector<git::ObjectId> pending;
  for (const auto& ref : store.refs()) {
    auto tip = ref.peeled ? ref.peeled : store.peel_to_commit(ref.target);
    if (tip) pending.push_back(*tip);
  }
  std::unordered_set<std::string> local;
  while (!pending.empty()) {
    git::ObjectId id = pending.back();
    pending.pop_back();
    std::string hex = id.hex();
    if (!local.insert(hex).second) continue;
    CommitNode node;
    try {
      auto obj = store.try_read(id);
      if (!obj || obj->type != git::ObjectType::Commit) continue;
      git::CommitInfo info = git::parse_commit(obj->data);
      node.raw_time = info.committer_time;
      node.tree = info.tree.hex();
      for (const auto& p : info.parents) {
        node.parents.push_back(p.hex());
        pending.push_back(p);
      }
    } catch (const Error&) {
      continue;  // unreadable commit: skipped, like the ingest side
    }
    project_commits.push_back(hex);
    nodes.emplace(std::move(hex), std::move(node));
  }
}

// Transitive closure by repeated pairwise merging of project classes.
inline std::map<std::string, std::string> brute_force_defork(
    const std::map<std::string, std::vector<std::string>>& commit_projects,
    const std::map<std::string, std::uint64_t>& commit_counts) {
  std::map<std::string, int> cls;
  int next = 0;
  for (const auto& [project, count] : commit_counts) {
    (void)count;
    cls[project] = next++;
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [commit, projects] : commit_projects) {
      (void)commit;
      for (std::size_t i = 1; i < projects.size(); ++i) {
        int a = cls.at(projects[0]);
        int b = cls.at(projects[i]);
        if (a == b) continue;
        for (auto& [p, c] : cls)
          if (c == b) c = a;
        changed = true;
      }
    }
  }
  // elect: most commits, ties to the smallest name
  std::map<int, std::string> rep;
  for (const auto& [project, c] : cls) {
    auto it = rep.find(c);
    if (it == rep.end()) {
      rep[c] = project;
      continue;
    }
    std::uint64_t best = commit_counts.at(it->second);
    std::uint64_t mine = commit_counts.at(project);
    if (mine > best || (mine == best && project < it->second))
      it->second = project;
  }
  std::map<std::string, std::string> out;
  for (const auto& [project, c] : cls) out[project] = rep.at(c);
  return out;
}

// Effective time straight from the rule:
//   eff(c) = max(raw, max parents' eff)   if raw within bounds
//          = max parents' eff             otherwise (min_time for roots)
// Memoized iterative DFS so deep first-parent chains cannot blow the stack.
class RecursiveSanitizer {
 public:
  RecursiveSanitizer(const std::map<std::string, CommitNode>& nodes,
                     const SanitizeBounds& bounds)
      : nodes_(nodes), bounds_(bounds) {}

  std::int64_t effective(const std::string& commit) {
    struct Frame {
      const std::string* name;
      bool expanded;
    };
    std::vector<Frame> stack{{&commit, false}};
    std::unordered_set<std::string> in_progress;
    while (!stack.empty()) {
      Frame frame = stack.back();
      const std::string& cur = *frame.name;
      if (memo_.count(cur)) {
        stack.pop_back();
        continue;
      }
      auto node_it = nodes_.find(cur);
      if (node_it == nodes_.end()) {
        // parent outside the set: treated as having eff = min_time
        memo_[cur] = bounds_.min_time;
        stack.pop_back();
        continue;
      }
      const CommitNode& node = node_it->second;
      if (!frame.expanded) {
        if (!in_progress.insert(cur).second)
          throw Error("commit graph contains a cycle at " + cur);
        stack.back().expanded = true;
        for (const auto& parent : node.parents)
          if (!memo_.count(parent)) stack.push_back({&parent, false});
        continue;
      }
      std::int64_t parent_eff = bounds_.min_time;
      for (const auto& parent : node.parents)
        parent_eff = std::max(parent_eff, memo_.at(parent));
      bool in_bounds =
          node.raw_time >= bounds_.min_time && node.raw_time <= bounds_.max_time;
      memo_[cur] = in_bounds ? std::max(node.raw_time, parent_eff) : parent_eff;
      in_progress.erase(cur);
      stack.pop_back();
    }
    return memo_.at(commit);
  }

 private:
  const std::map<std::string, CommitNode>& nodes_;
  const SanitizeBounds& bounds_;
  std::unordered_map<std::string, std::int64_t> memo_;
};

// Set of regular-file blobs anywhere under a tree, memoized per tree id.
class TreeFlattener {
 public:
  explicit TreeFlattener(const git::ObjectStore& store) : store_(store) {}

  using BlobSet = std::set<std::string>;

  const BlobSet& blobs_of(const git::ObjectId& tree) {
    std::string key = tree.hex();
    if (auto it = memo_.find(key); it != memo_.end()) return *it->second;
    auto result = std::make_shared<BlobSet>();
    std::optional<git::Object> obj;
    try {
      obj = store_.try_read(tree);
    } catch (const Error&) {
      obj.reset();
    }
    if (obj && obj->type == git::ObjectType::Tree) {
      git::TreeCursor cursor(obj->data);
      git::TreeEntry e;
      while (cursor.next(e)) {
        if (e.is_dir()) {
          const BlobSet& sub = blobs_of(e.id);
          result->insert(sub.begin(), sub.end());
        } else if (e.is_file()) {
          result->insert(e.id.hex());
        }
      }
    }
    auto [it, _] = memo_.emplace(std::move(key), std::move(result));
    return *it->second;
  }

 private:
  const git::ObjectStore& store_;
  std::unordered_map<std::string, std::shared_ptr<BlobSet>> memo_;
};

}  // namespace oracle_detail

inline OracleResult oracle_copy_instances(const CorpusManifest& manifest,
                                          const ExclusionList& exclusions,
                                          const OracleOptions& options) {
  using namespace oracle_detail;

  std::map<std::string, CommitNode> nodes;
  std::map<std::string, std::vector<std::string>> project_commits;
  for (const auto& entry : manifest.entries) {
    git::ObjectStore store(entry.repo_path);
    collect_commits(store, nodes, project_commits[entry.project]);
    if (nodes.size() > options.commit_limit)
      throw Error("oracle refuses: corpus exceeds " +
                  std::to_string(options.commit_limit) + " commits (" +
                  std::to_string(nodes.size()) + " and counting)");
  }

  std::map<std::string, std::vector<std::string>> commit_projects;
  std::map<std::string, std::uint64_t> commit_counts;
  for (const auto& [project, commits] : project_commits) {
    commit_counts[project] = commits.size();
    for (const auto& c : commits) commit_projects[c].push_back(project);
  }

  OracleResult result;
  result.total_commits = nodes.size();
  result.fork_map = brute_force_defork(commit_projects, commit_counts);

  RecursiveSanitizer sanitizer(nodes, options.bounds);

  // earliest time any commit of a deforked project contains each blob
  std::map<std::string, std::map<std::string, std::int64_t>> first_seen;
  for (const auto& entry : manifest.entries) {
    git::ObjectStore store(entry.repo_path);
    TreeFlattener flattener(store);
    const std::string& rep = result.fork_map.at(entry.project);
    for (const auto& commit : project_commits.at(entry.project)) {
      std::int64_t when = sanitizer.effective(commit);
      auto tree = git::ObjectId::parse_hex(nodes.at(commit).tree);
      if (!tree) continue;
      for (const auto& blob : flattener.blobs_of(*tree)) {
        if (exclusions.contains(blob)) continue;
        auto& per_project = first_seen[blob];
        auto [it, inserted] = per_project.emplace(rep, when);
        if (!inserted && when < it->second) it->second = when;
      }
    }
  }

  for (const auto& [blob, projects] : first_seen) {
    for (const auto& [project, when] : projects)
      result.timeline[{blob, project}] = when;
    if (projects.size() < 2) continue;
    // origin: minimal (time, project); std::map iterates by name, so the
    // first minimal time wins ties
    auto origin = projects.begin();
    for (auto it = std::next(projects.begin()); it != projects.end(); ++it)
      if (it->second < origin->second) origin = it;
    for (const auto& [project, when] : projects) {
      if (project == origin->first) continue;
      result.instances.push_back(
          {origin->first, origin->second, blob, project, when});
    }
  }
  std::sort(result.instances.begin(), result.instances.end(),
            [](const CopyInstance& a, const CopyInstance& b) {
              return std::tie(a.project_o, a.time_o, a.blob, a.project_d) <
                     std::tie(b.project_o, b.time_o, b.blob, b.project_d);
            });
  return result;
}

}  // namespace reuse
