#pragma once

// Fork collapsing. Projects sharing at least one commit form a component;
// each component elects one representative: the member with the most
// commits, ties broken by lexicographically smallest name. The result (p2P)
// suppresses fork propagation downstream.

#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/gzio.hpp"
#include "reuse/manifest.hpp"
#include "reuse/sort.hpp"

namespace reuse {

struct ForkMap {
  std::unordered_map<std::string, std::string> mapping;

  const std::string& resolve(const std::string& project) const {
    auto it = mapping.find(project);
    if (it == mapping.end()) throw Error("unknown project: '" + project + "'");
    return it->second;
  }

  // p2P file: `project;representative` per line, sorted by project.
  void save(const fs::path& path) const {
    std::map<std::string, std::string> sorted(mapping.begin(), mapping.end());
    PlainLineSink sink(path);
    for (const auto& [project, rep] : sorted)
      sink.write_line(join_fields({project, rep}));
    sink.close();
  }

  static ForkMap load(const fs::path& path) {
    ForkMap fm;
    PlainLineSource src(path);
    std::string line;
    while (src.next_line(line)) {
      auto fields = split_fields(line);
      if (fields.size() != 2)
        throw Error("corrupt p2P file: " + path.string());
      fm.mapping.emplace(fields[0], fields[1]);
    }
    for (const auto& [project, rep] : fm.mapping) {
      auto it = fm.mapping.find(rep);
      if (it == fm.mapping.end() || it->second != rep)
        throw Error("p2P file is not idempotent: " + path.string());
    }
    return fm;
  }
};

namespace detail {

class UnionFind {
 public:
  int add() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] =
          parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

// Builds the fork map from a `commit;project` stream sorted by commit with
// unique (commit, project) pairs. Election is independent of record order.
inline ForkMap build_fork_components(const fs::path& sorted_c2p) {
  std::unordered_map<std::string, int> ids;
  std::vector<std::string> names;
  std::vector<std::uint64_t> commit_count;
  detail::UnionFind uf;

  auto intern = [&](std::string_view name) {
    auto it = ids.find(std::string(name));
    if (it != ids.end()) return it->second;
    int id = uf.add();
    ids.emplace(std::string(name), id);
    names.emplace_back(name);
    commit_count.push_back(0);
    return id;
  };

  CheckedRunReader reader(sorted_c2p, KeySpec{0});
  std::string line;
  std::string current_commit;
  int first_in_group = -1;
  while (reader.next(line)) {
    std::array<std::string_view, 2> f{};
    if (split_prefix_fields(line, f) != 2)
      throw Error("corrupt c2p record: '" + line + "'");
    int pid = intern(f[1]);
    ++commit_count[static_cast<std::size_t>(pid)];
    if (f[0] != current_commit) {
      current_commit = f[0];
      first_in_group = pid;
    } else {
      uf.unite(first_in_group, pid);
    }
  }

  // representative per component: most commits, then smallest name
  std::unordered_map<int, int> best;
  for (std::size_t i = 0; i < names.size(); ++i) {
    int root = uf.find(static_cast<int>(i));
    auto it = best.find(root);
    if (it == best.end()) {
      best.emplace(root, static_cast<int>(i));
      continue;
    }
    std::size_t cur = static_cast<std::size_t>(it->second);
    if (commit_count[i] > commit_count[cur] ||
        (commit_count[i] == commit_count[cur] && names[i] < names[cur]))
      it->second = static_cast<int>(i);
  }

  ForkMap fm;
  for (std::size_t i = 0; i < names.size(); ++i) {
    int rep = best.at(uf.find(static_cast<int>(i)));
    fm.mapping.emplace(names[i], names[static_cast<std::size_t>(rep)]);
  }
  return fm;
}

struct DeforkStageResult {
  ForkMap fork_map;
  std::map<std::string, std::uint64_t> counts;
};

inline DeforkStageResult run_defork(const fs::path& ingest_dir,
                                    const CorpusManifest& manifest,
                                    const fs::path& out_dir,
                                    const fs::path& tmp_dir,
                                    std::uint64_t sort_budget) {
  ensure_dir(out_dir);
  ensure_dir(tmp_dir);
  fs::path sorted = tmp_dir / "c2p.sorted.gz";
  SortOptions opt;
  opt.memory_budget = sort_budget;
  opt.temp_dir = tmp_dir;
  opt.unique = true;  // (commit, project) pairs
  external_sort(ingest_dir / "c2p.gz", sorted, KeySpec{0, 1}, opt);

  DeforkStageResult result;
  result.fork_map = build_fork_components(sorted);
  fs::remove(sorted);

  // Projects with no commits (empty repositories) still need a mapping.
  for (const auto& entry : manifest.entries)
    result.fork_map.mapping.emplace(entry.project, entry.project);

  std::uint64_t components = 0, forked = 0;
  for (const auto& [project, rep] : result.fork_map.mapping) {
    if (project == rep)
      ++components;
    else
      ++forked;
  }
  result.fork_map.save(out_dir / "p2P");
  result.counts = {{"projects", result.fork_map.mapping.size()},
                   {"components", components},
                   {"forked_projects", forked}};
  return result;
}

}  // namespace reuse
