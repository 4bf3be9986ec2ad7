#pragma once

// Corpus manifest: one `project_name<TAB>repo_path` entry per line.
// Project names arrive already flattened (forge path slashes replaced by
// '_'); the loader validates, it never converts.

#include <string>
#include <unordered_set>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/gzio.hpp"

namespace reuse {

struct ManifestEntry {
  std::string project;
  fs::path repo_path;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  static CorpusManifest load(const fs::path& path) {
    PlainLineSource src(path);
    CorpusManifest m;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (src.next_line(line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error(bad_entry(path, lineno, "expected 'project<TAB>path'"));
      std::string name = line.substr(0, tab);
      std::string repo = line.substr(tab + 1);
      validate_project_name(name, path, lineno);
      if (repo.empty())
        throw Error(bad_entry(path, lineno, "empty repository path"));
      if (!seen.insert(name).second)
        throw Error(bad_entry(path, lineno, "duplicate project '" + name + "'"));
      m.entries.push_back({std::move(name), fs::path(std::move(repo))});
    }
    return m;
  }

 private:
  static std::string bad_entry(const fs::path& path, std::size_t lineno,
                               const std::string& why) {
    return "manifest " + path.string() + ":" + std::to_string(lineno) + ": " + why;
  }

  static void validate_project_name(const std::string& name,
                                    const fs::path& path, std::size_t lineno) {
    if (name.empty()) throw Error(bad_entry(path, lineno, "empty project name"));
    for (unsigned char c : name) {
      if (c == kFieldSep || c == '\n' || c == '\r' || c < 0x20)
        throw Error(bad_entry(path, lineno,
                              "project name contains ';' or control characters"));
      if (c == '/')
        throw Error(bad_entry(
            path, lineno,
            "project name '" + name +
                "' contains '/'; flatten forge paths with '_' first"));
    }
  }
};

}  // namespace reuse
