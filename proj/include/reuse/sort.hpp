#pragma once

// External-memory sort engine. Records are ';'-separated lines; keys are
// ordered lists of field indices compared byte-wise. Oversized inputs spill
// to sorted temporary runs which are then k-way merged. Everything here is
// deterministic: equal keys keep input order (spills are merged by run
// index, i.e. creation order).

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/gzio.hpp"

namespace reuse {

using KeySpec = std::vector<int>;

constexpr int kMaxKeyField = 15;

namespace detail {

inline std::size_t extract_fields(std::string_view line, int max_field,
                                  std::array<std::string_view, kMaxKeyField + 1>& out) {
  return split_prefix_fields(line,
                             std::span(out.data(), static_cast<std::size_t>(max_field) + 1));
}

inline int max_field(const KeySpec& key) {
  int m = 0;
  for (int f : key) {
    if (f < 0 || f > kMaxKeyField) throw Error("key field index out of range");
    m = std::max(m, f);
  }
  return m;
}

}  // namespace detail

// Three-way byte-wise comparison of two records under (possibly distinct)
// key specs of equal length.
inline int key_compare(std::string_view a, const KeySpec& a_key,
                       std::string_view b, const KeySpec& b_key) {
  std::array<std::string_view, kMaxKeyField + 1> fa{}, fb{};
  detail::extract_fields(a, detail::max_field(a_key), fa);
  detail::extract_fields(b, detail::max_field(b_key), fb);
  for (std::size_t i = 0; i < a_key.size(); ++i) {
    int c = fa[static_cast<std::size_t>(a_key[i])].compare(
        fb[static_cast<std::size_t>(b_key[i])]);
    if (c != 0) return c < 0 ? -1 : 1;
  }
  return 0;
}

inline int key_compare(std::string_view a, std::string_view b, const KeySpec& key) {
  return key_compare(a, key, b, key);
}

struct SortedRun {
  fs::path path;
  KeySpec key;
  std::uint64_t record_count = 0;
};

struct SortOptions {
  std::uint64_t memory_budget = 64ull << 20;
  fs::path temp_dir;   // used for spill runs; defaults to the output's parent
  bool unique = false; // keep the first record per key, like sort -u
};

struct SortStats {
  std::uint64_t records_in = 0;
  std::uint64_t records_out = 0;
  int spill_runs = 0;
};

// Reads a sorted run and verifies the claimed order as it goes.
class CheckedRunReader {
 public:
  CheckedRunReader(const fs::path& path, KeySpec key)
      : path_(path.string()), key_(std::move(key)), src_(open_line_source(path)) {}

  bool next(std::string& out) {
    if (!src_->next_line(out)) return false;
    ++position_;
    if (position_ > 1 && key_compare(out, prev_, key_) < 0)
      throw Error("unsorted input: key regression at record " +
                  std::to_string(position_) + " of " + path_);
    prev_ = out;
    return true;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  KeySpec key_;
  std::unique_ptr<LineSource> src_;
  std::string prev_;
  std::uint64_t position_ = 0;
};

// Globally sorted stream over sorted runs; ties resolve by run index, then
// intra-run order. `emit` receives each record exactly once.
template <typename Emit>
std::uint64_t k_way_merge_visit(const std::vector<SortedRun>& runs,
                                const KeySpec& key, bool unique, Emit&& emit) {
  struct Cursor {
    std::unique_ptr<CheckedRunReader> reader;
    std::string line;
  };
  std::vector<Cursor> cursors;
  cursors.reserve(runs.size());
  for (const auto& run : runs) {
    Cursor c{std::make_unique<CheckedRunReader>(run.path, key), {}};
    if (c.reader->next(c.line)) cursors.push_back(std::move(c));
  }

  auto greater = [&](std::size_t a, std::size_t b) {
    int c = key_compare(cursors[a].line, cursors[b].line, key);
    if (c != 0) return c > 0;
    return a > b;
  };
  std::vector<std::size_t> heap(cursors.size());
  for (std::size_t i = 0; i < heap.size(); ++i) heap[i] = i;
  std::make_heap(heap.begin(), heap.end(), greater);

  std::uint64_t emitted = 0;
  std::string last_emitted;
  bool have_last = false;
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), greater);
    std::size_t idx = heap.back();
    heap.pop_back();
    Cursor& cur = cursors[idx];
    bool keep = true;
    if (unique && have_last && key_compare(cur.line, last_emitted, key) == 0)
      keep = false;
    if (keep) {
      if (unique) {
        last_emitted = cur.line;
        have_last = true;
      }
      emit(cur.line);
      ++emitted;
    }
    if (cur.reader->next(cur.line)) {
      heap.push_back(idx);
      std::push_heap(heap.begin(), heap.end(), greater);
    }
  }
  return emitted;
}

inline std::uint64_t k_way_merge(const std::vector<SortedRun>& runs,
                                 const KeySpec& key, LineSink& out,
                                 bool unique = false) {
  return k_way_merge_visit(runs, key, unique,
                           [&](const std::string& line) { out.write_line(line); });
}

namespace detail {

inline void sort_chunk(std::vector<std::string>& chunk, const KeySpec& key) {
  std::stable_sort(chunk.begin(), chunk.end(),
                   [&](const std::string& a, const std::string& b) {
                     return key_compare(a, b, key) < 0;
                   });
}

// Drops all but the first record of each equal-key group; `chunk` is sorted.
inline void unique_chunk(std::vector<std::string>& chunk, const KeySpec& key) {
  auto last = std::unique(chunk.begin(), chunk.end(),
                          [&](const std::string& kept, const std::string& next) {
                            return key_compare(kept, next, key) == 0;
                          });
  chunk.erase(last, chunk.end());
}

}  // namespace detail

inline SortedRun external_sort(const fs::path& input, const fs::path& output,
                               const KeySpec& key, const SortOptions& opt,
                               SortStats* stats = nullptr) {
  fs::path temp_dir = opt.temp_dir.empty() ? output.parent_path() : opt.temp_dir;
  auto src = open_line_source(input);

  std::vector<std::string> chunk;
  std::uint64_t chunk_bytes = 0;
  std::vector<SortedRun> spills;
  SortStats local;

  auto spill_path = [&](int n) {
    return temp_dir / (output.filename().string() + ".run" + std::to_string(n));
  };
  auto flush_chunk = [&]() {
    detail::sort_chunk(chunk, key);
    if (opt.unique) detail::unique_chunk(chunk, key);
    SortedRun run{spill_path(static_cast<int>(spills.size())), key, 0};
    run.path += ".gz";
    GzipLineSink sink(run.path);
    for (const auto& line : chunk) sink.write_line(line);
    sink.close();
    run.record_count = chunk.size();
    spills.push_back(std::move(run));
    chunk.clear();
    chunk_bytes = 0;
  };

  std::string line;
  while (src->next_line(line)) {
    ++local.records_in;
    chunk_bytes += line.size() + sizeof(std::string);
    chunk.push_back(std::move(line));
    if (chunk_bytes >= opt.memory_budget && chunk.size() > 1) flush_chunk();
  }

  SortedRun result{output, key, 0};
  if (spills.empty()) {
    detail::sort_chunk(chunk, key);
    if (opt.unique) detail::unique_chunk(chunk, key);
    auto sink = open_line_sink(output);
    for (const auto& l : chunk) sink->write_line(l);
    sink->close();
    result.record_count = chunk.size();
  } else {
    if (!chunk.empty()) flush_chunk();
    local.spill_runs = static_cast<int>(spills.size());
    auto sink = open_line_sink(output);
    result.record_count = k_way_merge(spills, key, *sink, opt.unique);
    sink->close();
    for (const auto& run : spills) fs::remove(run.path);
  }
  local.records_out = result.record_count;
  if (stats) *stats = local;
  return result;
}

}  // namespace reuse
