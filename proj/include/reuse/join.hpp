#pragma once

// Sort-merge inner join of two sorted record streams. Emits the cross
// product of equal-key groups in key order; within a group, pairs are
// emitted left-record-major. Keys present on only one side are dropped,
// with optional hooks so callers can count or abort on them.

#include <functional>
#include <string>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/sort.hpp"

namespace reuse {

struct JoinStats {
  std::uint64_t pairs = 0;
  std::uint64_t matched_keys = 0;
  std::uint64_t left_unmatched_groups = 0;
  std::uint64_t right_unmatched_groups = 0;
};

struct JoinHandlers {
  // Called with the full group of records whose key had no partner.
  std::function<void(const std::vector<std::string>&)> left_unmatched;
  std::function<void(const std::vector<std::string>&)> right_unmatched;
};

using JoinEmit = std::function<void(const std::string& left, const std::string& right)>;

namespace detail {

class GroupReader {
 public:
  GroupReader(const fs::path& path, const KeySpec& key)
      : key_(key), reader_(path, key) {
    has_ = reader_.next(line_);
  }

  bool has() const { return has_; }
  const std::string& head() const { return line_; }

  // Collects all records whose key equals the current head.
  void take_group(std::vector<std::string>& out) {
    out.clear();
    out.push_back(line_);
    for (;;) {
      std::string next;
      if (!reader_.next(next)) {
        has_ = false;
        return;
      }
      if (key_compare(next, out.front(), key_) != 0) {
        line_ = std::move(next);
        return;
      }
      out.push_back(std::move(next));
    }
  }

 private:
  KeySpec key_;
  CheckedRunReader reader_;
  std::string line_;
  bool has_ = false;
};

}  // namespace detail

inline JoinStats merge_join(const fs::path& left_path, const KeySpec& left_key,
                            const fs::path& right_path, const KeySpec& right_key,
                            const JoinEmit& emit,
                            const JoinHandlers& handlers = {}) {
  if (left_key.size() != right_key.size())
    throw Error("merge_join: key specs differ in length");
  detail::GroupReader left(left_path, left_key);
  detail::GroupReader right(right_path, right_key);
  std::vector<std::string> lgroup, rgroup;
  JoinStats stats;

  auto drop_left = [&]() {
    left.take_group(lgroup);
    ++stats.left_unmatched_groups;
    if (handlers.left_unmatched) handlers.left_unmatched(lgroup);
  };
  auto drop_right = [&]() {
    right.take_group(rgroup);
    ++stats.right_unmatched_groups;
    if (handlers.right_unmatched) handlers.right_unmatched(rgroup);
  };

  while (left.has() && right.has()) {
    int c = key_compare(left.head(), left_key, right.head(), right_key);
    if (c < 0) {
      drop_left();
    } else if (c > 0) {
      drop_right();
    } else {
      left.take_group(lgroup);
      right.take_group(rgroup);
      ++stats.matched_keys;
      for (const auto& l : lgroup)
        for (const auto& r : rgroup) {
          emit(l, r);
          ++stats.pairs;
        }
    }
  }
  while (left.has()) drop_left();
  while (right.has()) drop_right();
  return stats;
}

// Test/debug-friendly record combiner: joined record = key fields (from the
// left), then left non-key fields, then right non-key fields.
inline std::string join_record(const std::string& left, const KeySpec& left_key,
                               const std::string& right, const KeySpec& right_key) {
  auto lf = split_fields(left);
  auto rf = split_fields(right);
  auto in_key = [](const KeySpec& key, std::size_t idx) {
    for (int f : key)
      if (static_cast<std::size_t>(f) == idx) return true;
    return false;
  };
  std::vector<std::string_view> out;
  for (int f : left_key) out.push_back(lf[static_cast<std::size_t>(f)]);
  for (std::size_t i = 0; i < lf.size(); ++i)
    if (!in_key(left_key, i)) out.push_back(lf[i]);
  for (std::size_t i = 0; i < rf.size(); ++i)
    if (!in_key(right_key, i)) out.push_back(rf[i]);
  std::string line;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) line.push_back(kFieldSep);
    line.append(out[i]);
  }
  return line;
}

}  // namespace reuse
