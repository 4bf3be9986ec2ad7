#pragma once

// Read-only access to a git object database: loose objects, version-2 pack
// indexes, packed objects including ofs/ref delta chains, and the heads/tags
// ref namespace (loose and packed-refs). One ObjectStore instance is not
// thread-safe; use one per worker.

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reuse/common.hpp"
#include "reuse/gzio.hpp"

namespace reuse::git {

struct ObjectId {
  std::array<std::uint8_t, 20> bytes{};

  static std::optional<ObjectId> parse_hex(std::string_view hex) {
    if (hex.size() != 40) return std::nullopt;
    ObjectId id;
    for (int i = 0; i < 20; ++i) {
      int hi = hex_nibble(hex[i * 2]);
      int lo = hex_nibble(hex[i * 2 + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      id.bytes[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return id;
  }

  static ObjectId from_raw(const std::uint8_t* p) {
    ObjectId id;
    std::memcpy(id.bytes.data(), p, 20);
    return id;
  }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(40, '0');
    for (int i = 0; i < 20; ++i) {
      out[static_cast<std::size_t>(i * 2)] = digits[bytes[static_cast<std::size_t>(i)] >> 4];
      out[static_cast<std::size_t>(i * 2 + 1)] = digits[bytes[static_cast<std::size_t>(i)] & 0xf];
    }
    return out;
  }

  auto operator<=>(const ObjectId&) const = default;
};

struct ObjectIdHash {
  std::size_t operator()(const ObjectId& id) const {
    std::size_t h;
    std::memcpy(&h, id.bytes.data(), sizeof h);
    return h;
  }
};

enum class ObjectType { Commit, Tree, Blob, Tag };

inline std::string_view to_string(ObjectType t) {
  switch (t) {
    case ObjectType::Commit: return "commit";
    case ObjectType::Tree: return "tree";
    case ObjectType::Blob: return "blob";
    case ObjectType::Tag: return "tag";
  }
  return "?";
}

struct Object {
  ObjectType type;
  std::string data;
};

class MappedFile {
 public:
  MappedFile() = default;

  explicit MappedFile(const fs::path& path) {
    int fd = ::open(path.string().c_str(), O_RDONLY);
    if (fd < 0) throw Error("cannot open " + path.string());
    struct stat st{};
    if (::fstat(fd, &st) != 0) {
      ::close(fd);
      throw Error("cannot stat " + path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
      if (p == MAP_FAILED) {
        ::close(fd);
        throw Error("cannot map " + path.string());
      }
      addr_ = p;
    }
    ::close(fd);
  }

  MappedFile(MappedFile&& other) noexcept { swap(other); }
  MappedFile& operator=(MappedFile&& other) noexcept {
    if (this != &other) {
      release();
      swap(other);
    }
    return *this;
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile() { release(); }

  std::span<const std::uint8_t> bytes() const {
    return {static_cast<const std::uint8_t*>(addr_), size_};
  }

 private:
  void release() {
    if (addr_) ::munmap(addr_, size_);
    addr_ = nullptr;
    size_ = 0;
  }
  void swap(MappedFile& other) {
    std::swap(addr_, other.addr_);
    std::swap(size_, other.size_);
  }

  void* addr_ = nullptr;
  std::size_t size_ = 0;
};

struct TreeEntry {
  std::uint32_t mode = 0;
  std::string_view name;
  ObjectId id;

  bool is_dir() const { return (mode & 0170000) == 0040000; }
  bool is_symlink() const { return (mode & 0170000) == 0120000; }
  bool is_gitlink() const { return (mode & 0170000) == 0160000; }
  bool is_file() const { return (mode & 0170000) == 0100000; }
};

class TreeCursor {
 public:
  explicit TreeCursor(std::string_view tree_data) : data_(tree_data) {}

  bool next(TreeEntry& out) {
    if (pos_ >= data_.size()) return false;
    std::size_t sp = data_.find(' ', pos_);
    if (sp == std::string_view::npos) throw Error("corrupt tree entry");
    std::uint32_t mode = 0;
    for (std::size_t i = pos_; i < sp; ++i) {
      char c = data_[i];
      if (c < '0' || c > '7') throw Error("corrupt tree mode");
      mode = mode * 8 + static_cast<std::uint32_t>(c - '0');
    }
    std::size_t nul = data_.find('\0', sp + 1);
    if (nul == std::string_view::npos || nul + 21 > data_.size())
      throw Error("corrupt tree entry");
    out.mode = mode;
    out.name = data_.substr(sp + 1, nul - sp - 1);
    out.id = ObjectId::from_raw(
        reinterpret_cast<const std::uint8_t*>(data_.data()) + nul + 1);
    pos_ = nul + 21;
    return true;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

// Git sorts tree entries as if directory names carried a trailing '/'.
inline int tree_name_compare(std::string_view a, bool a_dir, std::string_view b,
                             bool b_dir) {
  std::size_t n = std::min(a.size(), b.size());
  int c = std::memcmp(a.data(), b.data(), n);
  if (c != 0) return c < 0 ? -1 : 1;
  unsigned char ca = a.size() > n ? static_cast<unsigned char>(a[n])
                                  : (a_dir ? static_cast<unsigned char>('/') : 0);
  unsigned char cb = b.size() > n ? static_cast<unsigned char>(b[n])
                                  : (b_dir ? static_cast<unsigned char>('/') : 0);
  if (ca != cb) return ca < cb ? -1 : 1;
  return 0;
}

struct CommitInfo {
  ObjectId tree;
  std::vector<ObjectId> parents;
  std::int64_t committer_time = 0;
};

namespace detail {

inline std::int64_t parse_ident_time(std::string_view ident) {
  // "Name <email> 1234567890 +0000"
  std::size_t tz = ident.rfind(' ');
  if (tz == std::string_view::npos || tz == 0)
    throw Error("malformed ident line");
  std::size_t ts = ident.rfind(' ', tz - 1);
  if (ts == std::string_view::npos) throw Error("malformed ident line");
  return parse_decimal(ident.substr(ts + 1, tz - ts - 1));
}

}  // namespace detail

inline CommitInfo parse_commit(std::string_view data) {
  CommitInfo info;
  bool have_tree = false, have_committer = false;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string_view::npos) eol = data.size();
    std::string_view line = data.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) break;          // header/body separator
    if (line[0] == ' ') continue;     // continuation (gpgsig etc.)
    std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos) throw Error("malformed commit header");
    std::string_view key = line.substr(0, sp);
    std::string_view value = line.substr(sp + 1);
    if (key == "tree") {
      auto id = ObjectId::parse_hex(value);
      if (!id) throw Error("malformed commit: bad tree id");
      info.tree = *id;
      have_tree = true;
    } else if (key == "parent") {
      auto id = ObjectId::parse_hex(value);
      if (!id) throw Error("malformed commit: bad parent id");
      info.parents.push_back(*id);
    } else if (key == "committer") {
      info.committer_time = detail::parse_ident_time(value);
      have_committer = true;
    }
  }
  if (!have_tree || !have_committer) throw Error("malformed commit object");
  return info;
}

// Target of an annotated tag.
inline ObjectId parse_tag_target(std::string_view data) {
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string_view::npos) eol = data.size();
    std::string_view line = data.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) break;
    if (line.starts_with("object ")) {
      auto id = ObjectId::parse_hex(line.substr(7));
      if (!id) throw Error("malformed tag: bad object id");
      return *id;
    }
  }
  throw Error("malformed tag object");
}

struct Ref {
  std::string name;
  ObjectId target;
  std::optional<ObjectId> peeled;  // precomputed tag target, when known
};

class ObjectStore {
 public:
  explicit ObjectStore(const fs::path& repo_path) {
    if (fs::is_directory(repo_path / "objects")) {
      git_dir_ = repo_path;
    } else if (fs::is_directory(repo_path / ".git" / "objects")) {
      git_dir_ = repo_path / ".git";
    } else {
      throw Error("not a git object store: " + repo_path.string());
    }
    load_pack_indexes();
  }

  const fs::path& git_dir() const { return git_dir_; }

  std::optional<Object> try_read(const ObjectId& id) const {
    return read_any(id, 0);
  }

  Object read(const ObjectId& id) const {
    auto obj = try_read(id);
    if (!obj) throw Error("object not found: " + id.hex());
    return std::move(*obj);
  }

  // All refs under refs/heads and refs/tags, sorted by name. Loose refs
  // shadow packed ones.
  std::vector<Ref> refs() const {
    std::map<std::string, std::string> raw;
    std::map<std::string, ObjectId> peeled;
    read_packed_refs(raw, peeled);
    read_loose_refs("refs/heads", raw, peeled);
    read_loose_refs("refs/tags", raw, peeled);

    std::vector<Ref> out;
    for (const auto& [name, value] : raw) {
      if (!name.starts_with("refs/heads/") && !name.starts_with("refs/tags/"))
        continue;
      auto target = resolve_ref_value(value, raw, 0);
      if (!target) continue;
      Ref ref{name, *target, std::nullopt};
      auto it = peeled.find(name);
      if (it != peeled.end()) ref.peeled = it->second;
      out.push_back(std::move(ref));
    }
    return out;
  }

  // Follows tag objects until a commit; nullopt for tags of trees/blobs or
  // unreadable targets.
  std::optional<ObjectId> peel_to_commit(ObjectId id) const {
    for (int hop = 0; hop < 16; ++hop) {
      auto obj = try_read(id);
      if (!obj) return std::nullopt;
      if (obj->type == ObjectType::Commit) return id;
      if (obj->type != ObjectType::Tag) return std::nullopt;
      id = parse_tag_target(obj->data);
    }
    return std::nullopt;
  }

 private:
  struct PackFile {
    fs::path pack_path;
    MappedFile pack;
    std::uint32_t count = 0;
    std::string names;                  // count * 20 bytes, sorted
    std::array<std::uint32_t, 256> fanout{};
    std::vector<std::uint64_t> offsets;  // resolved, incl. large offsets

    std::optional<std::uint32_t> find(const ObjectId& id) const {
      std::uint32_t lo = id.bytes[0] ? fanout[id.bytes[0] - 1] : 0;
      std::uint32_t hi = fanout[id.bytes[0]];
      while (lo < hi) {
        std::uint32_t mid = lo + (hi - lo) / 2;
        int c = std::memcmp(names.data() + std::size_t(mid) * 20,
                            id.bytes.data(), 20);
        if (c == 0) return mid;
        if (c < 0)
          lo = mid + 1;
        else
          hi = mid;
      }
      return std::nullopt;
    }
  };

  static std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  }
  static std::uint64_t be64(const std::uint8_t* p) {
    return (std::uint64_t(be32(p)) << 32) | be32(p + 4);
  }

  void load_pack_indexes() {
    fs::path pack_dir = git_dir_ / "objects" / "pack";
    if (!fs::is_directory(pack_dir)) return;
    std::vector<fs::path> idx_files;
    for (const auto& entry : fs::directory_iterator(pack_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".idx")
        idx_files.push_back(entry.path());
    std::sort(idx_files.begin(), idx_files.end());
    for (const auto& idx_path : idx_files) {
      fs::path pack_path = idx_path;
      pack_path.replace_extension(".pack");
      if (!fs::exists(pack_path)) continue;
      packs_.push_back(load_index(idx_path, pack_path));
    }
  }

  PackFile load_index(const fs::path& idx_path, const fs::path& pack_path) {
    std::string idx = read_file(idx_path);
    const auto* p = reinterpret_cast<const std::uint8_t*>(idx.data());
    if (idx.size() < 8 + 256 * 4 + 40 || p[0] != 0xff || p[1] != 't' ||
        p[2] != 'O' || p[3] != 'c')
      throw Error("unsupported pack index format: " + idx_path.string());
    if (be32(p + 4) != 2)
      throw Error("unsupported pack index version: " + idx_path.string());

    PackFile pf;
    pf.pack_path = pack_path;
    for (int i = 0; i < 256; ++i) pf.fanout[static_cast<std::size_t>(i)] = be32(p + 8 + i * 4);
    pf.count = pf.fanout[255];
    std::size_t names_off = 8 + 256 * 4;
    std::size_t crc_off = names_off + std::size_t(pf.count) * 20;
    std::size_t small_off = crc_off + std::size_t(pf.count) * 4;
    std::size_t large_off = small_off + std::size_t(pf.count) * 4;
    if (idx.size() < large_off + 40)
      throw Error("truncated pack index: " + idx_path.string());
    pf.names.assign(idx, names_off, std::size_t(pf.count) * 20);
    std::size_t large_count = (idx.size() - large_off - 40) / 8;
    pf.offsets.resize(pf.count);
    for (std::uint32_t i = 0; i < pf.count; ++i) {
      std::uint32_t v = be32(p + small_off + std::size_t(i) * 4);
      if (v & 0x80000000u) {
        std::uint32_t li = v & 0x7fffffffu;
        if (li >= large_count)
          throw Error("corrupt pack index (large offset): " + idx_path.string());
        pf.offsets[i] = be64(p + large_off + std::size_t(li) * 8);
      } else {
        pf.offsets[i] = v;
      }
    }
    pf.pack = MappedFile(pack_path);
    auto bytes = pf.pack.bytes();
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "PACK", 4) != 0)
      throw Error("corrupt packfile: " + pack_path.string());
    return pf;
  }

  std::optional<Object> read_any(const ObjectId& id, int depth) const {
    if (depth > 64) throw Error("delta chain too deep");
    if (auto obj = read_loose(id)) return obj;
    for (std::size_t pi = 0; pi < packs_.size(); ++pi) {
      if (auto entry = packs_[pi].find(id))
        return read_packed(pi, packs_[pi].offsets[*entry], depth);
    }
    return std::nullopt;
  }

  std::optional<Object> read_loose(const ObjectId& id) const {
    std::string hex = id.hex();
    fs::path path = git_dir_ / "objects" / hex.substr(0, 2) / hex.substr(2);
    std::error_code ec;
    if (!fs::exists(path, ec) || ec) return std::nullopt;
    MappedFile file(path);
    std::string raw = zlib_inflate_all(file.bytes());
    std::size_t nul = raw.find('\0');
    if (nul == std::string::npos) throw Error("corrupt loose object " + hex);
    std::string_view header(raw.data(), nul);
    std::size_t sp = header.find(' ');
    if (sp == std::string_view::npos) throw Error("corrupt loose object " + hex);
    ObjectType type = parse_type(header.substr(0, sp), hex);
    std::uint64_t size = static_cast<std::uint64_t>(parse_decimal(header.substr(sp + 1)));
    if (size != raw.size() - nul - 1)
      throw Error("loose object size mismatch: " + hex);
    return Object{type, raw.substr(nul + 1)};
  }

  static ObjectType parse_type(std::string_view name, const std::string& ctx) {
    if (name == "commit") return ObjectType::Commit;
    if (name == "tree") return ObjectType::Tree;
    if (name == "blob") return ObjectType::Blob;
    if (name == "tag") return ObjectType::Tag;
    throw Error("unknown object type '" + std::string(name) + "' in " + ctx);
  }

  Object read_packed(std::size_t pack_index, std::uint64_t offset,
                     int depth) const {
    std::uint64_t cache_key = (std::uint64_t(pack_index) << 48) | offset;
    if (auto it = cache_.find(cache_key); it != cache_.end())
      return it->second;

    const PackFile& pf = packs_[pack_index];
    auto bytes = pf.pack.bytes();
    std::size_t pos = offset;
    auto next_byte = [&]() -> std::uint8_t {
      if (pos >= bytes.size())
        throw Error("truncated packfile: " + pf.pack_path.string());
      return bytes[pos++];
    };

    std::uint8_t b = next_byte();
    int type = (b >> 4) & 7;
    std::uint64_t size = b & 15;
    int shift = 4;
    while (b & 0x80) {
      b = next_byte();
      size |= std::uint64_t(b & 0x7f) << shift;
      shift += 7;
    }

    Object result;
    switch (type) {
      case 1:
      case 2:
      case 3:
      case 4: {
        static constexpr ObjectType kTypes[] = {ObjectType::Commit,
                                                ObjectType::Tree,
                                                ObjectType::Blob,
                                                ObjectType::Tag};
        result.type = kTypes[type - 1];
        result.data = zlib_inflate_at(bytes, pos, size);
        break;
      }
      case 6: {  // ofs-delta
        b = next_byte();
        std::uint64_t rel = b & 0x7f;
        while (b & 0x80) {
          b = next_byte();
          rel = ((rel + 1) << 7) | (b & 0x7f);
        }
        if (rel > offset)
          throw Error("corrupt delta offset in " + pf.pack_path.string());
        std::string delta = zlib_inflate_at(bytes, pos, size);
        Object base = read_packed(pack_index, offset - rel, depth + 1);
        result.type = base.type;
        result.data = apply_delta(base.data, delta);
        break;
      }
      case 7: {  // ref-delta
        if (pos + 20 > bytes.size())
          throw Error("truncated packfile: " + pf.pack_path.string());
        ObjectId base_id = ObjectId::from_raw(bytes.data() + pos);
        pos += 20;
        std::string delta = zlib_inflate_at(bytes, pos, size);
        auto base = read_any(base_id, depth + 1);
        if (!base)
          throw Error("delta base " + base_id.hex() + " missing in " +
                      pf.pack_path.string());
        result.type = base->type;
        result.data = apply_delta(base->data, delta);
        break;
      }
      default:
        throw Error("unknown pack entry type " + std::to_string(type));
    }

    if (result.data.size() <= kMaxCachedObject) {
      if (cache_bytes_ + result.data.size() > kCacheBudget) {
        cache_.clear();
        cache_bytes_ = 0;
      }
      cache_bytes_ += result.data.size();
      cache_.emplace(cache_key, result);
    }
    return result;
  }

  static std::string apply_delta(std::string_view base, std::string_view delta) {
    std::size_t pos = 0;
    auto varint = [&]() {
      std::uint64_t v = 0;
      int shift = 0;
      for (;;) {
        if (pos >= delta.size()) throw Error("truncated delta");
        std::uint8_t b = static_cast<std::uint8_t>(delta[pos++]);
        v |= std::uint64_t(b & 0x7f) << shift;
        shift += 7;
        if (!(b & 0x80)) return v;
      }
    };
    std::uint64_t src_size = varint();
    std::uint64_t dst_size = varint();
    if (src_size != base.size()) throw Error("delta base size mismatch");
    std::string out;
    out.reserve(dst_size);
    while (pos < delta.size()) {
      std::uint8_t op = static_cast<std::uint8_t>(delta[pos++]);
      if (op & 0x80) {
        std::uint64_t off = 0, len = 0;
        for (int i = 0; i < 4; ++i)
          if (op & (1u << i)) {
            if (pos >= delta.size()) throw Error("truncated delta");
            off |= std::uint64_t(static_cast<std::uint8_t>(delta[pos++])) << (8 * i);
          }
        for (int i = 0; i < 3; ++i)
          if (op & (0x10u << i)) {
            if (pos >= delta.size()) throw Error("truncated delta");
            len |= std::uint64_t(static_cast<std::uint8_t>(delta[pos++])) << (8 * i);
          }
        if (len == 0) len = 0x10000;
        if (off + len > base.size()) throw Error("delta copy out of range");
        out.append(base.substr(off, len));
      } else if (op > 0) {
        if (pos + op > delta.size()) throw Error("truncated delta");
        out.append(delta.substr(pos, op));
        pos += op;
      } else {
        throw Error("invalid delta opcode 0");
      }
    }
    if (out.size() != dst_size) throw Error("delta result size mismatch");
    return out;
  }

  void read_packed_refs(std::map<std::string, std::string>& raw,
                        std::map<std::string, ObjectId>& peeled) const {
    fs::path path = git_dir_ / "packed-refs";
    if (!fs::exists(path)) return;
    PlainLineSource src(path);
    std::string line;
    std::string last_name;
    while (src.next_line(line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line[0] == '^') {
        auto id = ObjectId::parse_hex(std::string_view(line).substr(1, 40));
        if (id && !last_name.empty()) peeled[last_name] = *id;
        continue;
      }
      std::size_t sp = line.find(' ');
      if (sp == std::string::npos) continue;
      std::string name = line.substr(sp + 1);
      raw[name] = line.substr(0, sp);
      last_name = std::move(name);
    }
  }

  void read_loose_refs(const std::string& prefix,
                       std::map<std::string, std::string>& raw,
                       std::map<std::string, ObjectId>& peeled) const {
    fs::path base = git_dir_ / prefix;
    std::error_code ec;
    if (!fs::is_directory(base, ec) || ec) return;
    for (fs::recursive_directory_iterator it(base, ec), end; it != end;
         it.increment(ec)) {
      if (ec) break;
      if (!it->is_regular_file()) continue;
      std::string rel = fs::relative(it->path(), base, ec).generic_string();
      if (ec) continue;
      std::string name = prefix + "/" + rel;
      PlainLineSource src(it->path());
      std::string value;
      if (!src.next_line(value)) continue;
      while (!value.empty() && (value.back() == '\r' || value.back() == ' '))
        value.pop_back();
      raw[name] = value;
      peeled.erase(name);
    }
  }

  std::optional<ObjectId> resolve_ref_value(
      const std::string& value, const std::map<std::string, std::string>& raw,
      int hops) const {
    if (hops > 8) return std::nullopt;
    if (auto id = ObjectId::parse_hex(value)) return id;
    if (value.starts_with("ref: ")) {
      std::string target = value.substr(5);
      if (auto it = raw.find(target); it != raw.end())
        return resolve_ref_value(it->second, raw, hops + 1);
      fs::path path = git_dir_ / target;
      if (fs::exists(path)) {
        PlainLineSource src(path);
        std::string v;
        if (src.next_line(v)) return resolve_ref_value(v, raw, hops + 1);
      }
    }
    return std::nullopt;
  }

  static constexpr std::size_t kCacheBudget = 48ull << 20;
  static constexpr std::size_t kMaxCachedObject = 4ull << 20;

  fs::path git_dir_;
  std::vector<PackFile> packs_;
  mutable std::unordered_map<std::uint64_t, Object> cache_;
  mutable std::size_t cache_bytes_ = 0;
};

}  // namespace reuse::git
