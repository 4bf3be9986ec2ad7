#pragma once

// Line-oriented record IO. Intermediate pipeline files are gzip streams made
// of independently written members, so files produced by parallel workers can
// be byte-concatenated into one logical file. Plain text is used for the few
// human-edited inputs (manifest, exclusion list, p2P).
//
// Also hosts the raw zlib helpers the git object store needs.

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reuse/common.hpp"

namespace reuse {

constexpr int kIntermediateGzipLevel = 1;  // throwaway files, favor speed
constexpr int kReleaseGzipLevel = 6;

class LineSink {
 public:
  virtual ~LineSink() = default;
  virtual void write_line(std::string_view line) = 0;
  virtual void close() = 0;
};

class LineSource {
 public:
  virtual ~LineSource() = default;
  // Returns false at end of input. A final unterminated line is still yielded.
  virtual bool next_line(std::string& out) = 0;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw Error("cannot open " + path.string());
  return f;
}

}  // namespace detail

class GzipLineSink final : public LineSink {
 public:
  explicit GzipLineSink(const fs::path& path, int level = kIntermediateGzipLevel)
      : path_(path.string()), file_(detail::open_file(path, "wb")) {
    std::memset(&strm_, 0, sizeof strm_);
    if (deflateInit2(&strm_, level, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
      throw Error("deflateInit failed for " + path_);
    pending_.reserve(kFlushThreshold + 4096);
  }

  GzipLineSink(const GzipLineSink&) = delete;
  GzipLineSink& operator=(const GzipLineSink&) = delete;

  ~GzipLineSink() override {
    try {
      close();
    } catch (...) {
      // close() must be called explicitly to observe write errors
    }
    if (!finished_) deflateEnd(&strm_);
  }

  void write_line(std::string_view line) override {
    pending_.append(line);
    pending_.push_back('\n');
    if (pending_.size() >= kFlushThreshold) compress_pending(Z_NO_FLUSH);
  }

  void close() override {
    if (closed_) return;
    compress_pending(Z_FINISH);
    deflateEnd(&strm_);
    finished_ = true;
    if (std::fclose(file_.release()) != 0)
      throw Error("close failed: " + path_);
    closed_ = true;
  }

 private:
  static constexpr std::size_t kFlushThreshold = 64 * 1024;

  void compress_pending(int flush) {
    strm_.next_in = reinterpret_cast<Bytef*>(pending_.data());
    strm_.avail_in = static_cast<uInt>(pending_.size());
    unsigned char out[64 * 1024];
    for (;;) {
      strm_.next_out = out;
      strm_.avail_out = sizeof out;
      int rc = deflate(&strm_, flush);
      if (rc == Z_STREAM_ERROR) throw Error("deflate failed: " + path_);
      std::size_t produced = sizeof out - strm_.avail_out;
      if (produced > 0 &&
          std::fwrite(out, 1, produced, file_.get()) != produced)
        throw Error("write failed (disk full?): " + path_);
      if (rc == Z_STREAM_END) break;
      if (strm_.avail_out != 0 && flush != Z_FINISH) break;
    }
    pending_.clear();
  }

  std::string path_;
  detail::FilePtr file_;
  z_stream strm_;
  std::string pending_;
  bool closed_ = false;
  bool finished_ = false;
};

class PlainLineSink final : public LineSink {
 public:
  explicit PlainLineSink(const fs::path& path)
      : path_(path.string()), file_(detail::open_file(path, "wb")) {}

  void write_line(std::string_view line) override {
    if (std::fwrite(line.data(), 1, line.size(), file_.get()) != line.size() ||
        std::fputc('\n', file_.get()) == EOF)
      throw Error("write failed: " + path_);
  }

  void close() override {
    if (!file_) return;
    if (std::fclose(file_.release()) != 0)
      throw Error("close failed: " + path_);
  }

 private:
  std::string path_;
  detail::FilePtr file_;
};

// Reads a gzip file that may consist of several concatenated members.
class GzipLineSource final : public LineSource {
 public:
  explicit GzipLineSource(const fs::path& path)
      : path_(path.string()), file_(detail::open_file(path, "rb")) {
    std::memset(&strm_, 0, sizeof strm_);
    if (inflateInit2(&strm_, 15 + 16) != Z_OK)
      throw Error("inflateInit failed for " + path_);
    inflate_alive_ = true;
  }

  GzipLineSource(const GzipLineSource&) = delete;
  GzipLineSource& operator=(const GzipLineSource&) = delete;

  ~GzipLineSource() override {
    if (inflate_alive_) inflateEnd(&strm_);
  }

  bool next_line(std::string& out) override {
    out.clear();
    for (;;) {
      if (pos_ < window_.size()) {
        const char* base = window_.data() + pos_;
        std::size_t avail = window_.size() - pos_;
        const void* nl = std::memchr(base, '\n', avail);
        if (nl != nullptr) {
          std::size_t len = static_cast<const char*>(nl) - base;
          out.append(base, len);
          pos_ += len + 1;
          return true;
        }
        out.append(base, avail);
        pos_ = window_.size();
      }
      if (!refill()) return !out.empty();
    }
  }

 private:
  static constexpr std::size_t kInChunk = 32 * 1024;
  static constexpr std::size_t kOutChunk = 64 * 1024;

  // Decompresses the next chunk into window_. Returns false when the file is
  // fully consumed.
  bool refill() {
    if (done_) return false;
    window_.resize(kOutChunk);
    pos_ = 0;
    std::size_t produced = 0;
    while (produced == 0) {
      if (strm_.avail_in == 0 && !saw_eof_) {
        read_ = std::fread(in_buf_, 1, kInChunk, file_.get());
        if (read_ < kInChunk) {
          if (std::ferror(file_.get())) throw Error("read failed: " + path_);
          saw_eof_ = true;
        }
        strm_.next_in = in_buf_;
        strm_.avail_in = static_cast<uInt>(read_);
      }
      if (strm_.avail_in == 0 && saw_eof_) {
        if (mid_stream_) throw Error("truncated gzip stream: " + path_);
        done_ = true;
        window_.clear();
        return false;
      }
      strm_.next_out = reinterpret_cast<Bytef*>(window_.data());
      strm_.avail_out = static_cast<uInt>(window_.size());
      int rc = inflate(&strm_, Z_NO_FLUSH);
      produced = window_.size() - strm_.avail_out;
      if (rc == Z_STREAM_END) {
        mid_stream_ = false;
        if (strm_.avail_in > 0 || !saw_eof_) {
          if (inflateReset(&strm_) != Z_OK)
            throw Error("inflateReset failed: " + path_);
        } else {
          done_ = true;
        }
      } else if (rc == Z_OK || rc == Z_BUF_ERROR) {
        // Z_BUF_ERROR just means no forward progress this call; loop to read
        // more input. A gzip header split across reads lands here.
        mid_stream_ = true;
      } else {
        throw Error("corrupt gzip stream: " + path_);
      }
      if (done_) break;
    }
    window_.resize(produced);
    return produced > 0 || !done_;
  }

  std::string path_;
  detail::FilePtr file_;
  z_stream strm_;
  bool inflate_alive_ = false;
  unsigned char in_buf_[kInChunk];
  std::size_t read_ = 0;
  std::string window_;
  std::size_t pos_ = 0;
  bool saw_eof_ = false;
  bool mid_stream_ = false;
  bool done_ = false;
};

class PlainLineSource final : public LineSource {
 public:
  explicit PlainLineSource(const fs::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open " + path.string());
  }

  bool next_line(std::string& out) override {
    return static_cast<bool>(std::getline(in_, out));
  }

 private:
  std::ifstream in_;
};

inline bool is_gz_path(const fs::path& path) {
  return path.extension() == ".gz";
}

inline std::unique_ptr<LineSink> open_line_sink(
    const fs::path& path, int gz_level = kIntermediateGzipLevel) {
  if (is_gz_path(path)) return std::make_unique<GzipLineSink>(path, gz_level);
  return std::make_unique<PlainLineSink>(path);
}

inline std::unique_ptr<LineSource> open_line_source(const fs::path& path) {
  if (is_gz_path(path)) return std::make_unique<GzipLineSource>(path);
  return std::make_unique<PlainLineSource>(path);
}

// Byte-concatenates complete gzip files; an empty source list yields a valid
// empty gzip member so readers never see a zero-byte file.
inline void concatenate_gzip_files(const fs::path& dest,
                                   const std::vector<fs::path>& sources) {
  if (sources.empty()) {
    GzipLineSink empty(dest);
    empty.close();
    return;
  }
  auto out = detail::open_file(dest, "wb");
  std::vector<char> buf(1 << 20);
  for (const auto& src : sources) {
    auto in = detail::open_file(src, "rb");
    for (;;) {
      std::size_t n = std::fread(buf.data(), 1, buf.size(), in.get());
      if (n == 0) {
        if (std::ferror(in.get())) throw Error("read failed: " + src.string());
        break;
      }
      if (std::fwrite(buf.data(), 1, n, out.get()) != n)
        throw Error("write failed: " + dest.string());
    }
  }
  if (std::fclose(out.release()) != 0)
    throw Error("close failed: " + dest.string());
}

// --- raw zlib helpers (git object encoding) ---

// Inflates one whole zlib stream (a loose git object file).
inline std::string zlib_inflate_all(std::span<const std::uint8_t> in,
                                    std::size_t size_hint = 0) {
  z_stream strm;
  std::memset(&strm, 0, sizeof strm);
  if (inflateInit(&strm) != Z_OK) throw Error("inflateInit failed");
  std::string out;
  out.reserve(size_hint > 0 ? size_hint : in.size() * 3);
  strm.next_in = const_cast<Bytef*>(in.data());
  strm.avail_in = static_cast<uInt>(in.size());
  unsigned char chunk[64 * 1024];
  int rc = Z_OK;
  do {
    strm.next_out = chunk;
    strm.avail_out = sizeof chunk;
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw Error("corrupt zlib stream");
    }
    out.append(reinterpret_cast<char*>(chunk), sizeof chunk - strm.avail_out);
  } while (rc != Z_STREAM_END && (strm.avail_in > 0 || strm.avail_out == 0));
  inflateEnd(&strm);
  if (rc != Z_STREAM_END) throw Error("truncated zlib stream");
  return out;
}

// Inflates one zlib stream embedded at `offset` inside a packfile; the
// compressed length is unknown up front, decoding stops at stream end.
inline std::string zlib_inflate_at(std::span<const std::uint8_t> pack,
                                   std::size_t offset,
                                   std::size_t expected_size) {
  if (offset > pack.size()) throw Error("pack offset out of range");
  z_stream strm;
  std::memset(&strm, 0, sizeof strm);
  if (inflateInit(&strm) != Z_OK) throw Error("inflateInit failed");
  std::string out;
  out.resize(expected_size);
  strm.next_in = const_cast<Bytef*>(pack.data() + offset);
  strm.avail_in = static_cast<uInt>(pack.size() - offset);
  strm.next_out = reinterpret_cast<Bytef*>(out.data());
  strm.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&strm, Z_FINISH);
  inflateEnd(&strm);
  if (rc != Z_STREAM_END || strm.avail_out != 0)
    throw Error("corrupt pack entry");
  return out;
}

// Deflates to the bare zlib format (what git uses for loose objects).
inline std::string zlib_deflate(std::string_view data, int level = 6) {
  z_stream strm;
  std::memset(&strm, 0, sizeof strm);
  if (deflateInit(&strm, level) != Z_OK) throw Error("deflateInit failed");
  std::string out;
  out.resize(deflateBound(&strm, static_cast<uLong>(data.size())));
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  strm.avail_in = static_cast<uInt>(data.size());
  strm.next_out = reinterpret_cast<Bytef*>(out.data());
  strm.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&strm, Z_FINISH);
  deflateEnd(&strm);
  if (rc != Z_STREAM_END) throw Error("deflate failed");
  out.resize(out.size() - strm.avail_out);
  return out;
}

}  // namespace reuse
