#pragma once

// SHA-1. Used for git object identity, for stage input fingerprints, and by
// the verification oracle. Not a general-purpose hashing library.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "reuse/common.hpp"

namespace reuse {

using Sha1Digest = std::array<std::uint8_t, 20>;

class Sha1 {
 public:
  Sha1() { reset(); }

  void reset() {
    h_[0] = 0x67452301u;
    h_[1] = 0xefcdab89u;
    h_[2] = 0x98badcfeu;
    h_[3] = 0x10325476u;
    h_[4] = 0xc3d2e1f0u;
    total_ = 0;
    buffered_ = 0;
  }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    total_ += len;
    if (buffered_ > 0) {
      std::size_t take = std::min(len, std::size_t(64) - buffered_);
      std::memcpy(buf_ + buffered_, p, take);
      buffered_ += take;
      p += take;
      len -= take;
      if (buffered_ == 64) {
        process(buf_);
        buffered_ = 0;
      }
    }
    while (len >= 64) {
      process(p);
      p += 64;
      len -= 64;
    }
    if (len > 0) {
      std::memcpy(buf_, p, len);
      buffered_ = len;
    }
  }

  void update(std::string_view data) { update(data.data(), data.size()); }

  Sha1Digest finish() {
    std::uint64_t bit_len = total_ * 8;
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    std::uint8_t zero = 0;
    while (buffered_ != 56) update(&zero, 1);
    std::uint8_t len_be[8];
    for (int i = 0; i < 8; ++i)
      len_be[i] = static_cast<std::uint8_t>(bit_len >> (8 * (7 - i)));
    update(len_be, 8);
    Sha1Digest out;
    for (int i = 0; i < 5; ++i) {
      out[i * 4 + 0] = static_cast<std::uint8_t>(h_[i] >> 24);
      out[i * 4 + 1] = static_cast<std::uint8_t>(h_[i] >> 16);
      out[i * 4 + 2] = static_cast<std::uint8_t>(h_[i] >> 8);
      out[i * 4 + 3] = static_cast<std::uint8_t>(h_[i]);
    }
    return out;
  }

  static Sha1Digest digest(std::string_view data) {
    Sha1 s;
    s.update(data);
    return s.finish();
  }

  static std::string hex_digest(std::string_view data) {
    return to_hex(digest(data));
  }

  static std::string to_hex(const Sha1Digest& d) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.resize(40);
    for (int i = 0; i < 20; ++i) {
      out[i * 2] = hex[d[i] >> 4];
      out[i * 2 + 1] = hex[d[i] & 0xf];
    }
    return out;
  }

 private:
  static std::uint32_t rotl(std::uint32_t v, int n) {
    return (v << n) | (v >> (32 - n));
  }

  void process(const std::uint8_t* block) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
      w[i] = (std::uint32_t(block[i * 4]) << 24) |
             (std::uint32_t(block[i * 4 + 1]) << 16) |
             (std::uint32_t(block[i * 4 + 2]) << 8) |
             std::uint32_t(block[i * 4 + 3]);
    }
    for (int i = 16; i < 80; ++i)
      w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5a827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdcu;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6u;
      }
      std::uint32_t tmp = rotl(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  std::uint32_t h_[5];
  std::uint64_t total_ = 0;
  std::uint8_t buf_[64];
  std::size_t buffered_ = 0;
};

}  // namespace reuse
