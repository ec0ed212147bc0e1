#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "dlb/errors.hpp"
#include "dlb/ring.hpp"

namespace dlb {

// BKDR string hash: h = h * seed + byte, mod 2^32.
inline std::uint32_t bkdr_hash(std::string_view bytes, std::uint32_t seed = 131) {
  std::uint32_t h = 0;
  for (unsigned char c : bytes) h = h * seed + c;
  return h;
}

// MurmurHash3, x86 32-bit variant.
inline std::uint32_t murmur3_32(std::string_view bytes, std::uint32_t seed = 0) {
  constexpr std::uint32_t c1 = 0xcc9e2d51;
  constexpr std::uint32_t c2 = 0x1b873593;
  auto rotl = [](std::uint32_t x, int r) { return (x << r) | (x >> (32 - r)); };

  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t len = bytes.size();
  const std::size_t nblocks = len / 4;
  std::uint32_t h1 = seed;

  for (std::size_t i = 0; i < nblocks; ++i) {
    // little-endian block read, independent of host byte order
    std::uint32_t k1 = std::uint32_t{data[4 * i]} |
                       (std::uint32_t{data[4 * i + 1]} << 8) |
                       (std::uint32_t{data[4 * i + 2]} << 16) |
                       (std::uint32_t{data[4 * i + 3]} << 24);
    k1 *= c1;
    k1 = rotl(k1, 15);
    k1 *= c2;
    h1 ^= k1;
    h1 = rotl(h1, 13);
    h1 = h1 * 5 + 0xe6546b64;
  }

  const unsigned char* tail = data + nblocks * 4;
  std::uint32_t k1 = 0;
  switch (len & 3) {
    case 3: k1 ^= std::uint32_t{tail[2]} << 16; [[fallthrough]];
    case 2: k1 ^= std::uint32_t{tail[1]} << 8; [[fallthrough]];
    case 1:
      k1 ^= tail[0];
      k1 *= c1;
      k1 = rotl(k1, 15);
      k1 *= c2;
      h1 ^= k1;
  }

  h1 ^= static_cast<std::uint32_t>(len);
  h1 ^= h1 >> 16;
  h1 *= 0x85ebca6b;
  h1 ^= h1 >> 13;
  h1 *= 0xc2b2ae35;
  h1 ^= h1 >> 16;
  return h1;
}

// FNV-1a, 32-bit.
inline std::uint32_t fnv1a_32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

enum class HashKind { kBkdr, kMurmur3, kFnv1a };

struct HashFn {
  HashKind kind = HashKind::kMurmur3;
  std::uint32_t seed = 0;

  static HashFn bkdr(std::uint32_t seed = 131) { return {HashKind::kBkdr, seed}; }
  static HashFn murmur3(std::uint32_t seed = 0) { return {HashKind::kMurmur3, seed}; }
  static HashFn fnv1a() { return {HashKind::kFnv1a, 0}; }

  /// Looks up a registered function by name with its default seed.
  static HashFn from_name(std::string_view name) {
    if (name == "bkdr") return bkdr();
    if (name == "murmur3") return murmur3();
    if (name == "fnv1a") return fnv1a();
    throw UnknownHash("unknown hash function '" + std::string(name) +
                      "' (expected bkdr, murmur3 or fnv1a)");
  }

  std::string_view name() const {
    switch (kind) {
      case HashKind::kBkdr: return "bkdr";
      case HashKind::kMurmur3: return "murmur3";
      case HashKind::kFnv1a: return "fnv1a";
    }
    return "?";
  }

  std::uint32_t operator()(std::string_view bytes) const {
    switch (kind) {
      case HashKind::kBkdr: return bkdr_hash(bytes, seed);
      case HashKind::kMurmur3: return murmur3_32(bytes, seed);
      case HashKind::kFnv1a: return fnv1a_32(bytes);
    }
    return 0;
  }
};

/// Shortest decimal string that round-trips to the same double.
inline std::string key_to_string(double key) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), key);
  return std::string(buf, end);
}

inline RingPosition hash_to_ring(std::string_view key, const HashFn& fn,
                                 std::uint64_t ring_size) {
  if (ring_size < 2) throw ValidationError("hash_to_ring: ring size must be >= 2");
  return {std::uint64_t{fn(key)} % ring_size};
}

inline RingPosition hash_to_ring(double key, const HashFn& fn, std::uint64_t ring_size) {
  return hash_to_ring(key_to_string(key), fn, ring_size);
}

}  // namespace dlb
