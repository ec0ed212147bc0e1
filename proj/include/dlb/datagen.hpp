#pragma once

// Seeded synthetic key sets and the binary dataset file.
//
// Dataset file layout (little-endian):
//   bytes 0..3   magic "DLBK"
//   bytes 4..7   uint32 format version (1)
//   bytes 8..15  uint64 key count
//   then count IEEE-754 binary64 values

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dlb/errors.hpp"
#include "dlb/rng.hpp"

namespace dlb {

enum class DistKind { kUniform, kNormal, kLognormal };

inline std::string_view dist_name(DistKind k) {
  switch (k) {
    case DistKind::kUniform: return "uniform";
    case DistKind::kNormal: return "normal";
    case DistKind::kLognormal: return "lognormal";
  }
  return "?";
}

inline DistKind dist_from_name(std::string_view name) {
  if (name == "uniform") return DistKind::kUniform;
  if (name == "normal") return DistKind::kNormal;
  if (name == "lognormal") return DistKind::kLognormal;
  throw BadSpec("unknown distribution '" + std::string(name) +
                "' (expected uniform, normal or lognormal)");
}

/// (a, b) is (low, high) for uniform, (mean, stddev) for normal and
/// (mu, sigma) of the underlying normal for lognormal.
struct DistributionSpec {
  DistKind kind = DistKind::kLognormal;
  double a = 10.0;
  double b = 1.0;
  std::uint64_t count = 200000;
  std::uint64_t seed = 7;

  static DistributionSpec uniform(double low = 0.0, double high = 1e6) {
    return {DistKind::kUniform, low, high};
  }
  static DistributionSpec normal(double mean = 500000.0, double stddev = 100000.0) {
    return {DistKind::kNormal, mean, stddev};
  }
  static DistributionSpec lognormal(double mu = 10.0, double sigma = 1.0) {
    return {DistKind::kLognormal, mu, sigma};
  }
  static DistributionSpec defaults_for(DistKind kind) {
    switch (kind) {
      case DistKind::kUniform: return uniform();
      case DistKind::kNormal: return normal();
      case DistKind::kLognormal: return lognormal();
    }
    return lognormal();
  }

  DistributionSpec& with_count(std::uint64_t c) { count = c; return *this; }
  DistributionSpec& with_seed(std::uint64_t s) { seed = s; return *this; }

  void validate() const {
    if (count < 1) throw BadSpec("count must be >= 1");
    if (!std::isfinite(a) || !std::isfinite(b)) throw BadSpec("distribution parameters must be finite");
    switch (kind) {
      case DistKind::kUniform:
        if (!(a < b)) throw BadSpec("uniform needs low < high");
        break;
      case DistKind::kNormal:
        if (!(b > 0.0)) throw BadSpec("normal needs stddev > 0");
        break;
      case DistKind::kLognormal:
        if (!(b > 0.0)) throw BadSpec("lognormal needs sigma > 0");
        break;
    }
  }
};

inline std::vector<double> generate(const DistributionSpec& spec) {
  spec.validate();
  Xoshiro256 rng(spec.seed);
  std::vector<double> keys(spec.count);
  for (auto& k : keys) {
    switch (spec.kind) {
      case DistKind::kUniform: k = rng.uniform(spec.a, spec.b); break;
      case DistKind::kNormal: k = spec.a + spec.b * rng.normal(); break;
      case DistKind::kLognormal: k = std::exp(spec.a + spec.b * rng.normal()); break;
    }
  }
  return keys;
}

inline constexpr std::array<char, 4> kDatasetMagic{'D', 'L', 'B', 'K'};
inline constexpr std::uint32_t kDatasetVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_dataset(std::span<const double> keys) {
  std::string out;
  out.reserve(16 + keys.size() * 8);
  out.append(kDatasetMagic.data(), kDatasetMagic.size());
  detail::put_le<std::uint32_t>(out, kDatasetVersion);
  detail::put_le<std::uint64_t>(out, keys.size());
  for (double k : keys) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(k));
  return out;
}

inline std::vector<double> decode_dataset(std::string_view bytes) {
  if (bytes.size() < 16) throw FormatError("dataset is shorter than its 16-byte header");
  if (std::memcmp(bytes.data(), kDatasetMagic.data(), 4) != 0) throw FormatError("bad dataset magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = detail::get_le<std::uint32_t>(p + 4);
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto count = detail::get_le<std::uint64_t>(p + 8);
  const std::size_t payload = bytes.size() - 16;
  if (payload % 8 != 0 || payload / 8 != count)
    throw FormatError("dataset header declares " + std::to_string(count) + " keys but payload holds " +
                      std::to_string(payload / 8) + (payload % 8 ? " plus a partial value" : ""));
  std::vector<double> keys(count);
  for (std::uint64_t i = 0; i < count; ++i)
    keys[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + 16 + 8 * i));
  return keys;
}

inline void write_dataset(std::span<const double> keys, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  const std::string bytes = encode_dataset(keys);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("failed writing '" + path + "'");
}

inline std::vector<double> read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open dataset '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_dataset(bytes);
}

}  // namespace dlb
