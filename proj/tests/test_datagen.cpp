#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dlb/datagen.hpp"

using namespace dlb;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Kolmogorov-Smirnov distance against a known CDF.
template <typename Cdf>
double ks(std::vector<double> v, Cdf cdf) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dlb_test_" + name);
}

}  // namespace

TEST(Generate, LawOfLargeNumbers) {
  const auto u = generate(DistributionSpec::uniform(0, 1).with_count(100000).with_seed(1));
  EXPECT_NEAR(mean_of(u), 0.5, 0.01);
  const auto n = generate(DistributionSpec::normal(0, 1).with_count(100000).with_seed(1));
  EXPECT_NEAR(std_of(n), 1.0, 0.02);
}

TEST(Generate, MatchesTargetDistributions) {
  const auto u = generate(DistributionSpec::uniform().with_count(200000).with_seed(2));
  EXPECT_LT(ks(u, [](double x) { return x / 1e6; }), 0.01);
  const auto n = generate(DistributionSpec::normal().with_count(200000).with_seed(2));
  EXPECT_LT(ks(n, [](double x) { return phi((x - 5e5) / 1e5); }), 0.01);
  const auto l = generate(DistributionSpec::lognormal().with_count(200000).with_seed(2));
  EXPECT_LT(ks(l, [](double x) { return phi(std::log(x) - 10.0); }), 0.01);
}

TEST(Generate, Deterministic) {
  const auto spec = DistributionSpec::lognormal().with_count(1000).with_seed(42);
  const auto a = generate(spec), b = generate(spec);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
  EXPECT_NE(generate(DistributionSpec::lognormal().with_count(1000).with_seed(43)), a);
}

TEST(Generate, BadSpecs) {
  EXPECT_THROW(generate(DistributionSpec::uniform(1, 1)), BadSpec);
  EXPECT_THROW(generate(DistributionSpec::normal(0, 0)), BadSpec);
  EXPECT_THROW(generate(DistributionSpec::lognormal(0, -1)), BadSpec);
  EXPECT_THROW(generate(DistributionSpec::uniform().with_count(0)), BadSpec);
  EXPECT_THROW(dist_from_name("pareto"), BadSpec);
  EXPECT_EQ(dist_from_name("normal"), DistKind::kNormal);
}

TEST(Dataset, FileRoundTrip) {
  const auto keys = generate(DistributionSpec::normal().with_count(1000).with_seed(3));
  const auto path = temp_file("roundtrip.dlbk").string();
  write_dataset(keys, path);
  EXPECT_EQ(read_dataset(path), keys);
  std::filesystem::remove(path);
}

TEST(Dataset, FormatErrors) {
  const auto path = temp_file("empty.dlbk").string();
  { std::ofstream os(path, std::ios::binary); }
  EXPECT_THROW(read_dataset(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_dataset(temp_file("missing.dlbk").string()), FormatError);

  const std::vector<double> keys{1.0, 2.0, 3.0};
  auto bytes = encode_dataset(keys);
  EXPECT_THROW(decode_dataset(bytes.substr(0, bytes.size() - 8)), FormatError);
  EXPECT_THROW(decode_dataset(bytes.substr(0, bytes.size() - 3)), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_dataset(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_dataset(bad_version), FormatError);
}
