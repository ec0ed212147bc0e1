#pragma once

// Load-uniformity metrics and the cross-method comparison table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlb/errors.hpp"
#include "dlb/ring.hpp"

namespace dlb {

/// Population standard deviation of per-bin loads about the ideal mean m/n:
///   sqrt(sum_j (load_j - m/n)^2 / n)
inline double std_metric(std::span<const std::uint64_t> loads) {
  if (loads.empty()) throw ValidationError("std_metric needs at least one bin");
  long double m = 0;
  for (auto l : loads) m += static_cast<long double>(l);
  const long double mean = m / static_cast<long double>(loads.size());
  long double acc = 0;
  for (auto l : loads) {
    const long double d = static_cast<long double>(l) - mean;
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc / static_cast<long double>(loads.size())));
}

/// (max - min) / mean of the counts; 0 for an all-zero vector.
inline double spread(std::span<const std::uint64_t> counts) {
  if (counts.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  double sum = 0;
  for (auto c : counts) sum += static_cast<double>(c);
  const double mean = sum / static_cast<double>(counts.size());
  return mean > 0 ? static_cast<double>(*hi - *lo) / mean : 0.0;
}

/// Bin index of a ring position when [0, T) is cut into n equal segments.
inline std::size_t bin_of(RingPosition pos, std::uint64_t ring_size, std::size_t n_bins) {
  const auto b = static_cast<unsigned __int128>(pos.value) * n_bins / ring_size;
  return static_cast<std::size_t>(std::min<unsigned __int128>(b, n_bins - 1));
}

/// Maps every key through `mapper` (key -> RingPosition) onto n_bins equal
/// ring segments and returns the per-bin counts in ascending order.
template <typename Keys, typename Mapper>
std::vector<std::uint64_t> sorted_bin_counts(const Keys& keys, Mapper&& mapper, std::size_t n_bins,
                                             std::uint64_t ring_size) {
  if (n_bins < 1) throw ValidationError("sorted_bin_counts needs n_bins >= 1");
  std::vector<std::uint64_t> counts(n_bins, 0);
  for (const auto& k : keys) ++counts[bin_of(mapper(k), ring_size, n_bins)];
  std::sort(counts.begin(), counts.end());
  return counts;
}

struct MethodRuns {
  std::string method;
  std::vector<double> stds;  // one per repetition
};

struct CompareRow {
  std::string method;
  double mean_std = 0.0;
  double min_std = 0.0;
  double max_std = 0.0;
  double ratio = 0.0;         // mean_std / reference mean_std
  double excess_ratio = 0.0;  // (mean_std - reference) / reference
};

struct CompareTable {
  std::string reference;  // "dlb" when present, otherwise the best method
  std::vector<CompareRow> rows;
  bool with_spread = true;

  /// method,mean_std[,min,max],ratio_vs_<ref>,excess_ratio_vs_<ref>
  void write_csv(std::ostream& os) const {
    const std::string ref = reference == "dlb" ? "dlb" : "best";
    os << "method,mean_std";
    if (with_spread) os << ",min,max";
    os << ",ratio_vs_" << ref << ",excess_ratio_vs_" << ref << '\n';
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    for (const auto& r : rows) {
      os << r.method << ',' << num(r.mean_std);
      if (with_spread) os << ',' << num(r.min_std) << ',' << num(r.max_std);
      os << ',' << num(r.ratio) << ',' << num(r.excess_ratio) << '\n';
    }
  }
};

/// Aggregates repeated std measurements per method. Ratios are taken
/// against "dlb" if it is among the methods, else against the lowest mean.
inline CompareTable compare_table(std::span<const MethodRuns> results) {
  if (results.size() < 2) throw ValidationError("compare_table needs at least two methods");
  CompareTable table;
  std::size_t max_runs = 0;
  for (const auto& r : results) {
    if (r.stds.empty()) throw ValidationError("method '" + r.method + "' has no runs");
    CompareRow row;
    row.method = r.method;
    double sum = 0;
    row.min_std = std::numeric_limits<double>::infinity();
    row.max_std = -std::numeric_limits<double>::infinity();
    for (double s : r.stds) {
      sum += s;
      row.min_std = std::min(row.min_std, s);
      row.max_std = std::max(row.max_std, s);
    }
    row.mean_std = sum / static_cast<double>(r.stds.size());
    max_runs = std::max(max_runs, r.stds.size());
    table.rows.push_back(row);
  }
  table.with_spread = max_runs > 1;

  const CompareRow* ref = nullptr;
  for (const auto& row : table.rows)
    if (row.method == "dlb") ref = &row;
  if (!ref) {
    ref = &table.rows.front();
    for (const auto& row : table.rows)
      if (row.mean_std < ref->mean_std) ref = &row;
  }
  table.reference = ref->method;
  const double base = ref->mean_std;
  for (auto& row : table.rows) {
    row.ratio = base > 0 ? row.mean_std / base : (row.mean_std > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    row.excess_ratio = row.ratio - 1.0;
  }
  return table;
}

}  // namespace dlb
