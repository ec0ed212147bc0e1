#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite: balance comparison across methods, the hash-skew bin series, and
// the simulated makespan comparison.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlb/baseline.hpp"
#include "dlb/datagen.hpp"
#include "dlb/errors.hpp"
#include "dlb/hash.hpp"
#include "dlb/hier_model.hpp"
#include "dlb/metrics.hpp"
#include "dlb/server_manager.hpp"
#include "dlb/sim.hpp"

namespace dlb {

enum class BalancerKind { kCh, kChbl, kDlb };

inline BalancerKind balancer_from_name(std::string_view name) {
  if (name == "ch") return BalancerKind::kCh;
  if (name == "chbl") return BalancerKind::kChbl;
  if (name == "dlb") return BalancerKind::kDlb;
  throw ValidationError("unknown balancer '" + std::string(name) + "' (expected ch, chbl or dlb)");
}

inline std::string_view balancer_name(BalancerKind k) {
  switch (k) {
    case BalancerKind::kCh: return "ch";
    case BalancerKind::kChbl: return "chbl";
    case BalancerKind::kDlb: return "dlb";
  }
  return "?";
}

/// "dlb", or "<ch|chbl>-<hash>".
struct MethodSpec {
  BalancerKind kind = BalancerKind::kDlb;
  HashFn hash;

  static MethodSpec parse(std::string_view name) {
    if (name == "dlb") return {BalancerKind::kDlb, {}};
    const auto dash = name.find('-');
    if (dash == std::string_view::npos) throw ValidationError("unknown method '" + std::string(name) + "'");
    const auto kind = balancer_from_name(name.substr(0, dash));
    if (kind == BalancerKind::kDlb) throw ValidationError("unknown method '" + std::string(name) + "'");
    try {
      return {kind, HashFn::from_name(name.substr(dash + 1))};
    } catch (const UnknownHash&) {
      throw ValidationError("unknown method '" + std::string(name) + "'");
    }
  }

  std::string name() const {
    if (kind == BalancerKind::kDlb) return "dlb";
    return std::string(balancer_name(kind)) + "-" + std::string(hash.name());
  }
};

inline const std::vector<std::string>& default_methods() {
  static const std::vector<std::string> methods{"ch-bkdr",  "ch-murmur3",  "ch-fnv1a", "chbl-bkdr",
                                                "chbl-murmur3", "chbl-fnv1a", "dlb"};
  return methods;
}

struct BalanceOptions {
  std::uint32_t servers = 64;
  std::uint32_t virtual_nodes = ChRing::kDefaultVirtualNodes;
  double bound_c = BoundedLoadPolicy::kDefaultC;
  std::uint64_t epsilon = 0;  // 0: ceil(1.25 * m / n)
  std::uint32_t repeats = 10;
  std::uint64_t seed = 7;
};

/// Virtual-node names differ per repetition, which reseeds the ring layout.
inline std::string ring_prefix(std::uint64_t seed, std::uint32_t repetition) {
  return "server-" + std::to_string(seed) + "." + std::to_string(repetition) + "-";
}

inline ChRing make_ch_ring(const HashFn& hash, std::uint32_t servers, std::uint32_t vnodes,
                           const std::string& prefix) {
  ChRing ring(hash, vnodes, RingConfig::kDefaultSize, prefix);
  for (ServerId s = 0; s < servers; ++s) ring.add_server(s);
  return ring;
}

inline ServerTable make_dlb_table(const HierModel& model, std::uint32_t servers, std::uint64_t epsilon) {
  ServerTable table(RingConfig{model.config().ring_size}, epsilon);
  for (ServerId s = 0; s < servers; ++s) table.add_server(s);
  return table;
}

/// Per-server loads for one DLB run over `keys`.
inline std::vector<std::uint64_t> dlb_loads(const HierModel& model, std::span<const double> keys,
                                            std::uint32_t servers, std::uint64_t epsilon) {
  ServerTable table = make_dlb_table(model, servers, epsilon);
  std::vector<std::uint64_t> loads(servers, 0);
  for (double k : keys) ++loads[table.assign_with_bound(model.map_position(k))];
  return loads;
}

/// std of per-server load for every method. Hash-based methods are repeated
/// with different ring layouts; DLB is deterministic and runs once.
inline std::vector<MethodRuns> eval_balance(std::span<const double> keys, const HierModel* model,
                                            const std::vector<std::string>& methods,
                                            const BalanceOptions& opt) {
  std::vector<MethodSpec> specs;
  for (const auto& m : methods) specs.push_back(MethodSpec::parse(m));
  if (opt.servers == 0) throw ValidationError("need at least one server");
  if (opt.repeats == 0) throw ValidationError("repeats must be >= 1");
  BoundedLoadPolicy policy{opt.bound_c};
  policy.validate();

  std::vector<std::string> key_strings;
  key_strings.reserve(keys.size());
  for (double k : keys) key_strings.push_back(key_to_string(k));

  std::vector<MethodRuns> out;
  for (const auto& spec : specs) {
    MethodRuns runs{spec.name(), {}};
    if (spec.kind == BalancerKind::kDlb) {
      if (!model) throw ValidationError("method dlb needs a trained model");
      const std::uint64_t eps = opt.epsilon ? opt.epsilon : default_epsilon(keys.size(), opt.servers);
      runs.stds.push_back(std_metric(dlb_loads(*model, keys, opt.servers, eps)));
    } else {
      for (std::uint32_t rep = 0; rep < opt.repeats; ++rep) {
        const ChRing ring = make_ch_ring(spec.hash, opt.servers, opt.virtual_nodes, ring_prefix(opt.seed, rep));
        std::vector<std::uint64_t> loads(opt.servers, 0);
        LoadCounters counters;
        for (const auto& k : key_strings) {
          const ServerId s = spec.kind == BalancerKind::kCh ? ch_assign(k, ring) : chbl_assign(k, ring, policy, counters);
          ++loads[s];
        }
        runs.stds.push_back(std_metric(loads));
      }
    }
    out.push_back(std::move(runs));
  }
  return out;
}

struct BinSeries {
  std::string name;
  std::vector<std::uint64_t> counts;  // ascending
};

/// Sorted bin counts of `keys` hashed by each registered function.
inline std::vector<BinSeries> hash_bin_series(std::span<const double> keys, std::size_t bins) {
  std::vector<BinSeries> out;
  for (const auto& fn : {HashFn::bkdr(), HashFn::murmur3(), HashFn::fnv1a()}) {
    auto mapper = [&](double k) { return hash_to_ring(k, fn, RingConfig::kDefaultSize); };
    out.push_back({std::string(fn.name()), sorted_bin_counts(keys, mapper, bins, RingConfig::kDefaultSize)});
  }
  return out;
}

inline BinSeries model_bin_series(std::span<const double> keys, const HierModel& model, std::size_t bins) {
  auto mapper = [&](double k) { return model.map_position(k); };
  return {"dlb", sorted_bin_counts(keys, mapper, bins, model.config().ring_size)};
}

/// series,rank,count (rank is 1-based within each series)
inline void write_bins_csv(const std::vector<BinSeries>& series, std::ostream& os) {
  os << "series,rank,count\n";
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.counts.size(); ++i) os << s.name << ',' << i + 1 << ',' << s.counts[i] << '\n';
}

struct SimOptions {
  ClusterSpec cluster;
  HashFn hash = HashFn::murmur3();
  std::uint32_t virtual_nodes = ChRing::kDefaultVirtualNodes;
  double bound_c = BoundedLoadPolicy::kDefaultC;
  std::uint64_t epsilon = 0;  // 0: ceil(num_jobs / num_servers)
  std::uint64_t seed = 7;
};

inline std::uint64_t sim_epsilon(const SimOptions& opt) {
  if (opt.epsilon) return opt.epsilon;
  const auto& c = opt.cluster;
  return (c.num_jobs + c.num_servers - 1) / c.num_servers;
}

/// Runs one balancer over `keys` in the simulated cluster.
inline SimTrace simulate_balancer(BalancerKind kind, std::span<const double> keys, const HierModel* model,
                                  const SimOptions& opt) {
  const auto& c = opt.cluster;
  switch (kind) {
    case BalancerKind::kCh: {
      const ChRing ring = make_ch_ring(opt.hash, c.num_servers, opt.virtual_nodes, ring_prefix(opt.seed, 0));
      return run_sim(c, keys, [&](std::uint64_t, double k) { return ch_assign(k, ring); });
    }
    case BalancerKind::kChbl: {
      const ChRing ring = make_ch_ring(opt.hash, c.num_servers, opt.virtual_nodes, ring_prefix(opt.seed, 0));
      BoundedLoadPolicy policy{opt.bound_c};
      policy.validate();
      LoadCounters counters;
      return run_sim(c, keys, [&](std::uint64_t, double k) { return chbl_assign(k, ring, policy, counters); });
    }
    case BalancerKind::kDlb: {
      if (!model) throw ValidationError("balancer dlb needs a trained model");
      ServerTable table = make_dlb_table(*model, c.num_servers, sim_epsilon(opt));
      return run_sim(c, keys, [&](std::uint64_t, double k) { return table.assign_with_bound(model->map_position(k)); });
    }
  }
  throw ValidationError("unknown balancer");
}

struct SimCompareRow {
  std::string distribution;
  std::string balancer;
  double makespan_s = 0.0;
  double mean_finish_s = 0.0;
  std::uint64_t max_jobs_per_server = 0;
  double dlb_reduction_pct = 0.0;  // (this - dlb) / this * 100
};

/// Percentage by which `candidate` shortens `baseline`'s makespan.
inline double reduction_pct(double baseline, double candidate) {
  return baseline > 0 ? (baseline - candidate) / baseline * 100.0 : 0.0;
}

inline void write_sim_compare_csv(const std::vector<SimCompareRow>& rows, std::ostream& os) {
  os << "distribution,balancer,makespan_s,mean_finish_s,max_jobs_per_server,dlb_reduction_pct\n";
  auto num = [](double v) { return nlohmann::json(v).dump(); };
  for (const auto& r : rows)
    os << r.distribution << ',' << r.balancer << ',' << num(r.makespan_s) << ',' << num(r.mean_finish_s) << ','
       << r.max_jobs_per_server << ',' << num(r.dlb_reduction_pct) << '\n';
}

}  // namespace dlb
