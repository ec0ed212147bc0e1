#pragma once

// Classical hash-ring balancers: consistent hashing (CH) with virtual nodes,
// and consistent hashing with bounded loads (CHBL).

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dlb/errors.hpp"
#include "dlb/hash.hpp"
#include "dlb/ring.hpp"

namespace dlb {

class ChRing {
 public:
  static constexpr std::uint32_t kDefaultVirtualNodes = 100;

  explicit ChRing(HashFn hash, std::uint32_t virtual_nodes = kDefaultVirtualNodes,
                  std::uint64_t ring_size = RingConfig::kDefaultSize,
                  std::string name_prefix = "server-")
      : hash_(hash),
        vnodes_(virtual_nodes),
        ring_{ring_size},
        prefix_(std::move(name_prefix)) {
    ring_.validate();
    if (vnodes_ == 0) throw ValidationError("virtual node count must be positive");
  }

  void add_server(ServerId id) {
    if (servers_.count(id)) throw DuplicateServer("server " + std::to_string(id) + " already on ring");
    const std::string name = prefix_ + std::to_string(id);
    std::vector<std::uint64_t>& mine = servers_[id];
    for (std::uint32_t r = 0; r < vnodes_; ++r) {
      std::string label = name + "#" + std::to_string(r);
      auto pos = hash_to_ring(label, hash_, ring_.size).value;
      for (std::uint32_t retry = 1; points_.count(pos); ++retry) {
        pos = hash_to_ring(label + "#" + std::to_string(retry), hash_, ring_.size).value;
      }
      points_.emplace(pos, id);
      mine.push_back(pos);
    }
    rebuild();
  }

  void remove_server(ServerId id) {
    auto it = servers_.find(id);
    if (it == servers_.end()) throw UnknownServer("server " + std::to_string(id) + " not on ring");
    for (auto pos : it->second) points_.erase(pos);
    servers_.erase(it);
    rebuild();
  }

  std::size_t server_count() const { return servers_.size(); }
  std::uint32_t virtual_nodes() const { return vnodes_; }
  const HashFn& hash() const { return hash_; }
  const RingConfig& ring() const { return ring_; }

  std::vector<ServerId> server_ids() const {
    std::vector<ServerId> ids;
    for (const auto& [id, _] : servers_) ids.push_back(id);
    return ids;
  }

  // Sorted virtual points and their owners (parallel arrays).
  std::span<const RingPosition> points() const { return positions_; }
  std::span<const ServerId> owners() const { return owners_; }

  RingPosition key_position(std::string_view key) const {
    return hash_to_ring(key, hash_, ring_.size);
  }
  RingPosition key_position(double key) const { return key_position(key_to_string(key)); }

  std::size_t successor_index(RingPosition pos) const {
    return clockwise_successor_index(pos, positions_);
  }

 private:
  void rebuild() {
    positions_.clear();
    owners_.clear();
    positions_.reserve(points_.size());
    owners_.reserve(points_.size());
    for (const auto& [pos, id] : points_) {
      positions_.push_back({pos});
      owners_.push_back(id);
    }
  }

  HashFn hash_;
  std::uint32_t vnodes_;
  RingConfig ring_;
  std::string prefix_;
  std::map<std::uint64_t, ServerId> points_;
  std::map<ServerId, std::vector<std::uint64_t>> servers_;
  std::vector<RingPosition> positions_;
  std::vector<ServerId> owners_;
};

template <typename Key>
ServerId ch_assign(const Key& key, const ChRing& ring) {
  if (ring.server_count() == 0) throw NoServers("ch_assign: ring has no servers");
  return ring.owners()[ring.successor_index(ring.key_position(key))];
}

struct BoundedLoadPolicy {
  static constexpr double kDefaultC = 1.25;

  double c = kDefaultC;

  void validate() const {
    if (!(c > 1.0) || !std::isfinite(c)) throw ValidationError("bounded-load factor c must be > 1");
  }

  // ceil(c * m / n)
  std::uint64_t capacity(std::uint64_t m, std::uint64_t n) const {
    if (n == 0) return 0;
    return static_cast<std::uint64_t>(std::ceil(c * static_cast<double>(m) / static_cast<double>(n)));
  }
};

/// Per-server assignment counters (not live occupancy).
struct LoadCounters {
  std::map<ServerId, std::uint64_t> loads;
  std::uint64_t total = 0;

  std::uint64_t load(ServerId id) const {
    auto it = loads.find(id);
    return it == loads.end() ? 0 : it->second;
  }
  void add(ServerId id) {
    ++loads[id];
    ++total;
  }
  std::uint64_t max_load() const {
    std::uint64_t m = 0;
    for (const auto& [_, l] : loads) m = std::max(m, l);
    return m;
  }
};

/// CHBL: the cap is evaluated against the running total including the key
/// being placed, so every prefix of an assignment sequence respects
/// ceil(c * m / n).
template <typename Key>
ServerId chbl_assign(const Key& key, const ChRing& ring, const BoundedLoadPolicy& policy,
                     LoadCounters& counters) {
  if (ring.server_count() == 0) throw NoServers("chbl_assign: ring has no servers");
  const std::uint64_t cap = policy.capacity(counters.total + 1, ring.server_count());
  const auto owners = ring.owners();
  std::size_t idx = ring.successor_index(ring.key_position(key));
  for (std::size_t step = 0; step < owners.size(); ++step) {
    const ServerId id = owners[idx];
    if (counters.load(id) < cap) {
      counters.add(id);
      return id;
    }
    idx = (idx + 1) % owners.size();
  }
  throw CapacityExhausted("chbl_assign: every server is at capacity " + std::to_string(cap));
}

}  // namespace dlb
