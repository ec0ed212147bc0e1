#pragma once

// Deterministic server placement for the learned balancer.
//
// Servers are not hashed: the first one sits at position 0 and each later
// one bisects the longest free arc (floor midpoint, ties to the smallest
// arc start). Keys go to the first server clockwise whose load is below the
// threshold epsilon.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dlb/errors.hpp"
#include "dlb/metrics.hpp"
#include "dlb/ring.hpp"

namespace dlb {

struct MigrationRecord {
  std::uint64_t key_id = 0;
  ServerId from = 0;
  ServerId to = 0;

  bool operator==(const MigrationRecord&) const = default;
};

/// One placed key, as tracked by the caller.
struct Assignment {
  std::uint64_t key_id = 0;
  RingPosition position;
  ServerId server = 0;
};

struct LoadReport {
  std::vector<std::pair<ServerId, std::uint64_t>> loads;  // ascending server id
  double std = 0.0;
};

/// ceil(1.25 * m / n), the default threshold for a standalone balancing run.
inline std::uint64_t default_epsilon(std::uint64_t keys, std::uint64_t servers, double factor = 1.25) {
  if (servers == 0) return 0;
  return static_cast<std::uint64_t>(
      std::ceil(factor * static_cast<double>(keys) / static_cast<double>(servers)));
}

class ServerTable {
 public:
  explicit ServerTable(RingConfig ring, std::uint64_t epsilon) : ring_(ring), epsilon_(epsilon) {
    ring_.validate();
    if (epsilon_ == 0) throw ValidationError("load threshold epsilon must be positive");
  }

  const RingConfig& ring() const { return ring_; }
  std::uint64_t epsilon() const { return epsilon_; }
  std::size_t server_count() const { return by_position_.size(); }
  bool contains(ServerId id) const { return by_id_.count(id) != 0; }

  void set_epsilon(std::uint64_t eps) {
    if (eps == 0) throw ValidationError("load threshold epsilon must be positive");
    epsilon_ = eps;
  }

  std::uint64_t load(ServerId id) const {
    auto it = loads_.find(id);
    return it == loads_.end() ? 0 : it->second;
  }
  std::uint64_t total_load() const { return total_; }

  RingPosition position_of(ServerId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw UnknownServer("server " + std::to_string(id) + " not in table");
    return {it->second};
  }

  std::vector<RingPosition> placements() const {
    std::vector<RingPosition> out;
    for (const auto& [pos, _] : by_position_) out.push_back({pos});
    return out;
  }

  /// Places a new server by bisecting the longest arc.
  RingPosition add_server(ServerId id) {
    if (contains(id)) throw DuplicateServer("server " + std::to_string(id) + " already present");
    RingPosition pos{0};
    if (!by_position_.empty()) {
      const auto points = placements();
      const auto arcs = arcs_between(points, ring_);
      const Arc* best = &arcs.front();
      // arcs are in ascending start order, so strict > keeps the smallest start on ties
      for (const auto& a : arcs)
        if (a.length > best->length) best = &a;
      if (best->length < 2) throw CapacityExhausted("ring has no free position left to bisect");
      pos = ring_.wrap(best->start.value + best->length / 2);
    }
    insert(id, pos);
    return pos;
  }

  /// Places a server at an explicit position (topology replay, tests).
  void add_server_at(ServerId id, RingPosition pos) {
    if (contains(id)) throw DuplicateServer("server " + std::to_string(id) + " already present");
    if (pos.value >= ring_.size) throw ValidationError("server position outside ring");
    if (by_position_.count(pos.value))
      throw DuplicateServer("position " + std::to_string(pos.value) + " already occupied");
    insert(id, pos);
  }

  /// Unbounded owner of a ring position: its clockwise successor.
  ServerId successor(RingPosition pos) const {
    if (by_position_.empty()) throw NoServers("server table is empty");
    auto it = by_position_.lower_bound(pos.value);
    if (it == by_position_.end()) it = by_position_.begin();
    return it->second;
  }

  /// Clockwise walk from pos to the first server with load < epsilon.
  ServerId assign_with_bound(RingPosition pos) {
    if (by_position_.empty()) throw NoServers("server table is empty");
    auto it = by_position_.lower_bound(pos.value % ring_.size);
    return take_first_open(it);
  }

  /// Removes a server and moves its keys, walking clockwise from the removed
  /// server's successor and skipping servers at epsilon. `assignments` is
  /// updated in place; migrations are reported in assignment order.
  std::vector<MigrationRecord> remove_server(ServerId id, std::vector<Assignment>& assignments) {
    auto idit = by_id_.find(id);
    if (idit == by_id_.end()) throw UnknownServer("server " + std::to_string(id) + " not in table");
    if (by_position_.size() < 2) throw CannotRemoveLast("cannot remove the last server");

    const std::uint64_t pos = idit->second;
    const std::uint64_t moved = load(id);
    if (total_ > (by_position_.size() - 1) * epsilon_)
      throw CapacityExhausted("remaining servers cannot absorb the removed server's keys");
    by_position_.erase(pos);
    by_id_.erase(idit);
    total_ -= moved;
    loads_.erase(id);

    std::vector<MigrationRecord> migrations;
    for (auto& a : assignments) {
      if (a.server != id) continue;
      auto it = by_position_.lower_bound(pos);
      const ServerId to = take_first_open(it);
      migrations.push_back({a.key_id, id, to});
      a.server = to;
    }
    return migrations;
  }

  LoadReport load_report() const {
    LoadReport r;
    std::vector<std::uint64_t> values;
    for (const auto& [id, _] : by_id_) {
      r.loads.emplace_back(id, load(id));
      values.push_back(load(id));
    }
    r.std = values.empty() ? 0.0 : std_metric(values);
    return r;
  }

  /// Clears every load counter, keeping the topology.
  void reset_loads() {
    for (auto& [_, l] : loads_) l = 0;
    total_ = 0;
  }

 private:
  void insert(ServerId id, RingPosition pos) {
    by_position_.emplace(pos.value, id);
    by_id_.emplace(id, pos.value);
    loads_.emplace(id, 0);
  }

  ServerId take_first_open(std::map<std::uint64_t, ServerId>::const_iterator it) {
    for (std::size_t step = 0; step < by_position_.size(); ++step) {
      if (it == by_position_.end()) it = by_position_.begin();
      const ServerId id = it->second;
      auto& l = loads_[id];
      if (l < epsilon_) {
        ++l;
        ++total_;
        return id;
      }
      ++it;
    }
    throw CapacityExhausted("every server is at the load threshold " + std::to_string(epsilon_));
  }

  RingConfig ring_;
  std::uint64_t epsilon_;
  std::map<std::uint64_t, ServerId> by_position_;
  std::map<ServerId, std::uint64_t> by_id_;
  std::map<ServerId, std::uint64_t> loads_;
  std::uint64_t total_ = 0;
};

}  // namespace dlb
