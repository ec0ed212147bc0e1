#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dlb/errors.hpp"

namespace dlb {

using ServerId = std::uint32_t;

/// A slot on the discrete hash circle [0, T).
struct RingPosition {
  std::uint64_t value = 0;

  constexpr auto operator<=>(const RingPosition&) const = default;
};

struct RingConfig {
  static constexpr std::uint64_t kDefaultSize = std::uint64_t{1} << 32;

  std::uint64_t size = kDefaultSize;

  void validate() const {
    if (size < 2) throw ValidationError("ring size must be >= 2");
  }

  RingPosition wrap(std::uint64_t v) const { return {v % size}; }
};

/// A contiguous clockwise run of positions starting at `start`.
struct Arc {
  RingPosition start;
  std::uint64_t length = 0;

  bool operator==(const Arc&) const = default;
};

/// Smallest server position >= pos, wrapping to the first server when pos
/// lies beyond the last one. `servers` must be sorted ascending.
inline RingPosition clockwise_successor(RingPosition pos,
                                        std::span<const RingPosition> servers) {
  if (servers.empty()) throw NoServers("clockwise_successor: no servers on ring");
  auto it = std::lower_bound(servers.begin(), servers.end(), pos);
  return it == servers.end() ? servers.front() : *it;
}

/// Index variant of clockwise_successor, for callers that keep parallel
/// owner arrays.
inline std::size_t clockwise_successor_index(RingPosition pos,
                                             std::span<const RingPosition> servers) {
  if (servers.empty()) throw NoServers("clockwise_successor: no servers on ring");
  auto it = std::lower_bound(servers.begin(), servers.end(), pos);
  return it == servers.end() ? 0 : static_cast<std::size_t>(it - servers.begin());
}

/// One arc per server, running from that server to the next one clockwise.
/// Lengths sum to ring.size.
inline std::vector<Arc> arcs_between(std::span<const RingPosition> servers,
                                     const RingConfig& ring) {
  if (servers.empty()) throw NoServers("arcs_between: no servers on ring");
  std::vector<Arc> arcs;
  arcs.reserve(servers.size());
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (servers[i].value >= ring.size)
      throw ValidationError("arcs_between: server position outside ring");
    if (i > 0 && servers[i] <= servers[i - 1]) {
      if (servers[i] == servers[i - 1])
        throw DuplicateServer("arcs_between: duplicate server position " +
                              std::to_string(servers[i].value));
      throw ValidationError("arcs_between: server positions not sorted");
    }
  }
  for (std::size_t i = 0; i < servers.size(); ++i) {
    const auto here = servers[i].value;
    const auto next = servers[(i + 1) % servers.size()].value;
    // single server: next == here and the arc is the whole ring
    const std::uint64_t len = next > here ? next - here : ring.size - here + next;
    arcs.push_back({servers[i], len});
  }
  return arcs;
}

}  // namespace dlb
