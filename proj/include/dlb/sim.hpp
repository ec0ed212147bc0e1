#pragma once

// Discrete-event model of a batch of fixed-length CPU jobs on a cluster of
// servers with a bounded number of execution slots each.
//
// All jobs are submitted at t = 0 and placed by a balancer. Each server runs
// up to `slots_per_server` jobs at once and starts queued jobs FIFO as slots
// free up. Completion events are processed in (time, server, job) order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlb/errors.hpp"
#include "dlb/ring.hpp"

namespace dlb {

struct ClusterSpec {
  std::uint32_t num_servers = 64;
  std::uint32_t slots_per_server = 4;
  double job_duration_s = 20.0;
  std::uint64_t num_jobs = 8192;

  void validate() const {
    if (num_servers == 0 || slots_per_server == 0 || num_jobs == 0)
      throw ValidationError("cluster spec values must be positive");
    if (!(job_duration_s > 0.0) || !std::isfinite(job_duration_s))
      throw ValidationError("job duration must be positive");
  }

  /// ceil(jobs / (servers * slots)) * duration: makespan of a perfectly even split.
  double makespan_lower_bound() const {
    const std::uint64_t capacity = std::uint64_t{num_servers} * slots_per_server;
    return static_cast<double>((num_jobs + capacity - 1) / capacity) * job_duration_s;
  }
};

struct JobRecord {
  std::uint64_t job_id = 0;
  double key = 0.0;
  ServerId server = 0;
  double start_s = 0.0;
  double finish_s = 0.0;
};

struct SimTrace {
  std::vector<JobRecord> jobs;  // indexed by job id
  double makespan_s = 0.0;
};

/// `assign(job_id, key)` returns a server index in [0, num_servers).
using JobAssigner = std::function<ServerId(std::uint64_t job_id, double key)>;

inline SimTrace run_sim(const ClusterSpec& spec, std::span<const double> keys, const JobAssigner& assign) {
  spec.validate();
  if (keys.size() != spec.num_jobs)
    throw ValidationError("simulation needs exactly " + std::to_string(spec.num_jobs) + " keys, got " +
                          std::to_string(keys.size()));
  SimTrace trace;
  trace.jobs.resize(keys.size());
  std::vector<std::queue<std::uint64_t>> waiting(spec.num_servers);
  for (std::uint64_t j = 0; j < keys.size(); ++j) {
    const ServerId s = assign(j, keys[j]);
    if (s >= spec.num_servers)
      throw ValidationError("balancer returned server " + std::to_string(s) + " outside the cluster");
    trace.jobs[j] = {j, keys[j], s, 0.0, 0.0};
    waiting[s].push(j);
  }

  using Event = std::tuple<double, ServerId, std::uint64_t>;  // completion time, server, job
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  auto start = [&](ServerId s, double now) {
    const std::uint64_t j = waiting[s].front();
    waiting[s].pop();
    trace.jobs[j].start_s = now;
    trace.jobs[j].finish_s = now + spec.job_duration_s;
    events.emplace(trace.jobs[j].finish_s, s, j);
  };
  for (ServerId s = 0; s < spec.num_servers; ++s)
    for (std::uint32_t slot = 0; slot < spec.slots_per_server && !waiting[s].empty(); ++slot) start(s, 0.0);

  while (!events.empty()) {
    const auto [time, server, job] = events.top();
    events.pop();
    trace.makespan_s = std::max(trace.makespan_s, time);
    if (!waiting[server].empty()) start(server, time);
  }
  return trace;
}

struct SimSummary {
  double makespan_s = 0.0;
  double mean_finish_s = 0.0;
  std::vector<std::uint64_t> jobs_per_server;
};

inline SimSummary summarize(const SimTrace& trace, std::uint32_t num_servers) {
  SimSummary s;
  s.makespan_s = trace.makespan_s;
  s.jobs_per_server.assign(num_servers, 0);
  double total = 0.0;
  for (const auto& j : trace.jobs) {
    total += j.finish_s;
    if (j.server < num_servers) ++s.jobs_per_server[j.server];
  }
  s.mean_finish_s = trace.jobs.empty() ? 0.0 : total / static_cast<double>(trace.jobs.size());
  return s;
}

/// job_id,server,start_s,finish_s sorted by job id.
inline void write_trace_csv(const SimTrace& trace, std::ostream& os) {
  os << "job_id,server,start_s,finish_s\n";
  for (const auto& j : trace.jobs)
    os << j.job_id << ',' << j.server << ',' << nlohmann::json(j.start_s).dump() << ','
       << nlohmann::json(j.finish_s).dump() << '\n';
}

/// Largest number of jobs running at once on any server, from the trace.
inline std::uint32_t peak_occupancy(const SimTrace& trace, std::uint32_t num_servers) {
  std::vector<std::vector<std::pair<double, int>>> edges(num_servers);
  for (const auto& j : trace.jobs) {
    edges[j.server].emplace_back(j.start_s, +1);
    edges[j.server].emplace_back(j.finish_s, -1);
  }
  std::uint32_t peak = 0;
  for (auto& e : edges) {
    // a job finishing at t frees its slot before one starting at t
    std::sort(e.begin(), e.end());
    int live = 0;
    for (const auto& [_, d] : e) {
      live += d;
      peak = std::max<std::uint32_t>(peak, static_cast<std::uint32_t>(std::max(live, 0)));
    }
  }
  return peak;
}

/// True when no server ever leaves a slot idle while it still has queued
/// jobs: every job that starts after t = 0 starts at the instant another job
/// on the same server finishes, with all other slots busy.
inline bool work_conserving(const SimTrace& trace, const ClusterSpec& spec) {
  std::vector<std::vector<const JobRecord*>> per_server(spec.num_servers);
  for (const auto& j : trace.jobs) per_server[j.server].push_back(&j);
  for (auto& jobs : per_server) {
    for (const JobRecord* j : jobs) {
      if (j->start_s == 0.0) continue;
      std::uint32_t busy_before = 0;
      bool freed_now = false;
      for (const JobRecord* o : jobs) {
        if (o->start_s < j->start_s && o->finish_s >= j->start_s) ++busy_before;
        if (o->finish_s == j->start_s) freed_now = true;
      }
      if (!freed_now || busy_before < spec.slots_per_server) return false;
    }
    // while a server had jobs waiting at t = 0 it must have filled every slot
    std::uint32_t at_zero = 0;
    for (const JobRecord* j : jobs) at_zero += j->start_s == 0.0;
    if (at_zero < std::min<std::size_t>(jobs.size(), spec.slots_per_server)) return false;
  }
  return true;
}

}  // namespace dlb
