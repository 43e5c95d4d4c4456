#include "abc/executor.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <queue>
#include <thread>

#include "abc/error.hpp"

namespace abc {

std::string mode_name(ExecutionMode mode) {
  switch (mode) {
    case ExecutionMode::Sequential: return "sequential";
    case ExecutionMode::StaticChunked: return "static";
    case ExecutionMode::DynamicGreedy: return "dynamic";
  }
  return "unknown";
}

std::optional<ExecutionMode> parse_mode(std::string_view name) {
  if (name == "sequential") return ExecutionMode::Sequential;
  if (name == "static") return ExecutionMode::StaticChunked;
  if (name == "dynamic") return ExecutionMode::DynamicGreedy;
  return std::nullopt;
}

std::vector<IndexRange> static_assign(std::size_t m, std::size_t n) {
  if (n == 0) throw ConfigError("static_assign needs at least one worker");
  std::vector<IndexRange> out;
  out.reserve(n);
  const std::size_t base = m / n;
  const std::size_t extra = m % n;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t size = base + (w < extra ? 1 : 0);
    out.push_back({begin, begin + size});
    begin += size;
  }
  return out;
}

namespace detail {

void run_lanes(std::size_t m, const ExecutorSpec& spec,
               const std::function<void(std::size_t, std::size_t)>& run_one) {
  const std::size_t lanes = spec.lanes();
  if (lanes == 0) throw ConfigError("executor needs at least one worker");

  if (lanes == 1) {
    for (std::size_t i = 0; i < m; ++i) run_one(i, 0);
    return;
  }

  std::vector<std::jthread> workers;
  workers.reserve(lanes);
  if (spec.mode == ExecutionMode::StaticChunked) {
    const auto ranges = static_assign(m, lanes);
    for (std::size_t w = 0; w < lanes; ++w) {
      workers.emplace_back([&run_one, range = ranges[w], w] {
        for (std::size_t i = range.begin; i < range.end; ++i) run_one(i, w);
      });
    }
  } else {
    // Each lane pulls the next unassigned index as soon as it is idle.
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < lanes; ++w) {
      workers.emplace_back([&run_one, &next, m, w] {
        for (std::size_t i = next.fetch_add(1); i < m; i = next.fetch_add(1)) run_one(i, w);
      });
    }
    workers.clear();
  }
}

}  // namespace detail

ScheduleResult simulate_schedule(const ScheduleInstance& instance, SchedulePolicy policy) {
  const auto& d = instance.durations;
  const std::size_t n = instance.n_workers;
  if (n == 0) throw ConfigError("schedule needs at least one worker");
  for (double x : d)
    if (!std::isfinite(x) || x < 0.0) throw ConfigError("task durations must be finite and >= 0");

  ScheduleResult r;
  r.busy.assign(n, 0.0);
  r.assignment.assign(d.size(), 0);
  r.traces.resize(d.size());

  if (policy == SchedulePolicy::Static) {
    const auto ranges = static_assign(d.size(), n);
    for (std::size_t w = 0; w < n; ++w) {
      for (std::size_t i = ranges[w].begin; i < ranges[w].end; ++i) {
        r.assignment[i] = w;
        r.traces[i] = TaskTrace{i, w, r.busy[w], d[i], 1};
        r.busy[w] += d[i];
      }
    }
  } else {
    using Event = std::pair<double, std::size_t>;  // (idle time, worker)
    std::priority_queue<Event, std::vector<Event>, std::greater<>> idle;
    for (std::size_t w = 0; w < n; ++w) idle.push({0.0, w});
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto [t, w] = idle.top();
      idle.pop();
      r.assignment[i] = w;
      r.traces[i] = TaskTrace{i, w, t, d[i], 1};
      r.busy[w] += d[i];
      idle.push({t + d[i], w});
    }
  }
  for (double b : r.busy) r.makespan = std::max(r.makespan, b);
  return r;
}

void write_traces_csv(std::ostream& out, std::span<const TaskTrace> traces) {
  out << "task_index,worker_id,start_offset_s,duration_s,attempts\n";
  const auto old = out.precision(17);
  for (const auto& t : traces) {
    out << t.task_index << ',' << t.worker_id << ',' << t.start_offset << ',' << t.duration << ','
        << t.n_simulation_attempts << '\n';
  }
  out.precision(old);
}

}  // namespace abc
