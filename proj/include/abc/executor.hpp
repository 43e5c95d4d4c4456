#pragma once

#include <chrono>
#include <cstddef>
#include <exception>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace abc {

enum class ExecutionMode { Sequential, StaticChunked, DynamicGreedy };

std::string mode_name(ExecutionMode mode);
std::optional<ExecutionMode> parse_mode(std::string_view name);

/// Which map backend to use and how many lanes it runs on.
struct ExecutorSpec {
  ExecutionMode mode = ExecutionMode::Sequential;
  std::size_t n_workers = 1;

  static ExecutorSpec sequential() { return {ExecutionMode::Sequential, 1}; }
  static ExecutorSpec static_chunked(std::size_t n) { return {ExecutionMode::StaticChunked, n}; }
  static ExecutorSpec dynamic_greedy(std::size_t n) { return {ExecutionMode::DynamicGreedy, n}; }

  /// Sequential is normalised to one lane.
  std::size_t lanes() const { return mode == ExecutionMode::Sequential ? 1 : n_workers; }
};

struct TaskTrace {
  std::size_t task_index = 0;
  std::size_t worker_id = 0;
  /// Seconds since the start of the map call.
  double start_offset = 0.0;
  double duration = 0.0;
  std::size_t n_simulation_attempts = 1;
};

/// Handed to every task; the task may report how many simulations it ran.
struct TaskContext {
  std::size_t task_index = 0;
  std::size_t worker_id = 0;
  std::size_t attempts = 1;
};

template <class T>
struct TaskOutcome {
  std::optional<T> value;
  std::string error;
  TaskTrace trace;

  bool ok() const { return value.has_value(); }
};

template <class T>
struct MapResult {
  /// Indexed by task_index, whatever order tasks completed in.
  std::vector<TaskOutcome<T>> outcomes;

  std::vector<TaskTrace> traces() const {
    std::vector<TaskTrace> out;
    out.reserve(outcomes.size());
    for (const auto& o : outcomes) out.push_back(o.trace);
    return out;
  }
  std::optional<std::size_t> first_error() const {
    for (std::size_t i = 0; i < outcomes.size(); ++i)
      if (!outcomes[i].ok()) return i;
    return std::nullopt;
  }
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

/// Contiguous count-balanced chunks; sizes differ by at most one and the
/// earlier workers get the larger ones.
std::vector<IndexRange> static_assign(std::size_t m, std::size_t n);

namespace detail {
/// Runs `run_one(task_index, worker_id)` for every index in [0, m) using the
/// lanes and allocation policy of `spec`. Blocks until all tasks finish.
void run_lanes(std::size_t m, const ExecutorSpec& spec,
               const std::function<void(std::size_t, std::size_t)>& run_one);
}  // namespace detail

/// Applies `fn(input, ctx)` to every input and collects the results.
/// Exceptions thrown by a task are stored in its outcome and never abort
/// the other tasks.
template <class In, class Fn>
auto map_collect(std::span<const In> inputs, Fn&& fn, const ExecutorSpec& spec)
    -> MapResult<std::decay_t<std::invoke_result_t<Fn&, const In&, TaskContext&>>> {
  using Out = std::decay_t<std::invoke_result_t<Fn&, const In&, TaskContext&>>;
  using Clock = std::chrono::steady_clock;
  MapResult<Out> result;
  result.outcomes.resize(inputs.size());
  const auto t0 = Clock::now();
  detail::run_lanes(inputs.size(), spec, [&](std::size_t index, std::size_t worker) {
    auto& outcome = result.outcomes[index];
    TaskContext ctx{index, worker, 1};
    const auto start = Clock::now();
    try {
      outcome.value.emplace(fn(inputs[index], ctx));
    } catch (const std::exception& e) {
      outcome.error = e.what();
    } catch (...) {
      outcome.error = "unknown task failure";
    }
    const auto stop = Clock::now();
    outcome.trace = TaskTrace{index, worker, std::chrono::duration<double>(start - t0).count(),
                              std::chrono::duration<double>(stop - start).count(), ctx.attempts};
  });
  return result;
}

template <class In, class Fn>
auto map_collect(const std::vector<In>& inputs, Fn&& fn, const ExecutorSpec& spec) {
  return map_collect(std::span<const In>(inputs), std::forward<Fn>(fn), spec);
}

enum class SchedulePolicy { Static, DynamicGreedy };

struct ScheduleInstance {
  std::vector<double> durations;
  std::size_t n_workers = 1;
};

struct ScheduleResult {
  double makespan = 0.0;
  std::vector<double> busy;
  /// Worker of each task.
  std::vector<std::size_t> assignment;
  std::vector<TaskTrace> traces;
};

/// Discrete-event replay of a task list under a policy; nothing is executed.
/// Under DynamicGreedy each idle worker takes the next task in index order,
/// with ties between simultaneously idle workers going to the lowest id.
ScheduleResult simulate_schedule(const ScheduleInstance& instance, SchedulePolicy policy);

/// CSV columns: task_index, worker_id, start_offset_s, duration_s, attempts.
void write_traces_csv(std::ostream& out, std::span<const TaskTrace> traces);

}  // namespace abc
