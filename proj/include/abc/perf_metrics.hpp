#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "abc/executor.hpp"

namespace abc {

struct ScalingRecord {
  std::size_t n_cores = 1;
  double wall_time = 0.0;
  bool baseline = false;
};

/// t(baseline) / t(n).
double speedup(std::span<const ScalingRecord> records, std::size_t n);
/// speedup(n) * m / n, m being the baseline core count.
double efficiency(std::span<const ScalingRecord> records, std::size_t n);

struct WorkerLoad {
  std::size_t worker_id = 0;
  double busy_time = 0.0;
  std::size_t task_count = 0;
};

/// Per-worker load of one map call. The makespan is the largest per-worker
/// busy time; the imbalance ratio is makespan / mean busy time.
struct ImbalanceReport {
  std::vector<WorkerLoad> workers;
  double makespan = 0.0;
  double mean_busy = 0.0;
  double imbalance_ratio = 1.0;
  double idle_fraction = 0.0;
};

/// `n_workers` = 0 infers the worker count from the largest worker id.
/// Workers without tasks count as idle.
ImbalanceReport imbalance_report(std::span<const TaskTrace> traces, std::size_t n_workers = 0);

/// n_cores, wall_time_s, speedup, efficiency.
void write_scaling_csv(std::ostream& out, std::span<const ScalingRecord> records);
/// worker_id, busy_time_s, task_count.
void write_imbalance_csv(std::ostream& out, const ImbalanceReport& report);
nlohmann::json to_json(const ImbalanceReport& report);

}  // namespace abc
