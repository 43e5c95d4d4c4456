#include "abc/perf_metrics.hpp"

#include <algorithm>
#include <ostream>

#include "abc/error.hpp"

namespace abc {

namespace {

const ScalingRecord& baseline_of(std::span<const ScalingRecord> records) {
  const ScalingRecord* found = nullptr;
  for (const auto& r : records) {
    if (!r.baseline) continue;
    if (found) throw ConfigError("scaling study has more than one baseline");
    found = &r;
  }
  if (!found) throw ConfigError("scaling study has no baseline record");
  if (!(found->wall_time > 0.0)) throw ConfigError("baseline wall time must be positive");
  return *found;
}

const ScalingRecord& record_for(std::span<const ScalingRecord> records, std::size_t n) {
  for (const auto& r : records)
    if (r.n_cores == n) {
      if (!(r.wall_time > 0.0)) throw ConfigError("wall time must be positive");
      return r;
    }
  throw ConfigError("no scaling record for " + std::to_string(n) + " cores");
}

}  // namespace

double speedup(std::span<const ScalingRecord> records, std::size_t n) {
  return baseline_of(records).wall_time / record_for(records, n).wall_time;
}

double efficiency(std::span<const ScalingRecord> records, std::size_t n) {
  const auto& base = baseline_of(records);
  return speedup(records, n) * static_cast<double>(base.n_cores) / static_cast<double>(n);
}

ImbalanceReport imbalance_report(std::span<const TaskTrace> traces, std::size_t n_workers) {
  if (traces.empty()) throw ConfigError("imbalance report needs at least one task trace");
  std::size_t workers = n_workers;
  for (const auto& t : traces) workers = std::max(workers, t.worker_id + 1);

  ImbalanceReport r;
  r.workers.resize(workers);
  for (std::size_t w = 0; w < workers; ++w) r.workers[w].worker_id = w;
  for (const auto& t : traces) {
    r.workers[t.worker_id].busy_time += t.duration;
    ++r.workers[t.worker_id].task_count;
  }
  double total = 0.0;
  for (const auto& w : r.workers) {
    total += w.busy_time;
    r.makespan = std::max(r.makespan, w.busy_time);
  }
  r.mean_busy = total / static_cast<double>(workers);
  if (r.makespan > 0.0) {
    r.imbalance_ratio = r.makespan / r.mean_busy;
    r.idle_fraction = 1.0 - r.mean_busy / r.makespan;
  }
  return r;
}

void write_scaling_csv(std::ostream& out, std::span<const ScalingRecord> records) {
  out << "n_cores,wall_time_s,speedup,efficiency\n";
  const auto old = out.precision(17);
  for (const auto& r : records)
    out << r.n_cores << ',' << r.wall_time << ',' << speedup(records, r.n_cores) << ','
        << efficiency(records, r.n_cores) << '\n';
  out.precision(old);
}

void write_imbalance_csv(std::ostream& out, const ImbalanceReport& report) {
  out << "worker_id,busy_time_s,task_count\n";
  const auto old = out.precision(17);
  for (const auto& w : report.workers)
    out << w.worker_id << ',' << w.busy_time << ',' << w.task_count << '\n';
  out.precision(old);
}

nlohmann::json to_json(const ImbalanceReport& report) {
  nlohmann::json workers = nlohmann::json::array();
  for (const auto& w : report.workers)
    workers.push_back({{"worker_id", w.worker_id},
                       {"busy_time_s", w.busy_time},
                       {"task_count", w.task_count}});
  return {{"makespan_s", report.makespan},
          {"mean_busy_s", report.mean_busy},
          {"imbalance_ratio", report.imbalance_ratio},
          {"idle_fraction", report.idle_fraction},
          {"workers", std::move(workers)}};
}

}  // namespace abc
