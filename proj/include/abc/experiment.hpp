#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abc/executor.hpp"
#include "abc/kernels.hpp"
#include "abc/model_graph.hpp"
#include "abc/perf_metrics.hpp"
#include "abc/samplers.hpp"
#include "abc/summaries.hpp"

namespace abc {

enum class SamplerKind { Rejection, Pmcabc, Pmc };

/// A validated experiment: model, observed data, discrepancy or approximate
/// likelihood, kernel, sampler settings and executor.
struct ExperimentConfig {
  nlohmann::json raw;
  std::shared_ptr<const ModelGraph> graph;
  DataSet observed;
  std::optional<Distance> distance;
  std::shared_ptr<const ApproxLikelihood> approx_likelihood;
  std::optional<JointKernel> kernel;
  SamplerKind sampler = SamplerKind::Pmcabc;
  PmcabcConfig pmcabc;
  PmcConfig pmc;
  double rejection_epsilon = 0.0;
  std::size_t rejection_samples = 0;
  ExecutorSpec executor;
  std::uint64_t seed = 0;
  std::string output;
};

SimulatorRegistry builtin_simulators();
std::vector<std::string> builtin_model_names();

/// Statistics by name: "identity", "hakkarainen-lorenz", "mean".
StatisticsSpec statistics_by_name(const std::string& name);

/// Parses and validates; relative data paths resolve against `base_dir`.
/// Throws ConfigError on any schema or consistency violation.
ExperimentConfig load_experiment(const nlohmann::json& config,
                                 const std::filesystem::path& base_dir = ".");
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Runs the configured sampler. The journal's config carries the experiment
/// echo under "experiment".
Journal run_experiment(const ExperimentConfig& config);

/// Journal with timing fields stripped, for cross-run comparison.
std::string journal_numeric_fingerprint(const Journal& journal);

struct BenchResult {
  std::vector<ScalingRecord> records;
  bool journals_identical = true;
};

/// Runs the same experiment once per worker count (first count is the
/// baseline) and records wall times.
BenchResult bench_experiment(const nlohmann::json& config, const std::filesystem::path& base_dir,
                             const std::vector<std::size_t>& worker_counts, ExecutionMode mode);

/// Independent lognormal(0, sigma) task durations.
std::vector<double> lognormal_durations(std::size_t n, double sigma, std::uint64_t seed);

}  // namespace abc
