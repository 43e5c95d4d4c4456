#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abc/executor.hpp"
#include "abc/kernels.hpp"
#include "abc/model_graph.hpp"
#include "abc/summaries.hpp"

namespace abc {

/// Population Monte Carlo ABC settings.
///
/// `epsilon_percentile` is a fraction in (0, 1]; 0.1 selects the 10th
/// percentile of the previous generation's distances.
struct PmcabcConfig {
  std::size_t n_samples = 100;
  std::size_t generations = 1;
  std::vector<double> epsilon_schedule;
  double epsilon_percentile = 0.1;
  std::size_t max_attempts_per_particle = 100000;

  void validate() const;
};

/// Population Monte Carlo with an approximate likelihood.
struct PmcConfig {
  std::size_t n_samples = 100;
  std::size_t generations = 1;
  std::size_t n_sim_per_theta = 100;
  std::size_t max_attempts_per_particle = 1000;

  void validate(std::size_t statistics_dim) const;
};

struct Generation {
  /// Acceptance threshold used; absent for likelihood-based sampling.
  std::optional<double> epsilon;
  std::vector<ParameterVector> particles;
  std::vector<double> weights;
  std::vector<double> distances;
  CovarianceMatrix covariance;
  std::vector<TaskTrace> task_traces;
  std::vector<std::size_t> attempts;
};

struct Journal {
  std::string sampler;
  std::vector<std::string> parameter_names;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<Generation> generations;
};

/// Everything a sampler needs about the problem besides its own settings.
struct InferenceProblem {
  const ModelGraph& graph;
  const DataSet& observed;
};

/// Draws from the prior until the simulated distance is <= epsilon, once per
/// particle. Weights are uniform.
Journal rejection_abc(const InferenceProblem& problem, const Distance& distance, double epsilon,
                      std::size_t n_samples, const ExecutorSpec& executor, std::uint64_t seed,
                      std::size_t max_attempts_per_particle = 100000);

Journal pmcabc_sample(const InferenceProblem& problem, const Distance& distance,
                      const JointKernel& kernel, const PmcabcConfig& config,
                      const ExecutorSpec& executor, std::uint64_t seed);

Journal pmc_sample(const InferenceProblem& problem, const ApproxLikelihood& approx_lhd,
                   const JointKernel& kernel, const PmcConfig& config,
                   const ExecutorSpec& executor, std::uint64_t seed);

/// max(lower-interpolated q-quantile of prev_distances, scheduled).
double adapt_epsilon(std::span<const double> prev_distances, double q, double scheduled);

/// prior / sum_k w_k K(theta | particle_k). Throws NumericError when the
/// denominator vanishes while the prior does not.
double compute_pmcabc_weight(const ParameterVector& theta, double prior,
                             std::span<const ParameterVector> prev_particles,
                             std::span<const double> prev_weights, const PreparedKernel& kernel);

ParameterVector journal_posterior_mean(const Journal& journal, std::size_t generation);
CovarianceMatrix journal_posterior_cov(const Journal& journal, std::size_t generation);

/// Total simulation attempts recorded for one generation.
std::size_t total_attempts(const Generation& generation);

// Serialization. Field names are fixed so journals can be diffed across runs.
nlohmann::json journal_to_json(const Journal& journal, bool include_timing = true);
Journal journal_from_json(const nlohmann::json& doc);

}  // namespace abc
