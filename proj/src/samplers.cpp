#include "abc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "abc/error.hpp"
#include "abc/rng.hpp"

namespace abc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Proposal {
  ParameterVector theta;
  double distance = 0.0;
  double log_likelihood = 0.0;
  bool in_support = true;
};

std::vector<std::size_t> task_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

template <class T>
std::vector<T> collect_or_throw(MapResult<T>& result, const char* phase) {
  if (auto bad = result.first_error()) {
    throw SamplerError(std::string(phase) + ": task " + std::to_string(*bad) + " failed: " +
                       result.outcomes[*bad].error);
  }
  std::vector<T> out;
  out.reserve(result.outcomes.size());
  for (auto& o : result.outcomes) out.push_back(std::move(*o.value));
  return out;
}

/// Categorical draw over the previous generation's weights.
class Resampler {
 public:
  explicit Resampler(std::span<const double> weights) : cumulative_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cumulative_.begin());
  }
  std::size_t draw(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative_.back());
    const double x = u(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

std::vector<double> normalize_or_throw(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    throw SamplerError("all particle weights are zero; the posterior has degenerated");
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_w) {
  const double m = *std::max_element(log_w.begin(), log_w.end());
  if (m == -kInf || std::isnan(m))
    throw SamplerError("all particle weights are zero; the posterior has degenerated");
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - m);
  return normalize_or_throw(std::move(w));
}

void finish_generation(Generation& gen, const MapResult<Proposal>& sims) {
  gen.task_traces = sims.traces();
  gen.attempts.clear();
  for (const auto& t : gen.task_traces) gen.attempts.push_back(t.n_simulation_attempts);
  gen.covariance = 2.0 * weighted_covariance(gen.particles, gen.weights);
}

}  // namespace

void PmcabcConfig::validate() const {
  if (n_samples < 1) throw ConfigError("PMCABC needs n_samples >= 1");
  if (generations < 1) throw ConfigError("PMCABC needs at least one generation");
  if (epsilon_schedule.size() != generations)
    throw ConfigError("epsilon schedule has " + std::to_string(epsilon_schedule.size()) +
                      " entries for " + std::to_string(generations) + " generations");
  if (!(epsilon_schedule.front() > 0.0)) throw ConfigError("first epsilon must be > 0");
  for (std::size_t t = 0; t < epsilon_schedule.size(); ++t) {
    if (std::isnan(epsilon_schedule[t]) || epsilon_schedule[t] < 0.0)
      throw ConfigError("epsilon values must be >= 0");
    if (t > 0 && epsilon_schedule[t] > epsilon_schedule[t - 1])
      throw ConfigError("epsilon schedule must be nonincreasing");
  }
  if (!(epsilon_percentile > 0.0 && epsilon_percentile <= 1.0))
    throw ConfigError("epsilon_percentile must be a fraction in (0, 1]");
  if (max_attempts_per_particle < 1) throw ConfigError("max_attempts_per_particle must be >= 1");
}

void PmcConfig::validate(std::size_t statistics_dim) const {
  if (n_samples < 1) throw ConfigError("PMC needs n_samples >= 1");
  if (generations < 1) throw ConfigError("PMC needs at least one generation");
  if (n_sim_per_theta < statistics_dim + 2)
    throw ConfigError("n_sim_per_theta must be at least statistics dimension + 2 (" +
                      std::to_string(statistics_dim + 2) + ")");
  if (max_attempts_per_particle < 1) throw ConfigError("max_attempts_per_particle must be >= 1");
}

double adapt_epsilon(std::span<const double> prev_distances, double q, double scheduled) {
  if (prev_distances.empty()) throw ConfigError("adapt_epsilon needs at least one distance");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("epsilon percentile must lie in (0, 1]");
  std::vector<double> sorted(prev_distances.begin(), prev_distances.end());
  std::sort(sorted.begin(), sorted.end());
  const auto pos = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
  return std::max(sorted[std::min(pos, sorted.size() - 1)], scheduled);
}

double compute_pmcabc_weight(const ParameterVector& theta, double prior,
                             std::span<const ParameterVector> prev_particles,
                             std::span<const double> prev_weights, const PreparedKernel& kernel) {
  if (prev_particles.size() != prev_weights.size())
    throw ShapeError("previous particles and weights differ in length");
  if (prior == 0.0) return 0.0;
  double denominator = 0.0;
  for (std::size_t k = 0; k < prev_particles.size(); ++k)
    denominator += prev_weights[k] * kernel.density(theta, prev_particles[k]);
  if (!(denominator > 0.0))
    throw NumericError("kernel mixture density is zero at a particle with positive prior; "
                       "kernel support does not cover the proposal");
  return prior / denominator;
}

Journal rejection_abc(const InferenceProblem& problem, const Distance& distance, double epsilon,
                      std::size_t n_samples, const ExecutorSpec& executor, std::uint64_t seed,
                      std::size_t max_attempts_per_particle) {
  if (!(epsilon > 0.0)) throw ConfigError("rejection ABC needs epsilon > 0");
  if (n_samples < 1) throw ConfigError("rejection ABC needs n_samples >= 1");
  const auto& graph = problem.graph;
  const auto& observed = problem.observed;

  auto task = [&](const std::size_t& i, TaskContext& ctx) {
    Rng rng = make_task_rng(seed, 1, i);
    double best = kInf;
    for (std::size_t a = 1; a <= max_attempts_per_particle; ++a) {
      ctx.attempts = a;
      Proposal p;
      try {
        p.theta = graph.sample_prior(rng);
        p.distance = distance(observed, graph.simulate(p.theta, rng));
      } catch (const SimulationError&) {
        continue;
      }
      best = std::min(best, p.distance);
      if (p.distance <= epsilon) return p;
    }
    throw SamplerError("particle " + std::to_string(i) + " not accepted within " +
                       std::to_string(max_attempts_per_particle) +
                       " attempts; smallest distance seen " + std::to_string(best));
  };
  auto sims = map_collect(task_indices(n_samples), task, executor);
  auto accepted = collect_or_throw(sims, "rejection sampling");

  Journal journal;
  journal.sampler = "rejection";
  journal.parameter_names = graph.parameter_names();
  journal.seed = seed;
  journal.config["settings"] = {{"n_samples", n_samples},
                                {"epsilon", epsilon},
                                {"max_attempts_per_particle", max_attempts_per_particle}};
  Generation gen;
  gen.epsilon = epsilon;
  for (auto& p : accepted) {
    gen.particles.push_back(std::move(p.theta));
    gen.distances.push_back(p.distance);
  }
  gen.weights.assign(n_samples, 1.0 / static_cast<double>(n_samples));
  finish_generation(gen, sims);
  journal.generations.push_back(std::move(gen));
  return journal;
}

Journal pmcabc_sample(const InferenceProblem& problem, const Distance& distance,
                      const JointKernel& kernel, const PmcabcConfig& config,
                      const ExecutorSpec& executor, std::uint64_t seed) {
  config.validate();
  const auto& graph = problem.graph;
  const auto& observed = problem.observed;
  if (kernel.dim() != graph.num_parameters())
    throw ConfigError("kernel dimension does not match the number of free parameters");

  Journal journal = rejection_abc(problem, distance, config.epsilon_schedule.front(),
                                  config.n_samples, executor, seed,
                                  config.max_attempts_per_particle);
  journal.sampler = "pmcabc";
  journal.config["settings"] = {{"n_samples", config.n_samples},
                                {"generations", config.generations},
                                {"epsilon_schedule", config.epsilon_schedule},
                                {"epsilon_percentile", config.epsilon_percentile},
                                {"max_attempts_per_particle", config.max_attempts_per_particle}};

  const auto indices = task_indices(config.n_samples);
  for (std::size_t t = 2; t <= config.generations; ++t) {
    const Generation& prev = journal.generations.back();
    const double epsilon =
        adapt_epsilon(prev.distances, config.epsilon_percentile, config.epsilon_schedule[t - 1]);
    const PreparedKernel perturb(kernel, prev.covariance);
    const Resampler resampler(prev.weights);

    auto sim_task = [&](const std::size_t& i, TaskContext& ctx) {
      Rng rng = make_task_rng(seed, t, i);
      double best = kInf;
      for (std::size_t a = 1; a <= config.max_attempts_per_particle; ++a) {
        ctx.attempts = a;
        Proposal p;
        p.theta = perturb.sample(prev.particles[resampler.draw(rng)], rng);
        // Out-of-support proposals are re-perturbed rather than weighted zero.
        if (graph.prior_density(p.theta) == 0.0) continue;
        try {
          p.distance = distance(observed, graph.simulate(p.theta, rng));
        } catch (const SimulationError&) {
          continue;
        }
        best = std::min(best, p.distance);
        if (p.distance <= epsilon) return p;
      }
      throw SamplerError("generation " + std::to_string(t) + ", particle " + std::to_string(i) +
                         " not accepted within " +
                         std::to_string(config.max_attempts_per_particle) +
                         " attempts; smallest distance seen " + std::to_string(best));
    };
    auto sims = map_collect(indices, sim_task, executor);
    auto accepted = collect_or_throw(sims, "PMCABC simulation");

    Generation gen;
    gen.epsilon = epsilon;
    for (auto& p : accepted) {
      gen.particles.push_back(std::move(p.theta));
      gen.distances.push_back(p.distance);
    }

    auto weight_task = [&](const std::size_t& i, TaskContext&) {
      const auto& theta = gen.particles[i];
      return compute_pmcabc_weight(theta, graph.prior_density(theta), prev.particles,
                                   prev.weights, perturb);
    };
    auto weights = map_collect(indices, weight_task, executor);
    gen.weights = normalize_or_throw(collect_or_throw(weights, "PMCABC weighting"));
    finish_generation(gen, sims);
    journal.generations.push_back(std::move(gen));
  }
  return journal;
}

Journal pmc_sample(const InferenceProblem& problem, const ApproxLikelihood& approx_lhd,
                   const JointKernel& kernel, const PmcConfig& config,
                   const ExecutorSpec& executor, std::uint64_t seed) {
  const auto& graph = problem.graph;
  const auto& observed = problem.observed;
  config.validate(approx_lhd.statistics_dim(observed));
  if (kernel.dim() != graph.num_parameters())
    throw ConfigError("kernel dimension does not match the number of free parameters");

  Journal journal;
  journal.sampler = "pmc";
  journal.parameter_names = graph.parameter_names();
  journal.seed = seed;
  journal.config["settings"] = {{"n_samples", config.n_samples},
                                {"generations", config.generations},
                                {"n_sim_per_theta", config.n_sim_per_theta},
                                {"max_attempts_per_particle", config.max_attempts_per_particle}};

  const auto indices = task_indices(config.n_samples);
  const std::size_t n_sim = config.n_sim_per_theta;

  // Simulates n_sim datasets at a proposal, redrawing the proposal on
  // simulator failure. ctx.attempts counts simulations performed.
  auto estimate = [&](auto&& propose, std::size_t gen_index, std::size_t i, TaskContext& ctx) {
    Rng rng = make_task_rng(seed, gen_index, i);
    std::size_t simulations = 0;
    for (std::size_t a = 1; a <= config.max_attempts_per_particle; ++a) {
      Proposal p;
      p.theta = propose(rng);
      const double prior = graph.prior_density(p.theta);
      if (prior == 0.0) {
        p.in_support = false;
        p.log_likelihood = -kInf;
        ctx.attempts = simulations;
        return p;
      }
      std::vector<DataSet> sims;
      sims.reserve(n_sim);
      try {
        for (std::size_t s = 0; s < n_sim; ++s) {
          ++simulations;
          sims.push_back(graph.simulate(p.theta, rng));
        }
      } catch (const SimulationError&) {
        continue;
      }
      p.log_likelihood = approx_lhd.log_likelihood(observed, sims);
      ctx.attempts = simulations;
      return p;
    }
    throw SamplerError("particle " + std::to_string(i) + ": simulator failed on every one of " +
                       std::to_string(config.max_attempts_per_particle) + " proposals");
  };

  {
    auto task = [&](const std::size_t& i, TaskContext& ctx) {
      return estimate([&](Rng& rng) { return graph.sample_prior(rng); }, 1, i, ctx);
    };
    auto sims = map_collect(indices, task, executor);
    auto props = collect_or_throw(sims, "PMC simulation");
    Generation gen;
    std::vector<double> log_w;
    for (auto& p : props) {
      log_w.push_back(std::log(graph.prior_density(p.theta)) + p.log_likelihood);
      gen.particles.push_back(std::move(p.theta));
    }
    gen.weights = normalize_log_weights(log_w);
    finish_generation(gen, sims);
    journal.generations.push_back(std::move(gen));
  }

  for (std::size_t t = 2; t <= config.generations; ++t) {
    const Generation& prev = journal.generations.back();
    const PreparedKernel perturb(kernel, prev.covariance);
    const Resampler resampler(prev.weights);
    std::vector<double> log_prev_w(prev.weights.size());
    for (std::size_t k = 0; k < prev.weights.size(); ++k) log_prev_w[k] = std::log(prev.weights[k]);

    auto task = [&](const std::size_t& i, TaskContext& ctx) {
      return estimate(
          [&](Rng& rng) { return perturb.sample(prev.particles[resampler.draw(rng)], rng); }, t,
          i, ctx);
    };
    auto sims = map_collect(indices, task, executor);
    auto props = collect_or_throw(sims, "PMC simulation");

    Generation gen;
    std::vector<double> log_lik;
    for (auto& p : props) {
      log_lik.push_back(p.log_likelihood);
      gen.particles.push_back(std::move(p.theta));
    }

    auto weight_task = [&](const std::size_t& i, TaskContext&) {
      const auto& theta = gen.particles[i];
      const double prior = graph.prior_density(theta);
      if (prior == 0.0 || log_lik[i] == -kInf) return -kInf;
      // log sum_k w_k K(theta | theta_k), accumulated stably.
      double m = -kInf;
      std::vector<double> terms(prev.particles.size());
      for (std::size_t k = 0; k < terms.size(); ++k) {
        terms[k] = log_prev_w[k] + perturb.log_density(theta, prev.particles[k]);
        m = std::max(m, terms[k]);
      }
      if (m == -kInf)
        throw NumericError("kernel mixture density is zero at a particle with positive prior");
      double s = 0.0;
      for (double x : terms) s += std::exp(x - m);
      return std::log(prior) + log_lik[i] - (m + std::log(s));
    };
    auto weights = map_collect(indices, weight_task, executor);
    gen.weights = normalize_log_weights(collect_or_throw(weights, "PMC weighting"));
    finish_generation(gen, sims);
    journal.generations.push_back(std::move(gen));
  }
  return journal;
}

ParameterVector journal_posterior_mean(const Journal& journal, std::size_t generation) {
  const auto& g = journal.generations.at(generation);
  return weighted_mean(g.particles, g.weights);
}

CovarianceMatrix journal_posterior_cov(const Journal& journal, std::size_t generation) {
  const auto& g = journal.generations.at(generation);
  return weighted_covariance(g.particles, g.weights);
}

std::size_t total_attempts(const Generation& generation) {
  return std::accumulate(generation.attempts.begin(), generation.attempts.end(), std::size_t{0});
}

}  // namespace abc
