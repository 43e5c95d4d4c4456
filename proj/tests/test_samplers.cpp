#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "abc/error.hpp"
#include "abc/experiment.hpp"
#include "abc/samplers.hpp"
#include "support/oracles.hpp"

using namespace abc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Toy {
  ModelGraph graph;
  DataSet observed;
  double post_mean;
  double post_var;
};

// mu ~ N(0, 1), x_i ~ N(mu, 1), i = 1..n.
Toy normal_mean_toy(std::size_t n = 20, std::uint64_t seed = 5) {
  ModelBuilder b;
  auto mu = b.normal(0.0, 1.0, "mu");
  auto x = b.simulator("normal", {mu, 1.0}, {n},
                       normal_simulator({{"size", static_cast<double>(n)}}).fn, "x");
  auto graph = b.build({x});
  Rng rng(seed);
  std::normal_distribution<double> z(0.7, 1.0);
  std::vector<double> obs(n);
  for (auto& v : obs) v = z(rng);
  const double xbar = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  return {std::move(graph), DataSet{{DataArray::vector(obs)}}, nn * xbar / (nn + 1.0),
          1.0 / (nn + 1.0)};
}

Distance mean_distance() { return Distance::euclidean(statistics_by_name("mean")); }

ModelGraph flat_graph() {
  ModelBuilder b;
  auto a = b.uniform(0.0, 1.0, "a");
  auto c = b.uniform(-1.0, 1.0, "c");
  auto x = b.simulator("normal", {a, 1.0}, {3}, normal_simulator({{"size", 3}}).fn, "x");
  (void)c;
  return b.build({x});
}

double weight_sum(const Generation& g) { return std::accumulate(g.weights.begin(), g.weights.end(), 0.0); }

}  // namespace

TEST_CASE("rejection with infinite epsilon accepts the first draw") {
  const auto toy = normal_mean_toy();
  const auto j = rejection_abc({toy.graph, toy.observed}, mean_distance(), kInf, 50,
                               ExecutorSpec::sequential(), 3);
  REQUIRE(j.generations.size() == 1);
  const auto& g = j.generations[0];
  CHECK(g.particles.size() == 50);
  for (auto a : g.attempts) CHECK(a == 1);
  for (double w : g.weights) CHECK(w == 1.0 / 50.0);
}

TEST_CASE("rejection and PMCABC validate their arguments") {
  const auto toy = normal_mean_toy();
  CHECK_THROWS_AS(rejection_abc({toy.graph, toy.observed}, mean_distance(), 0.0, 5,
                                ExecutorSpec::sequential(), 1),
                  ConfigError);
  PmcabcConfig cfg;
  cfg.generations = 2;
  cfg.epsilon_schedule = {1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epsilon_schedule = {1.0, 2.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epsilon_schedule = {1.0, 0.5};
  cfg.epsilon_percentile = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epsilon_percentile = 0.1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("rejection gives up after the attempt cap") {
  const auto toy = normal_mean_toy();
  CHECK_THROWS_AS(rejection_abc({toy.graph, toy.observed}, mean_distance(), 1e-12, 2,
                                ExecutorSpec::sequential(), 1, 10),
                  SamplerError);
}

TEST_CASE("one-generation PMCABC is rejection ABC") {
  const auto toy = normal_mean_toy();
  PmcabcConfig cfg;
  cfg.n_samples = 40;
  cfg.generations = 1;
  cfg.epsilon_schedule = {0.5};
  const auto kernel = JointKernel::default_for(toy.graph);
  const auto p = pmcabc_sample({toy.graph, toy.observed}, mean_distance(), kernel, cfg,
                               ExecutorSpec::sequential(), 11);
  const auto r = rejection_abc({toy.graph, toy.observed}, mean_distance(), 0.5, 40,
                               ExecutorSpec::sequential(), 11);
  CHECK(p.generations[0].particles == r.generations[0].particles);
  CHECK(p.generations[0].distances == r.generations[0].distances);
  CHECK(p.generations[0].weights == r.generations[0].weights);
}

TEST_CASE("a single particle run is valid") {
  const auto toy = normal_mean_toy();
  PmcabcConfig cfg;
  cfg.n_samples = 1;
  cfg.generations = 2;
  cfg.epsilon_schedule = {1e9, 1e9};
  const auto j = pmcabc_sample({toy.graph, toy.observed}, mean_distance(),
                               JointKernel::default_for(toy.graph), cfg, ExecutorSpec::sequential(), 2);
  REQUIRE(j.generations.size() == 2);
  CHECK(j.generations[0].weights == std::vector<double>{1.0});
  CHECK(j.generations[1].weights == std::vector<double>{1.0});
  // One particle has zero covariance, so the perturbation returns it exactly.
  CHECK(j.generations[1].particles[0] == j.generations[0].particles[0]);
}

TEST_CASE("adapt_epsilon") {
  const std::vector<double> d{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  CHECK(adapt_epsilon(d, 0.1, 0.0) == 1.0);
  CHECK(adapt_epsilon(d, 0.1, 4.5) == 4.5);
  CHECK(adapt_epsilon(d, 1.0, 0.0) == 10.0);
  CHECK(adapt_epsilon(d, 0.5, 0.0) == 5.0);  // floor(0.5 * 9) = 4 -> fifth smallest
  CHECK(adapt_epsilon(d, 0.34, 0.0) == 4.0);  // floor(3.06) = 3
  CHECK(adapt_epsilon(std::vector<double>{2.5}, 0.1, 0.0) == 2.5);
  CHECK_THROWS_AS(adapt_epsilon(std::vector<double>{}, 0.1, 0.0), ConfigError);
  CHECK_THROWS_AS(adapt_epsilon(d, 1.5, 0.0), ConfigError);
}

TEST_CASE("PMCABC weight") {
  const JointKernel kernel({{KernelKind::MultivariateGaussian, {0, 1}}}, 2);
  CovarianceMatrix sigma(2, 2);
  sigma << 0.5, 0.1, 0.1, 0.3;
  const PreparedKernel k(kernel, sigma);

  const ParameterVector theta{{0.2, -0.4}};
  const std::vector<ParameterVector> one{ParameterVector{{0.0, 0.0}}};
  const std::vector<double> w1{1.0};
  CHECK(compute_pmcabc_weight(theta, 0.01, one, w1, k) ==
        doctest::Approx(0.01 / k.density(theta, one[0])).epsilon(1e-14));
  CHECK(compute_pmcabc_weight(theta, 0.0, one, w1, k) == 0.0);

  SUBCASE("random five-particle configurations match direct summation") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<ParameterVector> prev;
      std::vector<double> w;
      for (int i = 0; i < 5; ++i) {
        prev.push_back(ParameterVector{{z(rng), z(rng)}});
        w.push_back(u(rng));
      }
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (auto& x : w) x /= total;
      const ParameterVector th{{z(rng), z(rng)}};
      const double prior = 0.01;
      oracle::Matrix m{{sigma(0, 0) + 1e-10, sigma(0, 1)}, {sigma(1, 0), sigma(1, 1) + 1e-10}};
      double denom = 0.0;
      for (int i = 0; i < 5; ++i) denom += w[i] * oracle::gaussian_density(th.values, prev[i].values, m);
      CHECK(oracle::relative_error(compute_pmcabc_weight(th, prior, prev, w, k), prior / denom) < 1e-12);
    }
  }
}

TEST_CASE("PMC with a flat prior and constant likelihood weighs uniformly") {
  struct Constant final : ApproxLikelihood {
    double log_likelihood(const DataSet&, std::span<const DataSet>) const override { return -1.5; }
    std::size_t statistics_dim(const DataSet&) const override { return 1; }
  } lhd;
  const auto graph = flat_graph();
  const DataSet obs{{DataArray::vector({0.1, 0.2, 0.3})}};
  PmcConfig cfg;
  cfg.n_samples = 16;
  cfg.generations = 1;
  cfg.n_sim_per_theta = 7;
  const auto j = pmc_sample({graph, obs}, lhd, JointKernel::default_for(graph), cfg,
                            ExecutorSpec::sequential(), 4);
  for (double w : j.generations[0].weights) CHECK(w == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
  for (auto a : j.generations[0].attempts) CHECK(a == 7);
}

TEST_CASE("PMC validates n_sim against the statistics dimension") {
  PmcConfig cfg;
  cfg.n_sim_per_theta = 3;
  CHECK_THROWS_AS(cfg.validate(2), ConfigError);
  cfg.n_sim_per_theta = 4;
  CHECK_NOTHROW(cfg.validate(2));
}

TEST_CASE("sampler invariants on the normal-mean toy") {
  const auto toy = normal_mean_toy();
  const auto kernel = JointKernel::default_for(toy.graph);
  PmcabcConfig cfg;
  cfg.n_samples = 60;
  cfg.generations = 4;
  cfg.epsilon_schedule = {1.0, 0.3, 0.1, 0.05};
  cfg.epsilon_percentile = 0.5;
  const auto j = pmcabc_sample({toy.graph, toy.observed}, mean_distance(), kernel, cfg,
                               ExecutorSpec::dynamic_greedy(3), 8);
  REQUIRE(j.generations.size() == 4);
  for (double w : j.generations[0].weights) CHECK(w == 1.0 / 60.0);
  double prev_eps = kInf;
  for (const auto& g : j.generations) {
    CHECK(std::abs(weight_sum(g) - 1.0) < 1e-12);
    for (double d : g.distances) CHECK(d <= *g.epsilon);
    CHECK(*g.epsilon <= prev_eps);
    prev_eps = *g.epsilon;
    const CovarianceMatrix expect = 2.0 * weighted_covariance(g.particles, g.weights);
    CHECK(g.covariance.cwiseEqual(expect).all());
    CHECK(g.attempts.size() == 60);
    std::size_t traced = 0;
    for (const auto& t : g.task_traces) traced += t.n_simulation_attempts;
    CHECK(traced == total_attempts(g));
    CHECK(total_attempts(g) >= 60);
  }

  PmcConfig pcfg;
  pcfg.n_samples = 40;
  pcfg.generations = 2;
  pcfg.n_sim_per_theta = 30;
  const SyntheticLikelihood sl({statistics_by_name("mean")});
  const auto p = pmc_sample({toy.graph, toy.observed}, sl, kernel, pcfg, ExecutorSpec::static_chunked(2), 8);
  for (const auto& g : p.generations) {
    CHECK(std::abs(weight_sum(g) - 1.0) < 1e-12);
    CHECK(!g.epsilon);
    CHECK(total_attempts(g) == 40 * 30);
    CHECK(g.covariance.cwiseEqual(2.0 * weighted_covariance(g.particles, g.weights)).all());
  }
}

TEST_CASE("journals are identical across executors") {
  const auto toy = normal_mean_toy();
  const auto kernel = JointKernel::default_for(toy.graph);
  PmcabcConfig cfg;
  cfg.n_samples = 30;
  cfg.generations = 3;
  cfg.epsilon_schedule = {1.0, 0.2, 0.1};
  auto run = [&](ExecutorSpec e) {
    return journal_to_json(pmcabc_sample({toy.graph, toy.observed}, mean_distance(), kernel, cfg, e, 17), false)
        .dump();
  };
  const auto ref = run(ExecutorSpec::sequential());
  CHECK(run(ExecutorSpec::static_chunked(4)) == ref);
  CHECK(run(ExecutorSpec::dynamic_greedy(4)) == ref);
  CHECK(run(ExecutorSpec::dynamic_greedy(3)) == ref);
}

TEST_CASE("journal JSON round-trip") {
  const auto toy = normal_mean_toy();
  PmcabcConfig cfg;
  cfg.n_samples = 10;
  cfg.generations = 2;
  cfg.epsilon_schedule = {1.0, 0.5};
  const auto j = pmcabc_sample({toy.graph, toy.observed}, mean_distance(),
                               JointKernel::default_for(toy.graph), cfg, ExecutorSpec::sequential(), 1);
  const auto doc = journal_to_json(j);
  CHECK(doc.contains("generations"));
  CHECK(doc["generations"][0].contains("task_traces"));
  const auto back = journal_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(journal_to_json(back).dump() == doc.dump());
  CHECK(back.generations[1].particles == j.generations[1].particles);
  CHECK(back.generations[1].weights == j.generations[1].weights);
}

TEST_CASE("posterior mean and covariance helpers") {
  Journal j;
  Generation g;
  g.particles = {ParameterVector{{0.0}}, ParameterVector{{2.0}}};
  g.weights = {0.5, 0.5};
  j.generations.push_back(g);
  CHECK(journal_posterior_mean(j, 0)[0] == 1.0);
  CHECK(journal_posterior_cov(j, 0)(0, 0) == 1.0);
  j.generations[0].weights = {1.0, 0.0};
  CHECK(journal_posterior_mean(j, 0)[0] == 0.0);
  j.generations[0].particles = {ParameterVector{{3.0}}, ParameterVector{{3.0}}};
  CHECK(journal_posterior_cov(j, 0)(0, 0) == 0.0);
  CHECK_THROWS(journal_posterior_mean(j, 4));
}

TEST_CASE("PMCABC approaches the conjugate posterior") {
  const auto toy = normal_mean_toy();
  PmcabcConfig cfg;
  cfg.n_samples = 200;
  cfg.generations = 4;
  cfg.epsilon_schedule = {1.0, 0.0, 0.0, 0.0};
  cfg.epsilon_percentile = 0.3;
  const auto j = pmcabc_sample({toy.graph, toy.observed}, mean_distance(),
                               JointKernel::default_for(toy.graph), cfg, ExecutorSpec::sequential(), 23);
  const auto last = j.generations.size() - 1;
  CHECK(std::abs(journal_posterior_mean(j, last)[0] - toy.post_mean) < 4.0 * std::sqrt(toy.post_var / 50.0));
  CHECK(journal_posterior_cov(j, last)(0, 0) == doctest::Approx(toy.post_var).epsilon(0.5));
}
