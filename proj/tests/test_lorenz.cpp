#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "abc/error.hpp"
#include "abc/lorenz.hpp"
#include "support/oracles.hpp"

using namespace abc;
using namespace abc::lorenz;

namespace {

State random_state(std::mt19937_64& rng, double mean, double sd) {
  std::normal_distribution<double> z(mean, sd);
  State s;
  for (auto& x : s) x = z(rng);
  return s;
}

State roll(const State& s, std::size_t r) {
  State out;
  for (std::size_t k = 0; k < kDim; ++k) out[(k + r) % kDim] = s[k];
  return out;
}

double max_abs_diff(const State& a, const State& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < kDim; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

State integrate(State y, const Params& p, const State& eta, double horizon, std::size_t n) {
  const double dt = horizon / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) y = rk4_step(y, p, eta, dt);
  return y;
}

}  // namespace

TEST_CASE("drift worked examples") {
  Params p;
  State zero{};
  SUBCASE("zero state gives F - theta1") {
    for (double d : drift(zero, p, zero)) CHECK(d == 10.0 - 2.0);
  }
  SUBCASE("constant state cancels the advection term") {
    State y;
    y.fill(3.0);
    for (double d : drift(y, p, zero)) CHECK(d == doctest::Approx(-3.0 + 10.0 - (2.0 + 0.1 * 3.0)));
  }
  SUBCASE("fixed point of the deterministic closure") {
    // y* = (F - theta1) / (1 + theta2) on every variable.
    State y;
    y.fill((10.0 - 2.0) / 1.1);
    for (double d : drift(y, p, zero)) CHECK(std::abs(d) < 1e-14);
  }
}

TEST_CASE("drift matches the component-wise oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u1(0.5, 3.5), u2(0.0, 0.3);
  for (int trial = 0; trial < 100; ++trial) {
    Params p;
    p.theta1 = u1(rng);
    p.theta2 = u2(rng);
    const State y = random_state(rng, 2.0, 4.0);
    const State eta = random_state(rng, 0.0, 1.0);
    const State got = drift(y, p, eta);
    const std::vector<double> yv(y.begin(), y.end());
    for (std::size_t k = 0; k < kDim; ++k) {
      const double want = oracle::lorenz_drift_component(yv, k + 1, p.forcing, p.theta1, p.theta2, eta[k]);
      CHECK(oracle::relative_error(got[k], want, 1.0) < 1e-12);
    }
  }
}

TEST_CASE("RK4 on the linear decay problem") {
  // theta1 = F and theta2 = 0 reduce a uniform state to dy/dt = -y.
  Params p;
  p.theta1 = 10.0;
  p.theta2 = 0.0;
  State y0;
  y0.fill(1.0);
  const State eta{};
  double prev = 0.0;
  for (std::size_t n : {10, 20, 40, 80}) {
    const State y = integrate(y0, p, eta, 1.0, n);
    const double err = std::abs(y[0] - std::exp(-1.0));
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.5);
    prev = err;
  }
}

TEST_CASE("RK4 empirical order on the frozen-noise problem") {
  std::mt19937_64 rng(8);
  Params p;
  const State y0 = random_state(rng, 3.0, 2.0);
  const State eta = random_state(rng, 0.0, 1.0);
  const double horizon = 0.2;
  const State ref = integrate(y0, p, eta, horizon, 4096);
  const double e1 = max_abs_diff(integrate(y0, p, eta, horizon, 16), ref);
  const double e2 = max_abs_diff(integrate(y0, p, eta, horizon, 32), ref);
  const double e3 = max_abs_diff(integrate(y0, p, eta, horizon, 64), ref);
  CHECK(std::log2(e1 / e2) >= 3.5);
  CHECK(std::log2(e2 / e3) >= 3.5);
}

TEST_CASE("forcing update") {
  std::mt19937_64 rng(1);
  const State eta = random_state(rng, 0.0, 1.0);
  const State e = random_state(rng, 0.0, 1.0);
  CHECK(update_forcing(eta, 0.0, e) == e);
  const State near_one = update_forcing(eta, 0.999999, e);
  CHECK(max_abs_diff(near_one, eta) < 5e-3);
  const State init = initial_forcing(0.4, e);
  for (std::size_t k = 0; k < kDim; ++k) CHECK(init[k] == doctest::Approx(std::sqrt(1 - 0.16) * e[k]));
}

TEST_CASE("forcing has unit stationary variance") {
  const double phi = 0.4;
  const std::size_t n = 100000;
  Rng rng(77);
  State eta = initial_forcing(phi, standard_normal_state(rng));
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    eta = update_forcing(eta, phi, rng);
    for (double x : eta) {
      sum += x;
      sum2 += x * x;
    }
  }
  const double count = static_cast<double>(n * kDim);
  const double mean = sum / count;
  const double var = sum2 / count - mean * mean;
  // Var of the sample variance of a unit AR(1): 2 (1 + phi^2) / (1 - phi^2) / count.
  const double se = std::sqrt(2.0 * (1 + phi * phi) / (1 - phi * phi) / count);
  CHECK(std::abs(var - 1.0) < 3.0 * se);
}

TEST_CASE("rotation symmetry") {
  std::mt19937_64 rng(12);
  Params p;
  const State y = random_state(rng, 2.0, 3.0);
  const State eta = random_state(rng, 0.0, 1.0);
  for (std::size_t r : {1, 7, 39}) {
    CHECK(drift(roll(y, r), p, roll(eta, r)) == roll(drift(y, p, eta), r));
    CHECK(rk4_step(roll(y, r), p, roll(eta, r), 0.01) == roll(rk4_step(y, p, eta, 0.01), r));
  }
  p.steps = 32;
  std::vector<State> noise(32), rolled(32);
  for (std::size_t s = 0; s < 32; ++s) {
    noise[s] = random_state(rng, 0.0, 1.0);
    rolled[s] = roll(noise[s], 5);
  }
  const auto a = simulate(p, y, noise);
  const auto b = simulate(p, roll(y, 5), rolled);
  const std::size_t cols = 33;
  for (std::size_t k = 0; k < kDim; ++k)
    for (std::size_t t = 0; t < cols; ++t)
      CHECK(b.values[((k + 5) % kDim) * cols + t] == a.values[k * cols + t]);
}

TEST_CASE("simulation is deterministic for a seed and layout is variables by time") {
  Params p;
  p.steps = 64;
  Rng r1(5), r2(5), r3(6);
  const auto a = simulate(p, default_initial_state(), r1);
  const auto b = simulate(p, default_initial_state(), r2);
  const auto c = simulate(p, default_initial_state(), r3);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  REQUIRE(a.shape == std::vector<std::size_t>{40, 65});
  CHECK(a.values[0] == 10.01);
  CHECK(a.values[65] == 10.0);
  for (double v : a.values) CHECK(std::isfinite(v));
}

TEST_CASE("trajectory CSV round-trip") {
  Params p;
  p.steps = 64;
  Rng rng(9);
  const auto a = simulate(p, default_initial_state(), rng);
  std::stringstream ss;
  write_trajectory_csv(ss, a);
  const auto b = read_trajectory_csv(ss);
  CHECK(b.shape == a.shape);
  CHECK(b.values == a.values);
  std::stringstream bad("y1,y2\n1,2\n3,4\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad), ConfigError);
}

TEST_CASE("reference trajectory is regression-locked") {
  std::ifstream in(std::string(ABC_SOURCE_DIR) + "/data/lorenz_T1024.csv");
  REQUIRE(in.good());
  const auto locked = read_trajectory_csv(in);
  Params p;  // theta = (2.0, 0.1), 1024 steps
  Rng rng(20190101);
  const auto fresh = simulate(p, default_initial_state(), rng);
  REQUIRE(locked.shape == fresh.shape);
  CHECK(locked.values == fresh.values);
}

TEST_CASE("parameter validation and the model graph") {
  Params p;
  p.phi = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.phi = 0.4;
  p.steps = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  const auto g = build_model({128, 0.4, 10.0});
  CHECK(g.parameter_names() == std::vector<std::string>{"theta1", "theta2"});
  CHECK(g.root_shape(0) == std::vector<std::size_t>{40, 129});
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto th = g.sample_prior(rng);
    CHECK(th[0] >= kTheta1Low);
    CHECK(th[0] <= kTheta1High);
    CHECK(th[1] >= kTheta2Low);
    CHECK(th[1] <= kTheta2High);
  }
  CHECK(g.prior_density(ParameterVector{{2.0, 0.1}}) == doctest::Approx(1.0 / (3.0 * 0.3)));
  CHECK(g.prior_density(ParameterVector{{4.0, 0.1}}) == 0.0);
}
