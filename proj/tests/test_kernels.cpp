#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "abc/error.hpp"
#include "abc/kernels.hpp"
#include "support/oracles.hpp"

using namespace abc;

namespace {

JointKernel gaussian(std::size_t d) {
  std::vector<std::size_t> all(d);
  for (std::size_t i = 0; i < d; ++i) all[i] = i;
  return JointKernel({{KernelKind::MultivariateGaussian, all}}, d);
}

JointKernel student(std::size_t d, double df) {
  std::vector<std::size_t> all(d);
  for (std::size_t i = 0; i < d; ++i) all[i] = i;
  return JointKernel({{KernelKind::MultivariateStudentT, all, df}}, d);
}

Eigen::MatrixXd random_spd(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = z(rng);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

oracle::Matrix to_rows(const Eigen::MatrixXd& m) {
  oracle::Matrix out(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

ParameterVector random_point(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  ParameterVector p;
  for (std::size_t i = 0; i < d; ++i) p.values.push_back(z(rng));
  return p;
}

}  // namespace

TEST_CASE("weighted covariance worked examples") {
  const std::vector<ParameterVector> one{{{4.0, -1.0}}};
  const std::vector<double> w1{1.0};
  CHECK(weighted_covariance(one, w1).isZero(0.0));

  const std::vector<ParameterVector> two{{{0.0}}, {{2.0}}};
  const std::vector<double> half{0.5, 0.5};
  CHECK(weighted_covariance(two, half)(0, 0) == 1.0);

  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(weighted_covariance(two, zero), NumericError);
}

TEST_CASE("weighted covariance matches the double-loop oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<ParameterVector> ps;
    std::vector<std::vector<double>> raw;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
      ps.push_back(random_point(3, rng));
      raw.push_back(ps.back().values);
      w.push_back(u(rng));
    }
    const auto got = weighted_covariance(ps, w);
    const auto want = oracle::weighted_covariance(raw, w);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) CHECK(oracle::relative_error(got(a, b), want[a][b], 1e-3) < 1e-10);
  }
}

TEST_CASE("zero covariance returns the centre exactly") {
  Rng rng(0);
  const ParameterVector c{{1.25, -3.5}};
  CHECK(kernel_sample(gaussian(2), c, Eigen::MatrixXd::Zero(2, 2), rng) == c);
  CHECK(kernel_sample(student(2, 3), c, Eigen::MatrixXd::Zero(2, 2), rng) == c);
}

TEST_CASE("discrete walk moves to a neighbour with probability one half each") {
  JointKernel walk({{KernelKind::DiscreteRandomWalk, {0}}}, 1);
  const PreparedKernel k(walk, Eigen::MatrixXd::Zero(1, 1));
  Rng rng(8);
  const int n = 10000;
  int up = 0;
  for (int i = 0; i < n; ++i) {
    const double v = k.sample({{7.0}}, rng)[0];
    REQUIRE((v == 6.0 || v == 8.0));
    up += v == 8.0;
  }
  const double p = double(up) / n;
  CHECK(std::abs(p - 0.5) < 3.0 * std::sqrt(0.25 / n));

  CHECK(k.density({{6.0}}, {{5.0}}) == 0.5);
  CHECK(k.density({{8.0}}, {{5.0}}) == 0.0);
  CHECK(k.density({{5.0}}, {{5.0}}) == 0.0);
}

TEST_CASE("Gaussian kernel sample covariance is close to the identity") {
  const PreparedKernel k(gaussian(2), Eigen::MatrixXd::Identity(2, 2));
  Rng rng(12);
  const int n = 10000;
  double s00 = 0, s11 = 0, s01 = 0, m0 = 0, m1 = 0;
  std::vector<std::array<double, 2>> xs(n);
  for (auto& x : xs) {
    const auto p = k.sample({{0.0, 0.0}}, rng);
    x = {p[0], p[1]};
    m0 += p[0];
    m1 += p[1];
  }
  m0 /= n;
  m1 /= n;
  for (const auto& x : xs) {
    s00 += (x[0] - m0) * (x[0] - m0);
    s11 += (x[1] - m1) * (x[1] - m1);
    s01 += (x[0] - m0) * (x[1] - m1);
  }
  // SE of a sample variance of N(0,1) is sqrt(2/n); of a covariance 1/sqrt(n).
  CHECK(std::abs(s00 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s11 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s01 / n) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("Gaussian density at the mode with identity covariance") {
  for (std::size_t d = 1; d <= 4; ++d) {
    const ParameterVector c(std::vector<double>(d, 0.3));
    const double want = std::pow(2.0 * std::numbers::pi, -0.5 * double(d));
    // The 1e-10 * max(1, d) diagonal jitter shifts the value by ~1e-10 relative.
    CHECK(oracle::relative_error(kernel_density(gaussian(d), c, c, Eigen::MatrixXd::Identity(d, d)),
                                 want) < 1e-9);
  }
}

TEST_CASE("kernel densities match direct-definition oracles") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 4;
    Eigen::MatrixXd sigma = random_spd(d, rng);
    const auto theta = random_point(d, rng);
    const auto center = random_point(d, rng);
    // Oracle sees the same jittered matrix the library factorizes.
    Eigen::MatrixXd jittered = sigma;
    jittered.diagonal().array() += 1e-10 * std::max(1.0, sigma.trace());
    const double g = kernel_density(gaussian(d), theta, center, sigma);
    CHECK(oracle::relative_error(g, oracle::gaussian_density(theta.values, center.values, to_rows(jittered))) < 1e-10);
    const double df = 1.5 + double(rng() % 6);
    const double t = kernel_density(student(d, df), theta, center, sigma);
    CHECK(oracle::relative_error(t, oracle::student_t_density(theta.values, center.values, to_rows(jittered), df)) < 1e-10);
  }
}

TEST_CASE("property: symmetric kernels") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 3;
    const Eigen::MatrixXd sigma = random_spd(d, rng);
    const auto a = random_point(d, rng);
    const auto b = random_point(d, rng);
    for (const auto& k : {gaussian(d), student(d, 3.0)}) {
      const PreparedKernel pk(k, sigma);
      CHECK(oracle::relative_error(pk.density(a, b), pk.density(b, a)) < 1e-12);
    }
  }
  JointKernel walk({{KernelKind::DiscreteRandomWalk, {0}}}, 1);
  CHECK(kernel_density(walk, {{3.0}}, {{4.0}}, Eigen::MatrixXd::Zero(1, 1)) ==
        kernel_density(walk, {{4.0}}, {{3.0}}, Eigen::MatrixXd::Zero(1, 1)));
}

TEST_CASE("1-D densities integrate to one") {
  Eigen::MatrixXd sigma(1, 1);
  sigma << 0.7;
  for (const auto& k : {gaussian(1), student(1, 3.0)}) {
    const PreparedKernel pk(k, sigma);
    // Composite Simpson on [-L, L]; the Student-t mass beyond L is added in
    // closed form.
    const double L = 400.0;
    const int n = 400000;
    const double h = 2 * L / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = -L + i * h;
      const double f = pk.density({{x}}, {{0.0}});
      s += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
    }
    s *= h / 3;
    if (k.components()[0].kind == KernelKind::MultivariateStudentT) {
      // P(|T| > L / scale) for df = 3.
      const double scale = std::sqrt(0.7 * (1 + 1e-10));
      const double tq = L / scale;
      // Two-sided t(3) tail: 1 - (2/pi)(atan(t/sqrt3) + sqrt3 t/(3+t^2)).
      const double tail = 1.0 - 2.0 / std::numbers::pi *
                                    (std::atan(tq / std::sqrt(3.0)) + std::sqrt(3.0) * tq / (3.0 + tq * tq));
      s += tail;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("joint kernel coverage validation") {
  CHECK_THROWS_AS(JointKernel({{KernelKind::MultivariateGaussian, {0}}}, 2), ConfigError);
  CHECK_THROWS_AS(JointKernel({{KernelKind::MultivariateGaussian, {0, 1}},
                               {KernelKind::DiscreteRandomWalk, {1}}},
                              2),
                  ConfigError);
  CHECK_THROWS_AS(JointKernel({{KernelKind::MultivariateGaussian, {0, 2}}}, 2), ConfigError);
  CHECK_NOTHROW(JointKernel({{KernelKind::MultivariateGaussian, {1}}, {KernelKind::DiscreteRandomWalk, {0}}}, 2));
}

TEST_CASE("default kernel splits continuous and integer parameters") {
  auto g = build_graph({{"k", PriorUniform{0, 10, true}}, {"x", PriorUniform{0, 1}}}, {"k", "x"});
  const auto kernel = JointKernel::default_for(g);
  REQUIRE(kernel.components().size() == 2);
  bool walk_on_k = false, gauss_on_x = false;
  for (const auto& c : kernel.components()) {
    walk_on_k |= c.kind == KernelKind::DiscreteRandomWalk && c.targets == std::vector<std::size_t>{0};
    gauss_on_x |= c.kind == KernelKind::MultivariateGaussian && c.targets == std::vector<std::size_t>{1};
  }
  CHECK(walk_on_k);
  CHECK(gauss_on_x);

  // Integer slots stay integral after perturbation.
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  const PreparedKernel pk(kernel, sigma);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto p = pk.sample({{4.0, 0.5}}, rng);
    CHECK(p[0] == std::round(p[0]));
    CHECK(std::abs(p[0] - 4.0) == 1.0);
  }
}

TEST_CASE("component slicing uses the global covariance sub-block") {
  JointKernel split({{KernelKind::MultivariateGaussian, {0}}, {KernelKind::MultivariateGaussian, {1}}}, 2);
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2.0, 0.9, 0.9, 0.5;
  const ParameterVector a{{0.3, -0.2}}, c{{0.0, 0.0}};
  const double want = oracle::gaussian_density({0.3}, {0.0}, {{2.0 + 1e-10 * 2.0}}) *
                      oracle::gaussian_density({-0.2}, {0.0}, {{0.5 + 1e-10}});
  CHECK(oracle::relative_error(kernel_density(split, a, c, sigma), want) < 1e-10);
}

TEST_CASE("indefinite covariance is rejected") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 3.0, 3.0, 1.0;
  CHECK_THROWS_AS(PreparedKernel(gaussian(2), bad), NumericError);
}
