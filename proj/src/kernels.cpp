#include "abc/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "abc/error.hpp"

namespace abc {

namespace {

constexpr double kFactorJitter = 1e-10;

std::vector<double> normalized(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw NumericError("weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw NumericError("all weights are zero");
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= total;
  return out;
}

void check_particles(std::span<const ParameterVector> particles, std::span<const double> weights) {
  if (particles.empty()) throw NumericError("no particles");
  if (particles.size() != weights.size())
    throw ShapeError("particle and weight counts differ");
  for (const auto& p : particles)
    if (p.size() != particles.front().size()) throw ShapeError("particles have mixed dimensions");
}

Eigen::MatrixXd slice(const CovarianceMatrix& sigma, const std::vector<std::size_t>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out(i, j) = sigma(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(idx[j]));
  return out;
}

}  // namespace

ParameterVector weighted_mean(std::span<const ParameterVector> particles,
                              std::span<const double> weights) {
  check_particles(particles, weights);
  const auto w = normalized(weights);
  ParameterVector mean{std::vector<double>(particles.front().size(), 0.0)};
  for (std::size_t i = 0; i < particles.size(); ++i)
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += w[i] * particles[i][j];
  return mean;
}

CovarianceMatrix weighted_covariance(std::span<const ParameterVector> particles,
                                     std::span<const double> weights) {
  check_particles(particles, weights);
  const auto w = normalized(weights);
  const auto d = static_cast<Eigen::Index>(particles.front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < particles.size(); ++i)
    mean += w[i] * Eigen::Map<const Eigen::VectorXd>(particles[i].values.data(), d);
  CovarianceMatrix cov = CovarianceMatrix::Zero(d, d);
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Eigen::VectorXd diff =
        Eigen::Map<const Eigen::VectorXd>(particles[i].values.data(), d) - mean;
    cov.noalias() += w[i] * diff * diff.transpose();
  }
  // Exact symmetry regardless of accumulation order.
  return (0.5 * (cov + cov.transpose())).eval();
}

JointKernel::JointKernel(std::vector<KernelSpec> components, std::size_t dim)
    : components_(std::move(components)), dim_(dim) {
  std::vector<int> covered(dim, 0);
  for (const auto& c : components_) {
    if (c.targets.empty()) throw ConfigError("kernel component with no targets");
    if (c.kind == KernelKind::MultivariateStudentT && !(c.df > 0.0))
      throw ConfigError("Student-t kernel needs df > 0");
    for (auto t : c.targets) {
      if (t >= dim) throw ConfigError("kernel target " + std::to_string(t) + " out of range");
      if (covered[t]++) throw ConfigError("parameter " + std::to_string(t) +
                                          " is targeted by more than one kernel");
    }
  }
  for (std::size_t i = 0; i < dim; ++i)
    if (!covered[i]) throw ConfigError("parameter " + std::to_string(i) + " has no kernel");
}

JointKernel JointKernel::uniform_kind(const ModelGraph& graph, KernelKind kind, double df) {
  std::vector<std::size_t> continuous, discrete;
  for (std::size_t i = 0; i < graph.num_parameters(); ++i)
    (graph.is_integer_parameter(i) ? discrete : continuous).push_back(i);
  std::vector<KernelSpec> comps;
  if (!continuous.empty()) comps.push_back({kind, continuous, df});
  if (!discrete.empty()) comps.push_back({KernelKind::DiscreteRandomWalk, discrete, df});
  return JointKernel(std::move(comps), graph.num_parameters());
}

JointKernel JointKernel::default_for(const ModelGraph& graph) {
  return uniform_kind(graph, KernelKind::MultivariateGaussian);
}

PreparedKernel::PreparedKernel(const JointKernel& kernel, const CovarianceMatrix& sigma)
    : kernel_(kernel) {
  const auto d = static_cast<Eigen::Index>(kernel.dim());
  if (sigma.rows() != d || sigma.cols() != d)
    throw ShapeError("covariance is " + std::to_string(sigma.rows()) + "x" +
                     std::to_string(sigma.cols()) + ", kernel dimension is " +
                     std::to_string(d));
  for (const auto& spec : kernel.components()) {
    Component comp{spec, {}, {}, 0.0};
    if (spec.kind != KernelKind::DiscreteRandomWalk) {
      const Eigen::MatrixXd s = slice(sigma, spec.targets);
      const auto k = s.rows();
      if (!s.allFinite()) throw NumericError("kernel covariance has non-finite entries");
      const double scale = std::max(1.0, s.trace());

      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
      if (eig.info() != Eigen::Success) throw NumericError("kernel covariance factorization failed");
      Eigen::VectorXd ev = eig.eigenvalues();
      if (ev.minCoeff() < -1e-12 * scale)
        throw NumericError("kernel covariance is not positive semidefinite");
      ev = ev.cwiseMax(0.0).cwiseSqrt();
      comp.sample_factor = eig.eigenvectors() * ev.asDiagonal();

      Eigen::MatrixXd jittered = s;
      jittered.diagonal().array() += kFactorJitter * scale;
      Eigen::LLT<Eigen::MatrixXd> llt(jittered);
      if (llt.info() != Eigen::Success)
        throw NumericError("kernel covariance is singular after jitter");
      comp.chol = llt.matrixL();
      const double log_det_half = comp.chol.diagonal().array().log().sum();
      const double kd = static_cast<double>(k);
      if (spec.kind == KernelKind::MultivariateGaussian) {
        comp.log_norm = -0.5 * kd * std::log(2.0 * std::numbers::pi) - log_det_half;
      } else {
        const double nu = spec.df;
        comp.log_norm = std::lgamma(0.5 * (nu + kd)) - std::lgamma(0.5 * nu) -
                        0.5 * kd * std::log(nu * std::numbers::pi) - log_det_half;
      }
    }
    components_.push_back(std::move(comp));
  }
}

ParameterVector PreparedKernel::sample(const ParameterVector& center, Rng& rng) const {
  if (center.size() != kernel_.dim()) throw ShapeError("kernel center has wrong dimension");
  ParameterVector out = center;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& comp : components_) {
    const auto& targets = comp.spec.targets;
    if (comp.spec.kind == KernelKind::DiscreteRandomWalk) {
      std::bernoulli_distribution coin(0.5);
      for (auto t : targets) out[t] = center[t] + (coin(rng) ? 1.0 : -1.0);
      continue;
    }
    const auto k = static_cast<Eigen::Index>(targets.size());
    Eigen::VectorXd z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = normal(rng);
    Eigen::VectorXd step = comp.sample_factor * z;
    if (comp.spec.kind == KernelKind::MultivariateStudentT) {
      std::chi_squared_distribution<double> chi2(comp.spec.df);
      step *= std::sqrt(comp.spec.df / chi2(rng));
    }
    for (Eigen::Index i = 0; i < k; ++i) out[targets[static_cast<std::size_t>(i)]] += step(i);
  }
  return out;
}

double PreparedKernel::log_density(const ParameterVector& theta,
                                   const ParameterVector& center) const {
  if (theta.size() != kernel_.dim() || center.size() != kernel_.dim())
    throw ShapeError("kernel density arguments have wrong dimension");
  double total = 0.0;
  for (const auto& comp : components_) {
    const auto& targets = comp.spec.targets;
    if (comp.spec.kind == KernelKind::DiscreteRandomWalk) {
      for (auto t : targets) {
        if (std::abs(theta[t] - center[t]) != 1.0)
          return -std::numeric_limits<double>::infinity();
        total += std::log(0.5);
      }
      continue;
    }
    const auto k = static_cast<Eigen::Index>(targets.size());
    Eigen::VectorXd diff(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto t = targets[static_cast<std::size_t>(i)];
      diff(i) = theta[t] - center[t];
    }
    const double q = comp.chol.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
    if (comp.spec.kind == KernelKind::MultivariateGaussian) {
      total += comp.log_norm - 0.5 * q;
    } else {
      const double nu = comp.spec.df;
      total += comp.log_norm - 0.5 * (nu + static_cast<double>(k)) * std::log1p(q / nu);
    }
  }
  return total;
}

double PreparedKernel::density(const ParameterVector& theta, const ParameterVector& center) const {
  return std::exp(log_density(theta, center));
}

ParameterVector kernel_sample(const JointKernel& kernel, const ParameterVector& center,
                              const CovarianceMatrix& sigma, Rng& rng) {
  return PreparedKernel(kernel, sigma).sample(center, rng);
}

double kernel_density(const JointKernel& kernel, const ParameterVector& theta,
                      const ParameterVector& center, const CovarianceMatrix& sigma) {
  return PreparedKernel(kernel, sigma).density(theta, center);
}

}  // namespace abc
