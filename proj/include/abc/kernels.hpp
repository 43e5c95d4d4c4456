#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "abc/model_graph.hpp"
#include "abc/rng.hpp"

namespace abc {

using CovarianceMatrix = Eigen::MatrixXd;

/// sum_i w_i (x_i - m)(x_i - m)^T with normalised weights and weighted mean m.
CovarianceMatrix weighted_covariance(std::span<const ParameterVector> particles,
                                     std::span<const double> weights);
ParameterVector weighted_mean(std::span<const ParameterVector> particles,
                              std::span<const double> weights);

enum class KernelKind { MultivariateGaussian, MultivariateStudentT, DiscreteRandomWalk };

struct KernelSpec {
  KernelKind kind = KernelKind::MultivariateGaussian;
  /// Positions in the parameter vector this component perturbs.
  std::vector<std::size_t> targets;
  /// Degrees of freedom, Student-t only.
  double df = 3.0;
};

/// Product of kernel components over disjoint parameter subsets that
/// together cover every free parameter.
class JointKernel {
 public:
  JointKernel(std::vector<KernelSpec> components, std::size_t dim);

  /// Gaussian over continuous parameters, random walk over integer ones.
  static JointKernel default_for(const ModelGraph& graph);
  /// One component of `kind` over all continuous parameters, random walk
  /// over integer ones.
  static JointKernel uniform_kind(const ModelGraph& graph, KernelKind kind, double df = 3.0);

  const std::vector<KernelSpec>& components() const { return components_; }
  std::size_t dim() const { return dim_; }

 private:
  std::vector<KernelSpec> components_;
  std::size_t dim_;
};

/// A JointKernel bound to one covariance matrix. Factorizations are computed
/// once; sampling and density evaluation are then const and thread-safe.
///
/// The global covariance is sliced to each component's targets. Sampling
/// uses a symmetric eigen-factorization (exact for singular PSD matrices);
/// densities use a Cholesky factor of the slice with 1e-10 * max(1, trace)
/// added to the diagonal.
class PreparedKernel {
 public:
  PreparedKernel(const JointKernel& kernel, const CovarianceMatrix& sigma);

  ParameterVector sample(const ParameterVector& center, Rng& rng) const;
  double density(const ParameterVector& theta, const ParameterVector& center) const;
  double log_density(const ParameterVector& theta, const ParameterVector& center) const;

  const JointKernel& kernel() const { return kernel_; }

 private:
  struct Component {
    KernelSpec spec;
    Eigen::MatrixXd sample_factor;
    Eigen::MatrixXd chol;
    double log_norm = 0.0;
  };

  JointKernel kernel_;
  std::vector<Component> components_;
};

ParameterVector kernel_sample(const JointKernel& kernel, const ParameterVector& center,
                              const CovarianceMatrix& sigma, Rng& rng);
double kernel_density(const JointKernel& kernel, const ParameterVector& theta,
                      const ParameterVector& center, const CovarianceMatrix& sigma);

}  // namespace abc
