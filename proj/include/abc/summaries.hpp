#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abc/model_graph.hpp"

namespace abc {

struct SummaryVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const SummaryVector&) const = default;
};

using StatisticsFn = std::function<std::vector<double>(const DataArray&)>;

/// How a dataset array is reduced to a summary vector.
class StatisticsSpec {
 public:
  enum class Kind { Identity, HakkarainenLorenz, Custom };

  static StatisticsSpec identity();
  static StatisticsSpec hakkarainen_lorenz();
  static StatisticsSpec custom(std::string name, StatisticsFn fn);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  SummaryVector extract(const DataArray& data) const;

  /// Per-sample summary rows: the statistic applied to each slice along the
  /// first axis. A 1-D array of n values yields an n x 1 matrix under
  /// Identity.
  Eigen::MatrixXd rows(const DataArray& data) const;

 private:
  StatisticsSpec(Kind kind, std::string name, StatisticsFn fn)
      : kind_(kind), name_(std::move(name)), fn_(std::move(fn)) {}

  Kind kind_;
  std::string name_;
  StatisticsFn fn_;
};

SummaryVector extract_statistics(const StatisticsSpec& spec, const DataArray& data);

/// Six summaries of a K x T cyclic multivariate series (rows are variables,
/// columns are time), each averaged over the K variables: mean, variance,
/// lag-1 auto-covariance, covariance with neighbour k+1, and lag-1
/// cross-covariances with neighbours k-1 and k+1. Covariances use 1/T (or
/// 1/(T-1) for lag-1 pairs) with full-series means.
std::vector<double> hakkarainen_statistics(const DataArray& series);

double euclidean_distance(const SummaryVector& a, const SummaryVector& b);

/// Training accuracy of an L2-penalised logistic-regression classifier that
/// separates the rows of `a` from the rows of `b`. 0.5 means the datasets are
/// indistinguishable.
double logreg_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

double combine_distances(std::span<const double> distances, std::span<const double> weights);

/// Log density of N(mean(sim), cov(sim) + jitter) at `observed`, where the
/// rows of `sim_stats` are simulated summaries. Throws NumericError when the
/// fitted covariance is singular.
double synthetic_log_likelihood(const SummaryVector& observed, const Eigen::MatrixXd& sim_stats);
double synthetic_likelihood(const SummaryVector& observed, const Eigen::MatrixXd& sim_stats);

enum class DistanceKind { Euclidean, LogReg };

/// Discrepancy between an observed and a simulated dataset: one statistic
/// and metric per root, combined linearly.
class Distance {
 public:
  struct Component {
    StatisticsSpec statistics;
    DistanceKind kind = DistanceKind::Euclidean;
  };

  Distance(std::vector<Component> components, std::vector<double> weights = {});
  static Distance euclidean(StatisticsSpec statistics);

  double operator()(const DataSet& observed, const DataSet& simulated) const;
  std::size_t num_roots() const { return components_.size(); }
  const std::vector<Component>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<Component> components_;
  std::vector<double> weights_;
};

/// Approximate likelihood L(x0 | theta) estimated from datasets simulated at
/// theta.
class ApproxLikelihood {
 public:
  virtual ~ApproxLikelihood() = default;
  virtual double log_likelihood(const DataSet& observed,
                                std::span<const DataSet> simulated) const = 0;
  /// Dimension of the concatenated summary vector for datasets shaped like
  /// `example`.
  virtual std::size_t statistics_dim(const DataSet& example) const = 0;
};

/// Gaussian synthetic likelihood over the concatenated per-root summaries.
class SyntheticLikelihood final : public ApproxLikelihood {
 public:
  explicit SyntheticLikelihood(std::vector<StatisticsSpec> per_root);

  SummaryVector summarize(const DataSet& data) const;
  double log_likelihood(const DataSet& observed,
                        std::span<const DataSet> simulated) const override;
  std::size_t statistics_dim(const DataSet& example) const override;

 private:
  std::vector<StatisticsSpec> per_root_;
};

}  // namespace abc
