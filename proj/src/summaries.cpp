#include "abc/summaries.hpp"

#include <cmath>
#include <numbers>

#include "abc/error.hpp"

namespace abc {

namespace {

constexpr double kLogRegPenalty = 1e-3;
constexpr int kLogRegMaxIterations = 500;
constexpr double kSynLikJitter = 1e-6;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

StatisticsSpec StatisticsSpec::identity() { return StatisticsSpec(Kind::Identity, "identity", {}); }

StatisticsSpec StatisticsSpec::hakkarainen_lorenz() {
  return StatisticsSpec(Kind::HakkarainenLorenz, "hakkarainen-lorenz", {});
}

StatisticsSpec StatisticsSpec::custom(std::string name, StatisticsFn fn) {
  if (!fn) throw ConfigError("custom statistics '" + name + "' has no function");
  return StatisticsSpec(Kind::Custom, std::move(name), std::move(fn));
}

SummaryVector StatisticsSpec::extract(const DataArray& data) const {
  switch (kind_) {
    case Kind::Identity: return SummaryVector{data.values};
    case Kind::HakkarainenLorenz: return SummaryVector{hakkarainen_statistics(data)};
    case Kind::Custom: break;
  }
  return SummaryVector{fn_(data)};
}

Eigen::MatrixXd StatisticsSpec::rows(const DataArray& data) const {
  if (data.shape.empty() || data.shape[0] == 0) throw ShapeError("cannot split an empty array");
  const std::size_t n = data.shape[0];
  if (data.values.size() % n != 0) throw ShapeError("array size does not match its shape");
  const std::size_t width = data.values.size() / n;
  std::vector<std::size_t> row_shape(data.shape.begin() + 1, data.shape.end());
  if (row_shape.empty()) row_shape = {1};

  Eigen::MatrixXd out;
  for (std::size_t r = 0; r < n; ++r) {
    DataArray row{std::vector<double>(data.values.begin() + r * width,
                                      data.values.begin() + (r + 1) * width),
                  row_shape};
    auto s = extract(row);
    if (r == 0) out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.size()));
    if (static_cast<Eigen::Index>(s.size()) != out.cols())
      throw ShapeError("statistics '" + name_ + "' produced rows of different lengths");
    for (std::size_t c = 0; c < s.size(); ++c) out(r, c) = s.values[c];
  }
  return out;
}

SummaryVector extract_statistics(const StatisticsSpec& spec, const DataArray& data) {
  return spec.extract(data);
}

std::vector<double> hakkarainen_statistics(const DataArray& series) {
  if (series.shape.size() != 2)
    throw ShapeError("HakkarainenLorenz statistics need a 2-D (variables x time) array");
  const std::size_t K = series.shape[0];
  const std::size_t T = series.shape[1];
  if (K < 3 || T < 2) throw ShapeError("HakkarainenLorenz statistics need K >= 3 and T >= 2");
  if (series.values.size() != K * T) throw ShapeError("array size does not match its shape");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      series.values.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
  const Eigen::VectorXd means = x.rowwise().mean();
  const Eigen::MatrixXd c = x.colwise() - means;
  const auto Ti = static_cast<Eigen::Index>(T);
  const double inv_t = 1.0 / static_cast<double>(T);
  const double inv_lag = 1.0 / static_cast<double>(T - 1);

  double s_mean = 0, s_var = 0, s_auto = 0, s_neigh = 0, s_cross_prev = 0, s_cross_next = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const auto prev = static_cast<Eigen::Index>((k + K - 1) % K);
    const auto next = static_cast<Eigen::Index>((k + 1) % K);
    const auto head = c.row(row).head(Ti - 1);
    s_mean += means(row);
    s_var += c.row(row).squaredNorm() * inv_t;
    s_auto += head.dot(c.row(row).tail(Ti - 1)) * inv_lag;
    s_neigh += c.row(row).dot(c.row(next)) * inv_t;
    s_cross_prev += head.dot(c.row(prev).tail(Ti - 1)) * inv_lag;
    s_cross_next += head.dot(c.row(next).tail(Ti - 1)) * inv_lag;
  }
  const double kk = static_cast<double>(K);
  return {s_mean / kk, s_var / kk, s_auto / kk, s_neigh / kk, s_cross_prev / kk, s_cross_next / kk};
}

double euclidean_distance(const SummaryVector& a, const SummaryVector& b) {
  if (a.size() != b.size())
    throw ShapeError("euclidean distance between vectors of length " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double logreg_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 2 || b.rows() < 2)
    throw ShapeError("logistic-regression distance needs at least 2 samples per dataset");
  if (a.cols() != b.cols()) throw ShapeError("datasets have different statistics widths");

  const Eigen::Index n = a.rows() + b.rows();
  const Eigen::Index p = a.cols();
  Eigen::MatrixXd raw(n, p);
  raw << a, b;
  Eigen::VectorXd y(n);
  y.head(a.rows()).setZero();
  y.tail(b.rows()).setOnes();

  if ((raw.rowwise() - raw.row(0)).cwiseAbs().maxCoeff() == 0.0) return 0.5;

  // Standardised features plus an intercept column.
  Eigen::MatrixXd X(n, p + 1);
  X.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = raw.col(j).mean();
    const double sd = std::sqrt((raw.col(j).array() - mean).square().mean());
    if (sd > 0.0)
      X.col(j + 1) = (raw.col(j).array() - mean) / sd;
    else
      X.col(j + 1).setZero();
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  auto loss = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = X * w;
    double l = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) l += softplus(z(i)) - y(i) * z(i);
    return l * inv_n + 0.5 * kLogRegPenalty * w.tail(p).squaredNorm();
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p + 1);
  double current = loss(w);
  double step = 1.0;
  for (int it = 0; it < kLogRegMaxIterations; ++it) {
    Eigen::VectorXd residual = (X * w).unaryExpr([](double z) { return sigmoid(z); }) - y;
    Eigen::VectorXd grad = X.transpose() * residual * inv_n;
    grad.tail(p) += kLogRegPenalty * w.tail(p);
    const double g2 = grad.squaredNorm();
    if (g2 < 1e-20) break;
    step = std::min(1.0, step * 2.0);
    Eigen::VectorXd candidate = w - step * grad;
    double next = loss(candidate);
    while (next > current - 0.5 * step * g2 && step > 1e-12) {
      step *= 0.5;
      candidate = w - step * grad;
      next = loss(candidate);
    }
    w = std::move(candidate);
    current = next;
  }

  const Eigen::VectorXd z = X * w;
  double correct = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (z(i) == 0.0)
      correct += 0.5;
    else if ((z(i) > 0.0) == (y(i) == 1.0))
      correct += 1.0;
  }
  return correct * inv_n;
}

double combine_distances(std::span<const double> distances, std::span<const double> weights) {
  if (distances.size() != weights.size())
    throw ShapeError("combine_distances: " + std::to_string(distances.size()) +
                     " distances but " + std::to_string(weights.size()) + " weights");
  double total = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) total += weights[i] * distances[i];
  return total;
}

double synthetic_log_likelihood(const SummaryVector& observed, const Eigen::MatrixXd& sim_stats) {
  const Eigen::Index n = sim_stats.rows();
  const Eigen::Index d = sim_stats.cols();
  if (n < 2) throw ShapeError("synthetic likelihood needs at least 2 simulated summaries");
  if (static_cast<Eigen::Index>(observed.size()) != d)
    throw ShapeError("observed summary length does not match simulated summaries");

  const Eigen::VectorXd mean = sim_stats.colwise().mean().transpose();
  const Eigen::MatrixXd centered = sim_stats.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double trace = cov.trace();
  if (!(trace > 0.0) || !std::isfinite(trace))
    throw NumericError("synthetic likelihood: simulated summaries have zero spread; "
                       "increase the number of simulations");
  cov.diagonal().array() += kSynLikJitter * trace / static_cast<double>(d);

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("synthetic likelihood: covariance is not positive definite; "
                       "increase the number of simulations");
  const Eigen::VectorXd diff =
      Eigen::Map<const Eigen::VectorXd>(observed.values.data(), d) - mean;
  const Eigen::VectorXd solved = llt.matrixL().solve(diff);
  const double log_det_half = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) - log_det_half -
         0.5 * solved.squaredNorm();
}

double synthetic_likelihood(const SummaryVector& observed, const Eigen::MatrixXd& sim_stats) {
  return std::exp(synthetic_log_likelihood(observed, sim_stats));
}

Distance::Distance(std::vector<Component> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw ConfigError("distance needs at least one component");
  if (weights_.empty()) weights_.assign(components_.size(), 1.0);
  if (weights_.size() != components_.size())
    throw ConfigError("distance has " + std::to_string(components_.size()) +
                      " components but " + std::to_string(weights_.size()) + " weights");
  for (double w : weights_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("distance weights must be >= 0");
}

Distance Distance::euclidean(StatisticsSpec statistics) {
  return Distance({Component{std::move(statistics), DistanceKind::Euclidean}});
}

double Distance::operator()(const DataSet& observed, const DataSet& simulated) const {
  if (observed.arrays.size() != components_.size() ||
      simulated.arrays.size() != components_.size())
    throw ShapeError("distance expects " + std::to_string(components_.size()) +
                     " arrays per dataset");
  std::vector<double> per_root(components_.size());
  for (std::size_t r = 0; r < components_.size(); ++r) {
    const auto& c = components_[r];
    if (c.kind == DistanceKind::Euclidean) {
      per_root[r] = euclidean_distance(c.statistics.extract(observed.arrays[r]),
                                       c.statistics.extract(simulated.arrays[r]));
    } else {
      per_root[r] = logreg_distance(c.statistics.rows(observed.arrays[r]),
                                    c.statistics.rows(simulated.arrays[r]));
    }
  }
  return combine_distances(per_root, weights_);
}

SyntheticLikelihood::SyntheticLikelihood(std::vector<StatisticsSpec> per_root)
    : per_root_(std::move(per_root)) {
  if (per_root_.empty()) throw ConfigError("synthetic likelihood needs statistics per root");
}

SummaryVector SyntheticLikelihood::summarize(const DataSet& data) const {
  if (data.arrays.size() != per_root_.size())
    throw ShapeError("synthetic likelihood expects " + std::to_string(per_root_.size()) +
                     " arrays per dataset");
  SummaryVector out;
  for (std::size_t r = 0; r < per_root_.size(); ++r) {
    auto s = per_root_[r].extract(data.arrays[r]);
    out.values.insert(out.values.end(), s.values.begin(), s.values.end());
  }
  return out;
}

double SyntheticLikelihood::log_likelihood(const DataSet& observed,
                                           std::span<const DataSet> simulated) const {
  const auto obs = summarize(observed);
  Eigen::MatrixXd stats(static_cast<Eigen::Index>(simulated.size()),
                        static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < simulated.size(); ++i) {
    const auto s = summarize(simulated[i]);
    if (s.size() != obs.size()) throw ShapeError("simulated summary length differs from observed");
    for (std::size_t j = 0; j < s.size(); ++j)
      stats(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.values[j];
  }
  return synthetic_log_likelihood(obs, stats);
}

std::size_t SyntheticLikelihood::statistics_dim(const DataSet& example) const {
  return summarize(example).size();
}

}  // namespace abc
