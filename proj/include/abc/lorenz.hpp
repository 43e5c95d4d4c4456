#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "abc/model_graph.hpp"
#include "abc/rng.hpp"

namespace abc::lorenz {

inline constexpr std::size_t kDim = 40;

using State = std::array<double, kDim>;

/// Stochastic Lorenz-95 forecast model with closure g(y) = theta1 + theta2 * y.
struct Params {
  double theta1 = 2.0;
  double theta2 = 0.1;
  double forcing = 10.0;
  /// AR(1) autocorrelation of the stochastic forcing, in [0, 1).
  double phi = 0.4;
  std::size_t steps = 1024;
  /// Integration horizon in model time units (20 days).
  double t_end = 4.0;

  double dt() const { return t_end / static_cast<double>(steps); }
  void validate() const;
};

/// dy_k/dt = -y_{k-1}(y_{k-2} - y_{k+1}) - y_k + F - g(y_k) + eta_k,
/// indices taken modulo 40.
State drift(const State& y, const Params& params, const State& eta);

/// Classical RK4 step with the forcing held fixed over the step. Throws
/// SimulationError if the result is not finite.
State rk4_step(const State& y, const Params& params, const State& eta, double dt);

/// eta' = phi * eta + sqrt(1 - phi^2) * e.
State update_forcing(const State& eta, double phi, const State& e);
State update_forcing(const State& eta, double phi, Rng& rng);
/// eta(0) = sqrt(1 - phi^2) * e(0).
State initial_forcing(double phi, const State& e);

State standard_normal_state(Rng& rng);

/// y_k = F for every k, plus 0.01 on the first variable.
State default_initial_state(double forcing = 10.0);

/// Trajectory as a 40 x (steps + 1) array (rows are variables, columns are
/// time points, the first column is y0). `noise[s]` is the standard-normal
/// vector e(s); step s integrates with the forcing derived from
/// noise[0..s]. Requires noise.size() >= steps.
DataArray simulate(const Params& params, const State& y0, std::span<const State> noise);
DataArray simulate(const Params& params, const State& y0, Rng& rng);

/// Rows are time steps, 40 columns, full round-trip precision.
void write_trajectory_csv(std::ostream& out, const DataArray& trajectory);
DataArray read_trajectory_csv(std::istream& in);

struct ModelOptions {
  std::size_t steps = 1024;
  double phi = 0.4;
  double forcing = 10.0;
};

/// Simulator inputs (theta1, theta2); options steps, phi, forcing.
SimulatorDefinition simulator(const SimulatorOptions& options);
void register_simulator(SimulatorRegistry& registry);

/// theta1 ~ U(0.5, 3.5), theta2 ~ U(0, 0.3), root "lorenz" simulating the
/// trajectory from the default initial state.
ModelGraph build_model(const ModelOptions& options);

inline constexpr double kTheta1Low = 0.5;
inline constexpr double kTheta1High = 3.5;
inline constexpr double kTheta2Low = 0.0;
inline constexpr double kTheta2High = 0.3;

}  // namespace abc::lorenz
