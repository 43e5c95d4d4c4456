#include "abc/lorenz.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "abc/error.hpp"

namespace abc::lorenz {

void Params::validate() const {
  if (steps < 1) throw ConfigError("Lorenz model needs at least one time step");
  if (!(phi >= 0.0 && phi < 1.0)) throw ConfigError("Lorenz forcing phi must lie in [0, 1)");
  if (!(t_end > 0.0)) throw ConfigError("Lorenz horizon must be positive");
}

State drift(const State& y, const Params& params, const State& eta) {
  constexpr std::size_t K = kDim;
  State out;
  for (std::size_t k = 0; k < K; ++k) {
    const double ym1 = y[(k + K - 1) % K];
    const double ym2 = y[(k + K - 2) % K];
    const double yp1 = y[(k + 1) % K];
    const double closure = params.theta1 + params.theta2 * y[k];
    const double base = -ym1 * (ym2 - yp1) - y[k] + params.forcing - closure;
    out[k] = base + eta[k];
  }
  return out;
}

State rk4_step(const State& y, const Params& params, const State& eta, double dt) {
  auto axpy = [](const State& a, double h, const State& b) {
    State r;
    for (std::size_t k = 0; k < kDim; ++k) r[k] = a[k] + h * b[k];
    return r;
  };
  const State k1 = drift(y, params, eta);
  const State k2 = drift(axpy(y, 0.5 * dt, k1), params, eta);
  const State k3 = drift(axpy(y, 0.5 * dt, k2), params, eta);
  const State k4 = drift(axpy(y, dt, k3), params, eta);
  State out;
  for (std::size_t k = 0; k < kDim; ++k) {
    out[k] = y[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    if (!std::isfinite(out[k])) throw SimulationError("Lorenz integration diverged");
  }
  return out;
}

State update_forcing(const State& eta, double phi, const State& e) {
  const double scale = std::sqrt(1.0 - phi * phi);
  State out;
  for (std::size_t k = 0; k < kDim; ++k) out[k] = phi * eta[k] + scale * e[k];
  return out;
}

State standard_normal_state(Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  State e;
  for (auto& x : e) x = z(rng);
  return e;
}

State update_forcing(const State& eta, double phi, Rng& rng) {
  return update_forcing(eta, phi, standard_normal_state(rng));
}

State initial_forcing(double phi, const State& e) {
  State zero{};
  return update_forcing(zero, phi, e);
}

State default_initial_state(double forcing) {
  State y;
  y.fill(forcing);
  y[0] += 0.01;
  return y;
}

DataArray simulate(const Params& params, const State& y0, std::span<const State> noise) {
  params.validate();
  if (noise.size() < params.steps)
    throw ShapeError("Lorenz simulation needs one noise vector per step");
  const std::size_t cols = params.steps + 1;
  DataArray out{std::vector<double>(kDim * cols), {kDim, cols}};
  auto store = [&](const State& y, std::size_t col) {
    for (std::size_t k = 0; k < kDim; ++k) out.values[k * cols + col] = y[k];
  };
  const double dt = params.dt();
  State y = y0;
  store(y, 0);
  State eta = initial_forcing(params.phi, noise[0]);
  for (std::size_t s = 0; s < params.steps; ++s) {
    if (s > 0) eta = update_forcing(eta, params.phi, noise[s]);
    y = rk4_step(y, params, eta, dt);
    store(y, s + 1);
  }
  return out;
}

DataArray simulate(const Params& params, const State& y0, Rng& rng) {
  params.validate();
  std::vector<State> noise(params.steps);
  for (auto& e : noise) e = standard_normal_state(rng);
  return simulate(params, y0, noise);
}

void write_trajectory_csv(std::ostream& out, const DataArray& trajectory) {
  if (trajectory.shape.size() != 2 || trajectory.shape[0] != kDim)
    throw ShapeError("trajectory must be a 40 x T array");
  const std::size_t cols = trajectory.shape[1];
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < kDim; ++k) out << (k ? "," : "") << "y" << (k + 1);
  out << '\n';
  for (std::size_t t = 0; t < cols; ++t) {
    for (std::size_t k = 0; k < kDim; ++k)
      out << (k ? "," : "") << trajectory.values[k * cols + t];
    out << '\n';
  }
  out.precision(old);
}

DataArray read_trajectory_csv(std::istream& in) {
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find_first_of("yY") != std::string::npos) continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("trajectory CSV: cannot parse '" + cell + "'");
      }
    }
    if (row.size() != kDim)
      throw ConfigError("trajectory CSV: expected 40 columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ConfigError("trajectory CSV: need at least two time points");
  const std::size_t cols = rows.size();
  DataArray out{std::vector<double>(kDim * cols), {kDim, cols}};
  for (std::size_t t = 0; t < cols; ++t)
    for (std::size_t k = 0; k < kDim; ++k) out.values[k * cols + t] = rows[t][k];
  return out;
}

SimulatorDefinition simulator(const SimulatorOptions& options) {
  const double steps = option_or(options, "steps", 1024.0);
  if (!(steps >= 1.0) || steps != std::floor(steps))
    throw GraphError("lorenz95 simulator: 'steps' must be a positive integer");
  Params base;
  base.steps = static_cast<std::size_t>(steps);
  base.phi = option_or(options, "phi", 0.4);
  base.forcing = option_or(options, "forcing", 10.0);
  try {
    base.validate();
  } catch (const ConfigError& e) {
    throw GraphError(std::string("lorenz95 simulator: ") + e.what());
  }
  SimulatorDefinition def;
  def.shape = {kDim, base.steps + 1};
  def.expected_inputs = 2;
  def.fn = [base](std::span<const std::vector<double>> in, Rng& rng) {
    if (in.size() != 2 || in[0].size() != 1 || in[1].size() != 1)
      throw SimulationError("lorenz95 simulator expects scalar inputs (theta1, theta2)");
    Params p = base;
    p.theta1 = in[0][0];
    p.theta2 = in[1][0];
    return simulate(p, default_initial_state(p.forcing), rng).values;
  };
  return def;
}

void register_simulator(SimulatorRegistry& registry) {
  registry.register_simulator("lorenz95", simulator);
}

ModelGraph build_model(const ModelOptions& options) {
  auto def = simulator({{"steps", static_cast<double>(options.steps)},
                        {"phi", options.phi},
                        {"forcing", options.forcing}});
  ModelBuilder b;
  auto theta1 = b.uniform(kTheta1Low, kTheta1High, "theta1");
  auto theta2 = b.uniform(kTheta2Low, kTheta2High, "theta2");
  auto y = b.simulator("lorenz95", {theta1, theta2}, def.shape, def.fn, "lorenz");
  return b.build({y});
}

}  // namespace abc::lorenz
