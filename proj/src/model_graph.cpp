#include "abc/model_graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <queue>
#include <thread>
#include <unordered_map>

#include "abc/error.hpp"

namespace abc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<NodeId> parents_of(const NodeKind& kind) {
  return std::visit(Overloaded{
                        [](const Hyperparameter&) { return std::vector<NodeId>{}; },
                        [](const PriorUniform&) { return std::vector<NodeId>{}; },
                        [](const PriorNormal& n) { return std::vector<NodeId>{n.mean, n.sd}; },
                        [](const OperatorNode& n) { return std::vector<NodeId>{n.left, n.right}; },
                        [](const Simulator& s) { return s.inputs; },
                    },
                    kind);
}

bool is_prior(const NodeKind& kind) {
  return std::holds_alternative<PriorUniform>(kind) || std::holds_alternative<PriorNormal>(kind);
}

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double uniform_density(const PriorUniform& u, double x) {
  if (u.integer) {
    const double lo = std::ceil(u.low);
    const double hi = std::floor(u.high);
    if (x != std::round(x) || x < lo || x > hi) return 0.0;
    return 1.0 / (hi - lo + 1.0);
  }
  if (x < u.low || x > u.high) return 0.0;
  // Degenerate point mass.
  if (u.low == u.high) return 1.0;
  return 1.0 / (u.high - u.low);
}

}  // namespace

std::string_view op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Subtract: return "-";
    case BinaryOp::Multiply: return "*";
    case BinaryOp::Divide: return "/";
    case BinaryOp::Power: return "**";
  }
  return "?";
}

std::optional<BinaryOp> parse_op(std::string_view symbol) {
  if (symbol == "+") return BinaryOp::Add;
  if (symbol == "-") return BinaryOp::Subtract;
  if (symbol == "*") return BinaryOp::Multiply;
  if (symbol == "/") return BinaryOp::Divide;
  if (symbol == "**" || symbol == "^" || symbol == "pow") return BinaryOp::Power;
  return std::nullopt;
}

double apply_op(BinaryOp op, double left, double right) {
  double result = 0.0;
  switch (op) {
    case BinaryOp::Add: result = left + right; break;
    case BinaryOp::Subtract: result = left - right; break;
    case BinaryOp::Multiply: result = left * right; break;
    case BinaryOp::Divide:
      if (right == 0.0) throw SimulationError("division by zero in operator node");
      result = left / right;
      break;
    case BinaryOp::Power:
      if (left < 0.0 && right != std::trunc(right))
        throw SimulationError("negative base raised to a fractional power");
      if (left == 0.0 && right < 0.0) throw SimulationError("zero raised to a negative power");
      result = std::pow(left, right);
      break;
  }
  if (!std::isfinite(result)) throw SimulationError("non-finite result in operator node");
  return result;
}

ModelGraph ModelGraph::build(std::vector<NodeSpec> specs, std::vector<NodeId> roots) {
  ModelGraph g;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].id.value.empty()) throw GraphError("node with empty id");
    if (!index.emplace(specs[i].id.value, i).second)
      throw GraphError("duplicate node id '" + specs[i].id.value + "'");
  }

  g.nodes_.reserve(specs.size());
  for (auto& spec : specs) {
    Node node{std::move(spec.id), std::move(spec.kind), {}, {1}, false};
    for (const auto& parent : parents_of(node.kind)) {
      auto it = index.find(parent.value);
      if (it == index.end())
        throw GraphError("node '" + node.id.value + "' references undeclared node '" +
                         parent.value + "'");
      node.parents.push_back(it->second);
    }
    g.nodes_.push_back(std::move(node));
  }

  // Kahn's algorithm; ready nodes are taken in declaration order.
  const std::size_t n = g.nodes_.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p : g.nodes_[i].parents) {
      ++indegree[i];
      children[p].push_back(i);
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  while (!ready.empty()) {
    auto i = ready.top();
    ready.pop();
    g.topo_.push_back(i);
    for (auto c : children[i])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (g.topo_.size() != n) {
    std::string members;
    for (std::size_t i = 0; i < n; ++i) {
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + g.nodes_[i].id.value;
    }
    throw GraphError("cycle detected among nodes: " + members);
  }

  for (auto i : g.topo_) {
    Node& node = g.nodes_[i];
    std::visit(Overloaded{
                   [&](const Hyperparameter& h) {
                     if (!std::isfinite(h.value))
                       throw GraphError("hyperparameter '" + node.id.value + "' is not finite");
                   },
                   [&](const PriorUniform& u) {
                     if (!std::isfinite(u.low) || !std::isfinite(u.high) || u.low > u.high)
                       throw GraphError("uniform prior '" + node.id.value +
                                        "' requires finite low <= high");
                     if (u.integer && std::ceil(u.low) > std::floor(u.high))
                       throw GraphError("integer uniform prior '" + node.id.value +
                                        "' contains no integers");
                   },
                   [&](const PriorNormal&) {
                     for (auto p : node.parents) {
                       if (g.nodes_[p].data_level)
                         throw GraphError("prior '" + node.id.value +
                                          "' depends on simulated data");
                       if (shape_size(g.nodes_[p].shape) != 1)
                         throw GraphError("prior '" + node.id.value +
                                          "' requires scalar inputs");
                     }
                   },
                   [&](const OperatorNode&) {
                     const Node& l = g.nodes_[node.parents[0]];
                     const Node& r = g.nodes_[node.parents[1]];
                     const auto ls = shape_size(l.shape), rs = shape_size(r.shape);
                     if (ls != 1 && rs != 1 && l.shape != r.shape)
                       throw GraphError("operator node '" + node.id.value +
                                        "' combines arrays of different shapes");
                     node.shape = ls >= rs ? l.shape : r.shape;
                     node.data_level = l.data_level || r.data_level;
                   },
                   [&](const Simulator& s) {
                     if (!s.fn) throw GraphError("simulator '" + node.id.value + "' has no function");
                     if (s.shape.empty() || shape_size(s.shape) == 0)
                       throw GraphError("simulator '" + node.id.value + "' has an empty shape");
                     node.shape = s.shape;
                     node.data_level = true;
                   },
               },
               node.kind);
  }

  g.slot_of_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_prior(g.nodes_[i].kind)) {
      g.slot_of_[i] = static_cast<std::ptrdiff_t>(g.free_.size());
      g.free_.push_back(i);
    }
  }
  if (g.free_.empty()) throw GraphError("model has no free parameters");

  if (roots.empty()) throw GraphError("model has no root nodes");
  for (const auto& r : roots) {
    auto it = index.find(r.value);
    if (it == index.end()) throw GraphError("root '" + r.value + "' is not a node");
    g.roots_.push_back(it->second);
  }
  return g;
}

std::vector<NodeId> ModelGraph::free_parameters() const {
  std::vector<NodeId> out;
  for (auto i : free_) out.push_back(nodes_[i].id);
  return out;
}

std::vector<std::string> ModelGraph::parameter_names() const {
  std::vector<std::string> out;
  for (auto i : free_) out.push_back(nodes_[i].id.value);
  return out;
}

std::vector<NodeId> ModelGraph::roots() const {
  std::vector<NodeId> out;
  for (auto i : roots_) out.push_back(nodes_[i].id);
  return out;
}

std::vector<NodeId> ModelGraph::topological_order() const {
  std::vector<NodeId> out;
  for (auto i : topo_) out.push_back(nodes_[i].id);
  return out;
}

bool ModelGraph::is_integer_parameter(std::size_t slot) const {
  const auto* u = std::get_if<PriorUniform>(&nodes_.at(free_.at(slot)).kind);
  return u != nullptr && u->integer;
}

const std::vector<std::size_t>& ModelGraph::root_shape(std::size_t root) const {
  return nodes_.at(roots_.at(root)).shape;
}

void ModelGraph::check_layout(const ParameterVector& theta) const {
  if (theta.size() != free_.size())
    throw ShapeError("parameter vector has " + std::to_string(theta.size()) +
                     " entries, model has " + std::to_string(free_.size()) +
                     " free parameters");
}

std::vector<std::vector<double>> ModelGraph::evaluate(const ParameterVector* theta, Rng* rng,
                                                      bool include_data,
                                                      ParameterVector* drawn) const {
  std::vector<std::vector<double>> values(nodes_.size());
  for (auto i : topo_) {
    const Node& node = nodes_[i];
    if (node.data_level && !include_data) continue;
    auto scalar = [&](std::size_t k) { return values[node.parents[k]].front(); };
    std::visit(
        Overloaded{
            [&](const Hyperparameter& h) { values[i] = {h.value}; },
            [&](const PriorUniform& u) {
              double v;
              if (theta) {
                v = (*theta)[slot_of_[i]];
              } else if (u.integer) {
                std::uniform_int_distribution<long long> dist(
                    static_cast<long long>(std::ceil(u.low)),
                    static_cast<long long>(std::floor(u.high)));
                v = static_cast<double>(dist(*rng));
              } else if (u.low == u.high) {
                v = u.low;
              } else {
                std::uniform_real_distribution<double> dist(u.low, u.high);
                v = dist(*rng);
              }
              values[i] = {v};
              if (drawn) (*drawn)[slot_of_[i]] = v;
            },
            [&](const PriorNormal&) {
              double v;
              if (theta) {
                v = (*theta)[slot_of_[i]];
              } else {
                const double sd = scalar(1);
                if (!(sd > 0.0))
                  throw SimulationError("normal prior '" + node.id.value +
                                        "' has non-positive standard deviation");
                std::normal_distribution<double> dist(scalar(0), sd);
                v = dist(*rng);
              }
              values[i] = {v};
              if (drawn) (*drawn)[slot_of_[i]] = v;
            },
            [&](const OperatorNode& op) {
              const auto& l = values[node.parents[0]];
              const auto& r = values[node.parents[1]];
              const std::size_t m = std::max(l.size(), r.size());
              std::vector<double> out(m);
              for (std::size_t k = 0; k < m; ++k)
                out[k] = apply_op(op.op, l.size() == 1 ? l[0] : l[k], r.size() == 1 ? r[0] : r[k]);
              values[i] = std::move(out);
            },
            [&](const Simulator& s) {
              std::vector<std::vector<double>> inputs;
              inputs.reserve(node.parents.size());
              for (auto p : node.parents) inputs.push_back(values[p]);
              auto out = s.fn(inputs, *rng);
              if (out.size() != shape_size(s.shape))
                throw SimulationError("simulator '" + node.id.value + "' returned " +
                                      std::to_string(out.size()) + " values, expected " +
                                      std::to_string(shape_size(s.shape)));
              for (double x : out)
                if (!std::isfinite(x))
                  throw SimulationError("simulator '" + node.id.value +
                                        "' produced a non-finite value");
              values[i] = std::move(out);
            },
        },
        node.kind);
  }
  return values;
}

ParameterVector ModelGraph::sample_prior(Rng& rng) const {
  ParameterVector theta{std::vector<double>(free_.size(), 0.0)};
  evaluate(nullptr, &rng, false, &theta);
  return theta;
}

double ModelGraph::prior_density(const ParameterVector& theta) const {
  check_layout(theta);
  std::vector<std::vector<double>> values;
  try {
    values = evaluate(&theta, nullptr, false, nullptr);
  } catch (const SimulationError&) {
    // A hyperprior expression that cannot be evaluated has no support here.
    return 0.0;
  }
  double density = 1.0;
  for (auto i : free_) {
    const Node& node = nodes_[i];
    const double x = theta[slot_of_[i]];
    if (const auto* u = std::get_if<PriorUniform>(&node.kind)) {
      density *= uniform_density(*u, x);
    } else {
      const double mean = values[node.parents[0]].front();
      const double sd = values[node.parents[1]].front();
      if (!(sd > 0.0)) return 0.0;
      density *= normal_pdf(x, mean, sd);
    }
    if (density == 0.0) return 0.0;
  }
  return density;
}

DataSet ModelGraph::simulate(const ParameterVector& theta, Rng& rng) const {
  check_layout(theta);
  auto values = evaluate(&theta, &rng, true, nullptr);
  DataSet out;
  out.arrays.reserve(roots_.size());
  for (auto r : roots_) out.arrays.push_back(DataArray{std::move(values[r]), nodes_[r].shape});
  return out;
}

std::vector<DataSet> ModelGraph::forward_simulate(const ParameterVector& theta, std::size_t n,
                                                  Rng& rng) const {
  std::vector<DataSet> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(simulate(theta, rng));
  return out;
}

ModelGraph build_graph(std::vector<NodeSpec> specs, std::vector<NodeId> roots) {
  return ModelGraph::build(std::move(specs), std::move(roots));
}

ParameterVector sample_prior(const ModelGraph& graph, Rng& rng) { return graph.sample_prior(rng); }

double prior_density(const ModelGraph& graph, const ParameterVector& theta) {
  return graph.prior_density(theta);
}

std::vector<DataSet> forward_simulate(const ModelGraph& graph, const ParameterVector& theta,
                                      std::size_t n, Rng& rng) {
  return graph.forward_simulate(theta, n, rng);
}

// ModelBuilder

NodeId ModelBuilder::next_id(std::string name) {
  ++counter_;
  if (!name.empty()) return NodeId{std::move(name)};
  return NodeId{"_node" + std::to_string(counter_)};
}

Var ModelBuilder::constant(double value, std::string name) {
  auto id = next_id(std::move(name));
  specs_.push_back({id, Hyperparameter{value}});
  return Var(*this, id);
}

Var ModelBuilder::uniform(double low, double high, std::string name) {
  auto id = next_id(std::move(name));
  specs_.push_back({id, PriorUniform{low, high, false}});
  return Var(*this, id);
}

Var ModelBuilder::integer_uniform(double low, double high, std::string name) {
  auto id = next_id(std::move(name));
  specs_.push_back({id, PriorUniform{low, high, true}});
  return Var(*this, id);
}

Var ModelBuilder::lift(const Operand& operand) {
  if (const auto* v = std::get_if<Var>(&operand.get())) return *v;
  return constant(std::get<double>(operand.get()));
}

Var ModelBuilder::normal(Operand mean, Operand sd, std::string name) {
  auto m = lift(mean);
  auto s = lift(sd);
  auto id = next_id(std::move(name));
  specs_.push_back({id, PriorNormal{m.id(), s.id()}});
  return Var(*this, id);
}

Var ModelBuilder::simulator(std::string simulator_name, std::vector<Operand> inputs,
                            std::vector<std::size_t> shape, SimulatorFn fn, std::string name) {
  std::vector<NodeId> ids;
  for (const auto& in : inputs) ids.push_back(lift(in).id());
  auto id = next_id(std::move(name));
  specs_.push_back({id, Simulator{std::move(simulator_name), std::move(ids), std::move(shape),
                                  std::move(fn)}});
  return Var(*this, id);
}

Var ModelBuilder::apply(BinaryOp op, Operand left, Operand right, std::string name) {
  auto l = lift(left);
  auto r = lift(right);
  auto id = next_id(std::move(name));
  specs_.push_back({id, OperatorNode{op, l.id(), r.id()}});
  return Var(*this, id);
}

ModelGraph ModelBuilder::build(const std::vector<Var>& roots) const {
  std::vector<NodeId> ids;
  for (const auto& r : roots) ids.push_back(r.id());
  return ModelGraph::build(specs_, std::move(ids));
}

Var operator+(const Var& a, const Operand& b) { return a.builder().apply(BinaryOp::Add, a, b); }
Var operator+(double a, const Var& b) { return b.builder().apply(BinaryOp::Add, a, b); }
Var operator-(const Var& a, const Operand& b) { return a.builder().apply(BinaryOp::Subtract, a, b); }
Var operator-(double a, const Var& b) { return b.builder().apply(BinaryOp::Subtract, a, b); }
Var operator*(const Var& a, const Operand& b) { return a.builder().apply(BinaryOp::Multiply, a, b); }
Var operator*(double a, const Var& b) { return b.builder().apply(BinaryOp::Multiply, a, b); }
Var operator/(const Var& a, const Operand& b) { return a.builder().apply(BinaryOp::Divide, a, b); }
Var operator/(double a, const Var& b) { return b.builder().apply(BinaryOp::Divide, a, b); }
Var pow(const Var& a, const Operand& b) { return a.builder().apply(BinaryOp::Power, a, b); }

// Simulator registry

void SimulatorRegistry::register_simulator(std::string name, SimulatorFactory factory) {
  factories_[std::move(name)] = std::move(factory);
}

bool SimulatorRegistry::contains(std::string_view name) const {
  return factories_.find(name) != factories_.end();
}

SimulatorDefinition SimulatorRegistry::make(std::string_view name,
                                            const SimulatorOptions& options) const {
  auto it = factories_.find(name);
  if (it == factories_.end())
    throw GraphError("unknown simulator '" + std::string(name) + "'");
  return it->second(options);
}

std::vector<std::string> SimulatorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : factories_) out.push_back(k);
  return out;
}

double option_or(const SimulatorOptions& options, const std::string& key, double fallback) {
  auto it = options.find(key);
  return it == options.end() ? fallback : it->second;
}

SimulatorDefinition normal_simulator(const SimulatorOptions& options) {
  const double size_opt = option_or(options, "size", 1.0);
  if (!(size_opt >= 1.0) || size_opt != std::floor(size_opt))
    throw GraphError("normal simulator: 'size' must be a positive integer");
  const auto size = static_cast<std::size_t>(size_opt);
  const double delay_ms = option_or(options, "delay_ms", 0.0);
  SimulatorDefinition def;
  def.shape = {size};
  def.expected_inputs = 2;
  def.fn = [size, delay_ms](std::span<const std::vector<double>> in, Rng& rng) {
    if (in.size() != 2) throw SimulationError("normal simulator expects (mean, sd)");
    if (delay_ms > 0.0)
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
    const auto& mean = in[0];
    const auto& sd = in[1];
    std::vector<double> out(size);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t k = 0; k < size; ++k) {
      const double m = mean.size() == 1 ? mean[0] : mean.at(k);
      const double s = sd.size() == 1 ? sd[0] : sd.at(k);
      if (!(s > 0.0)) throw SimulationError("normal simulator: non-positive standard deviation");
      out[k] = m + s * z(rng);
    }
    return out;
  };
  return def;
}

}  // namespace abc
