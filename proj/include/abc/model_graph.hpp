#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "abc/rng.hpp"

namespace abc {

struct NodeId {
  std::string value;

  NodeId() = default;
  NodeId(std::string v) : value(std::move(v)) {}
  NodeId(const char* v) : value(v) {}

  auto operator<=>(const NodeId&) const = default;
};

enum class BinaryOp { Add, Subtract, Multiply, Divide, Power };

std::string_view op_symbol(BinaryOp op);
std::optional<BinaryOp> parse_op(std::string_view symbol);

/// Applies `op` to two scalars. Throws SimulationError on division by zero,
/// a non-real power, or a non-finite result.
double apply_op(BinaryOp op, double left, double right);

/// A flat real array with a declared row-major shape.
struct DataArray {
  std::vector<double> values;
  std::vector<std::size_t> shape;

  static DataArray vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return DataArray{std::move(v), {n}};
  }
  std::size_t size() const { return values.size(); }
};

/// One array per root model, in root order.
struct DataSet {
  std::vector<DataArray> arrays;
};

/// Values of the free parameters, laid out in ModelGraph::free_parameters()
/// order. Integer-valued parameters are stored as integral doubles.
struct ParameterVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const ParameterVector&) const = default;
};

using SimulatorFn =
    std::function<std::vector<double>(std::span<const std::vector<double>> inputs, Rng& rng)>;

struct Hyperparameter {
  double value = 0.0;
};

/// Uniform prior. `integer` restricts the support to the integers in
/// [low, high]. low == high is allowed and acts as a point mass.
struct PriorUniform {
  double low = 0.0;
  double high = 1.0;
  bool integer = false;
};

struct PriorNormal {
  NodeId mean;
  NodeId sd;
};

struct OperatorNode {
  BinaryOp op = BinaryOp::Add;
  NodeId left;
  NodeId right;
};

/// Data-producing model. Its output is never a free parameter.
struct Simulator {
  std::string name;
  std::vector<NodeId> inputs;
  std::vector<std::size_t> shape;
  SimulatorFn fn;
};

using NodeKind = std::variant<Hyperparameter, PriorUniform, PriorNormal, OperatorNode, Simulator>;

struct NodeSpec {
  NodeId id;
  NodeKind kind;
};

/// Immutable directed acyclic graph of random variables.
///
/// Nodes whose values depend only on hyperparameters and priors are
/// "parameter level"; simulators and anything downstream of them are "data
/// level". Priors may only take parameter-level inputs.
class ModelGraph {
 public:
  static ModelGraph build(std::vector<NodeSpec> specs, std::vector<NodeId> roots);

  std::size_t num_parameters() const { return free_.size(); }
  std::size_t num_roots() const { return roots_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }

  std::vector<NodeId> free_parameters() const;
  std::vector<std::string> parameter_names() const;
  std::vector<NodeId> roots() const;
  bool is_integer_parameter(std::size_t slot) const;
  const std::vector<std::size_t>& root_shape(std::size_t root) const;
  std::vector<NodeId> topological_order() const;

  ParameterVector sample_prior(Rng& rng) const;
  double prior_density(const ParameterVector& theta) const;

  /// One dataset with the free parameters pinned to `theta`.
  DataSet simulate(const ParameterVector& theta, Rng& rng) const;
  std::vector<DataSet> forward_simulate(const ParameterVector& theta, std::size_t n,
                                        Rng& rng) const;

 private:
  struct Node {
    NodeId id;
    NodeKind kind;
    std::vector<std::size_t> parents;
    std::vector<std::size_t> shape;
    bool data_level = false;
  };

  void check_layout(const ParameterVector& theta) const;
  std::vector<std::vector<double>> evaluate(const ParameterVector* theta, Rng* rng,
                                            bool include_data,
                                            ParameterVector* drawn) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> free_;
  std::vector<std::size_t> roots_;
  std::vector<std::ptrdiff_t> slot_of_;
};

ModelGraph build_graph(std::vector<NodeSpec> specs, std::vector<NodeId> roots);
ParameterVector sample_prior(const ModelGraph& graph, Rng& rng);
double prior_density(const ModelGraph& graph, const ParameterVector& theta);
std::vector<DataSet> forward_simulate(const ModelGraph& graph, const ParameterVector& theta,
                                      std::size_t n, Rng& rng);

class ModelBuilder;

/// Handle to a node under construction; supports arithmetic that creates
/// operator nodes.
class Var {
 public:
  Var(ModelBuilder& builder, NodeId id) : builder_(&builder), id_(std::move(id)) {}
  const NodeId& id() const { return id_; }
  ModelBuilder& builder() const { return *builder_; }

 private:
  ModelBuilder* builder_;
  NodeId id_;
};

/// A node handle or a literal that will become a hyperparameter node.
class Operand {
 public:
  Operand(Var v) : value_(std::move(v)) {}
  Operand(double v) : value_(v) {}
  const std::variant<Var, double>& get() const { return value_; }

 private:
  std::variant<Var, double> value_;
};

/// Incremental graph construction with arithmetic sugar:
///
///     ModelBuilder b;
///     auto budget = b.uniform(1, 10, "school_budget");
///     auto size = b.normal(800.0 * budget, 1.0, "class_size");
class ModelBuilder {
 public:
  Var constant(double value, std::string name = {});
  Var uniform(double low, double high, std::string name = {});
  Var integer_uniform(double low, double high, std::string name = {});
  Var normal(Operand mean, Operand sd, std::string name = {});
  Var simulator(std::string simulator_name, std::vector<Operand> inputs,
                std::vector<std::size_t> shape, SimulatorFn fn, std::string name = {});
  Var apply(BinaryOp op, Operand left, Operand right, std::string name = {});

  Var lift(const Operand& operand);
  const std::vector<NodeSpec>& specs() const { return specs_; }
  ModelGraph build(const std::vector<Var>& roots) const;

 private:
  NodeId next_id(std::string name);
  std::vector<NodeSpec> specs_;
  std::size_t counter_ = 0;
};

Var operator+(const Var& a, const Operand& b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, const Operand& b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, const Operand& b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, const Operand& b);
Var operator/(double a, const Var& b);
Var pow(const Var& a, const Operand& b);

using SimulatorOptions = std::map<std::string, double>;

struct SimulatorDefinition {
  std::vector<std::size_t> shape;
  SimulatorFn fn;
  std::size_t expected_inputs = 0;
};

using SimulatorFactory = std::function<SimulatorDefinition(const SimulatorOptions&)>;

/// Named simulator factories so configurations can refer to simulators by
/// string.
class SimulatorRegistry {
 public:
  void register_simulator(std::string name, SimulatorFactory factory);
  bool contains(std::string_view name) const;
  SimulatorDefinition make(std::string_view name, const SimulatorOptions& options) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, SimulatorFactory, std::less<>> factories_;
};

/// Gaussian observations: inputs (mean, sd), option `size` (default 1).
/// Option `delay_ms` makes each call sleep, for controlled benchmarks.
SimulatorDefinition normal_simulator(const SimulatorOptions& options);

double option_or(const SimulatorOptions& options, const std::string& key, double fallback);

}  // namespace abc
