#include "abc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "abc/error.hpp"
#include "abc/lorenz.hpp"

namespace abc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& what) { throw ConfigError("config: " + what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) fail("unknown key '" + key + "' in " + where);
}

double number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where + " requires '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(where + "." + key + " must be a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::size_t count(const json& obj, const char* key, const std::string& where) {
  const double v = number(obj, key, where);
  if (v < 0 || v != std::floor(v) || v > 1e15)
    fail(where + "." + key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::size_t count_or(const json& obj, const char* key, std::size_t fallback, const std::string& where) {
  return obj.contains(key) ? count(obj, key, where) : fallback;
}

std::string string_at(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    fail(where + " requires string '" + key + "'");
  return obj.at(key).get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(where + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// ---------------------------------------------------------------- models --

struct BuiltModel {
  ModelGraph graph;
  std::vector<std::string> default_statistics;
  json deviations = json::array();
};

std::size_t size_option(const json& opts, const char* key, std::size_t fallback) {
  const std::size_t n = count_or(opts, key, fallback, "model.options");
  if (n == 0) fail(std::string("model.options.") + key + " must be positive");
  return n;
}

SimulatorFn normal_fn(std::size_t n) {
  return normal_simulator({{"size", static_cast<double>(n)}}).fn;
}

BuiltModel gaussian_grades(const json& opts, std::size_t observed_size) {
  check_keys(opts, "model.options", {"size"});
  const std::size_t n = size_option(opts, "size", observed_size ? observed_size : 100);
  ModelBuilder b;
  auto mu = b.uniform(150.0, 200.0, "mu");
  auto sigma = b.uniform(5.0, 25.0, "sigma");
  auto grade = b.simulator("normal", {mu, sigma}, {n}, normal_fn(n), "grade");
  return {b.build({grade}), {"identity"}};
}

// Illustrative coefficients; only the dependency structure is fixed.
BuiltModel school(const json& opts, bool with_scholarship, std::size_t observed_size,
                  std::size_t observed_scholarship_size) {
  if (with_scholarship)
    check_keys(opts, "model.options", {"size", "scholarship_size"});
  else
    check_keys(opts, "model.options", {"size"});
  const std::size_t n = size_option(opts, "size", observed_size ? observed_size : 50);
  ModelBuilder b;
  auto budget = b.uniform(1.0, 10.0, "school_budget");
  auto class_size = b.normal(800.0 * budget, 1.0, "class_size");
  auto no_teacher = b.normal(20.0 * budget, 1.0, "no_teacher");
  auto hist_mean = b.normal(140.0, 5.0, "historical_mean_grade");
  auto hist_sd = b.normal(1.0, 0.1, "historical_sd_grade");
  auto grade = b.simulator("normal", {hist_mean, hist_sd}, {n}, normal_fn(n),
                           "grade_without_additional_effects");
  auto final_grade = b.apply(BinaryOp::Add, grade - 0.001 * class_size, 0.02 * no_teacher,
                             "final_grade");
  if (!with_scholarship) return {b.build({final_grade}), {"identity"}};

  const std::size_t m =
      size_option(opts, "scholarship_size", observed_scholarship_size ? observed_scholarship_size : n);
  auto sch_mean = b.normal(46.0, 1.0, "historical_mean_scholarship");
  auto sch_sd = b.normal(2.0, 0.1, "historical_sd_scholarship");
  auto sch = b.simulator("normal", {sch_mean, sch_sd}, {m}, normal_fn(m),
                         "scholarship_without_additional_effects");
  auto final_sch = b.apply(BinaryOp::Add, sch, 0.03 * no_teacher, "final_scholarship");
  return {b.build({final_grade, final_sch}), {"identity", "identity"}};
}

BuiltModel normal_mean(const json& opts, std::size_t observed_size) {
  check_keys(opts, "model.options", {"size", "prior_mean", "prior_sd", "sigma"});
  const std::size_t n = size_option(opts, "size", observed_size ? observed_size : 20);
  const double m0 = number_or(opts, "prior_mean", 0.0, "model.options");
  const double s0 = number_or(opts, "prior_sd", 1.0, "model.options");
  const double sigma = number_or(opts, "sigma", 1.0, "model.options");
  if (!(s0 > 0) || !(sigma > 0)) fail("normal-mean standard deviations must be positive");
  ModelBuilder b;
  auto mu = b.normal(m0, s0, "mu");
  auto x = b.simulator("normal", {mu, b.constant(sigma, "sigma")}, {n}, normal_fn(n), "x");
  return {b.build({x}), {"mean"}};
}

BuiltModel lorenz_model(const json& opts) {
  check_keys(opts, "model.options", {"steps", "phi", "forcing"});
  lorenz::ModelOptions o;
  o.steps = size_option(opts, "steps", 1024);
  o.phi = number_or(opts, "phi", 0.4, "model.options");
  o.forcing = number_or(opts, "forcing", 10.0, "model.options");
  BuiltModel out{[&] {
                   try {
                     return lorenz::build_model(o);
                   } catch (const GraphError& e) {
                     fail(e.what());
                   }
                 }(),
                 {"hakkarainen-lorenz"}};
  if (o.steps != 1024)
    out.deviations.push_back("lorenz95 integrated with " + std::to_string(o.steps) +
                             " steps instead of 1024");
  return out;
}

BuiltModel graph_model(const json& model, const SimulatorRegistry& registry) {
  check_keys(model, "model", {"nodes", "roots", "statistics"});
  if (!model.contains("nodes") || !model.at("nodes").is_array()) fail("model.nodes must be an array");
  std::vector<NodeSpec> specs;
  std::size_t literals = 0;
  auto operand = [&](const json& v, const std::string& where) -> NodeId {
    if (v.is_string()) return NodeId(v.get<std::string>());
    if (v.is_number()) {
      NodeId id("_literal" + std::to_string(literals++));
      specs.push_back({id, Hyperparameter{v.get<double>()}});
      return id;
    }
    fail(where + " must be a node id or a number");
  };
  for (const auto& node : model.at("nodes")) {
    const std::string id = string_at(node, "id", "model node");
    const std::string kind = string_at(node, "kind", "model node '" + id + "'");
    const std::string where = "node '" + id + "'";
    if (kind == "constant") {
      check_keys(node, where, {"id", "kind", "value"});
      specs.push_back({id, Hyperparameter{number(node, "value", where)}});
    } else if (kind == "uniform") {
      check_keys(node, where, {"id", "kind", "low", "high", "integer"});
      const bool integer = node.value("integer", false);
      specs.push_back({id, PriorUniform{number(node, "low", where), number(node, "high", where), integer}});
    } else if (kind == "normal") {
      check_keys(node, where, {"id", "kind", "mean", "sd"});
      if (!node.contains("mean") || !node.contains("sd")) fail(where + " requires mean and sd");
      NodeId mean = operand(node.at("mean"), where + ".mean");
      NodeId sd = operand(node.at("sd"), where + ".sd");
      specs.push_back({id, PriorNormal{mean, sd}});
    } else if (kind == "operator") {
      check_keys(node, where, {"id", "kind", "op", "left", "right"});
      const auto op = parse_op(string_at(node, "op", where));
      if (!op) fail(where + ": unknown operator '" + node.at("op").get<std::string>() + "'");
      if (!node.contains("left") || !node.contains("right")) fail(where + " requires left and right");
      NodeId left = operand(node.at("left"), where + ".left");
      NodeId right = operand(node.at("right"), where + ".right");
      specs.push_back({id, OperatorNode{*op, left, right}});
    } else if (kind == "simulator") {
      check_keys(node, where, {"id", "kind", "simulator", "inputs", "options"});
      const std::string name = string_at(node, "simulator", where);
      if (!registry.contains(name)) fail(where + ": unknown simulator '" + name + "'");
      SimulatorOptions options;
      if (node.contains("options")) {
        if (!node.at("options").is_object()) fail(where + ".options must be an object");
        for (const auto& [k, v] : node.at("options").items()) {
          if (!v.is_number()) fail(where + ".options." + k + " must be a number");
          options[k] = v.get<double>();
        }
      }
      SimulatorDefinition def = [&] {
        try {
          return registry.make(name, options);
        } catch (const GraphError& e) {
          fail(e.what());
        }
      }();
      std::vector<NodeId> inputs;
      if (node.contains("inputs")) {
        if (!node.at("inputs").is_array()) fail(where + ".inputs must be an array");
        for (const auto& in : node.at("inputs")) inputs.push_back(operand(in, where + ".inputs"));
      }
      if (def.expected_inputs && inputs.size() != def.expected_inputs)
        fail(where + ": simulator '" + name + "' takes " + std::to_string(def.expected_inputs) +
             " inputs");
      specs.push_back({id, Simulator{name, std::move(inputs), def.shape, def.fn}});
    } else {
      fail(where + ": unknown kind '" + kind + "'");
    }
  }
  std::vector<NodeId> roots;
  if (!model.contains("roots") || !model.at("roots").is_array()) fail("model.roots must be an array");
  for (const auto& r : model.at("roots")) {
    if (!r.is_string()) fail("model.roots entries must be node ids");
    roots.emplace_back(r.get<std::string>());
  }
  try {
    BuiltModel out{ModelGraph::build(std::move(specs), roots), {}};
    out.default_statistics.assign(out.graph.num_roots(), "identity");
    return out;
  } catch (const GraphError& e) {
    fail(e.what());
  }
}

// ------------------------------------------------------------ observed --

std::vector<double> read_numbers_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open observed data file " + path.string());
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool text = false;
    while (ss >> cell) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        text = true;
        break;
      }
      row.push_back(v);
    }
    if (text) {
      if (first) {
        first = false;
        continue;
      }
      fail("non-numeric value in " + path.string());
    }
    first = false;
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : fs::absolute(base / path).lexically_normal();
}

// Returns raw arrays per root; shape checked once the graph exists. Relative
// paths are rewritten in `echo` to absolute ones so the echo stands alone.
std::vector<DataArray> read_observed(json& echo, const fs::path& base) {
  if (!echo.contains("observed")) fail("missing 'observed'");
  json& obs = echo["observed"];
  if (obs.is_object() || (obs.is_array() && !obs.empty() && obs.front().is_number()))
    obs = json::array({obs});
  if (!obs.is_array() || obs.empty()) fail("'observed' must list one dataset per root");
  std::vector<DataArray> out;
  for (auto& entry : obs) {
    if (entry.is_array()) {
      out.push_back(DataArray::vector(numbers(entry, "observed values")));
    } else if (entry.is_object()) {
      check_keys(entry, "observed entry", {"csv", "trajectory_csv", "values"});
      if (entry.contains("values")) {
        out.push_back(DataArray::vector(numbers(entry.at("values"), "observed.values")));
      } else if (entry.contains("csv")) {
        const auto path = resolve(base, string_at(entry, "csv", "observed entry"));
        entry["csv"] = path.string();
        out.push_back(DataArray::vector(read_numbers_csv(path)));
      } else if (entry.contains("trajectory_csv")) {
        const auto path = resolve(base, string_at(entry, "trajectory_csv", "observed entry"));
        entry["trajectory_csv"] = path.string();
        std::ifstream in(path);
        if (!in) fail("cannot open observed data file " + path.string());
        out.push_back(lorenz::read_trajectory_csv(in));
      } else {
        fail("observed entry needs 'values', 'csv' or 'trajectory_csv'");
      }
    } else {
      fail("observed entries must be arrays or objects");
    }
  }
  return out;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ------------------------------------------------------------- pieces --

std::vector<std::string> names_per_root(const json& v, std::size_t roots, const std::string& where) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.assign(roots, v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& s : v) {
      if (!s.is_string()) fail(where + " entries must be strings");
      out.push_back(s.get<std::string>());
    }
  } else {
    fail(where + " must be a string or an array of strings");
  }
  if (out.size() != roots)
    fail(where + " lists " + std::to_string(out.size()) + " entries for " + std::to_string(roots) +
         " roots");
  return out;
}

DistanceKind distance_kind(const std::string& name) {
  if (name == "euclidean") return DistanceKind::Euclidean;
  if (name == "logreg") return DistanceKind::LogReg;
  fail("unknown distance '" + name + "'");
}

KernelKind kernel_kind(const std::string& name) {
  if (name == "gaussian") return KernelKind::MultivariateGaussian;
  if (name == "student-t") return KernelKind::MultivariateStudentT;
  if (name == "random-walk") return KernelKind::DiscreteRandomWalk;
  fail("unknown kernel '" + name + "'");
}

JointKernel parse_kernel(const json& v, const ModelGraph& graph) {
  try {
    if (v.is_string()) {
      const auto name = v.get<std::string>();
      if (name == "default") return JointKernel::default_for(graph);
      return JointKernel::uniform_kind(graph, kernel_kind(name));
    }
    check_keys(v, "kernel", {"kind", "df", "components"});
    const double df = number_or(v, "df", 3.0, "kernel");
    if (!(df > 0)) fail("kernel.df must be positive");
    if (v.contains("components")) {
      if (v.contains("kind")) fail("kernel: give either 'kind' or 'components'");
      const auto names = graph.parameter_names();
      std::vector<KernelSpec> comps;
      for (const auto& c : v.at("components")) {
        check_keys(c, "kernel component", {"kind", "targets", "df"});
        KernelSpec spec;
        spec.kind = kernel_kind(string_at(c, "kind", "kernel component"));
        spec.df = number_or(c, "df", df, "kernel component");
        if (!(spec.df > 0)) fail("kernel component df must be positive");
        if (!c.contains("targets") || !c.at("targets").is_array())
          fail("kernel component requires 'targets'");
        for (const auto& t : c.at("targets")) {
          if (!t.is_string()) fail("kernel targets must be parameter names");
          const auto it = std::find(names.begin(), names.end(), t.get<std::string>());
          if (it == names.end()) fail("kernel target '" + t.get<std::string>() + "' is not a free parameter");
          spec.targets.push_back(static_cast<std::size_t>(it - names.begin()));
        }
        comps.push_back(std::move(spec));
      }
      return JointKernel(std::move(comps), graph.num_parameters());
    }
    const std::string kind = v.contains("kind") ? string_at(v, "kind", "kernel") : "default";
    if (kind == "default") return JointKernel::default_for(graph);
    return JointKernel::uniform_kind(graph, kernel_kind(kind), df);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(e.what());
  }
}

}  // namespace

SimulatorRegistry builtin_simulators() {
  SimulatorRegistry r;
  r.register_simulator("normal", normal_simulator);
  lorenz::register_simulator(r);
  return r;
}

std::vector<std::string> builtin_model_names() {
  return {"gaussian-grades", "school", "school-scholarship", "lorenz95", "normal-mean"};
}

StatisticsSpec statistics_by_name(const std::string& name) {
  if (name == "identity") return StatisticsSpec::identity();
  if (name == "hakkarainen-lorenz") return StatisticsSpec::hakkarainen_lorenz();
  if (name == "mean")
    return StatisticsSpec::custom("mean", [](const DataArray& a) {
      if (a.values.empty()) throw ShapeError("mean of an empty array");
      return std::vector<double>{std::accumulate(a.values.begin(), a.values.end(), 0.0) /
                                 static_cast<double>(a.values.size())};
    });
  fail("unknown statistics '" + name + "'");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig load_experiment(const json& config, const fs::path& base_dir) {
  check_keys(config, "experiment",
             {"model", "observed", "statistics", "distance", "approx_likelihood", "kernel",
              "sampler", "executor", "seed", "output"});
  ExperimentConfig out;
  out.raw = config;
  const auto observed = read_observed(out.raw, base_dir);

  // Model.
  if (!config.contains("model")) fail("missing 'model'");
  const json& model = config.at("model");
  auto size_of = [&](std::size_t i) -> std::size_t {
    return i < observed.size() && observed[i].shape.size() == 1 ? observed[i].size() : 0;
  };
  const std::size_t first_size = size_of(0);
  const auto registry = builtin_simulators();
  BuiltModel built = [&]() -> BuiltModel {
    std::string name;
    json opts = json::object();
    if (model.is_string()) {
      name = model.get<std::string>();
    } else if (model.is_object() && model.contains("builtin")) {
      check_keys(model, "model", {"builtin", "options"});
      name = string_at(model, "builtin", "model");
      if (model.contains("options")) opts = model.at("options");
    } else if (model.is_object()) {
      return graph_model(model, registry);
    } else {
      fail("'model' must be a built-in name or a graph");
    }
    if (name == "gaussian-grades") return gaussian_grades(opts, first_size);
    if (name == "school") return school(opts, false, first_size, 0);
    if (name == "school-scholarship") return school(opts, true, first_size, size_of(1));
    if (name == "normal-mean") return normal_mean(opts, first_size);
    if (name == "lorenz95") return lorenz_model(opts);
    fail("unknown built-in model '" + name + "'");
  }();
  out.graph = std::make_shared<ModelGraph>(std::move(built.graph));
  const ModelGraph& graph = *out.graph;
  const std::size_t roots = graph.num_roots();

  if (observed.size() != roots)
    fail("model has " + std::to_string(roots) + " roots but " + std::to_string(observed.size()) +
         " observed datasets were given");
  for (std::size_t r = 0; r < roots; ++r) {
    DataArray a = observed[r];
    const auto& shape = graph.root_shape(r);
    if (a.shape != shape) {
      if (a.size() != product(shape))
        fail("observed dataset " + std::to_string(r) + " has " + std::to_string(a.size()) +
             " values, the model produces " + std::to_string(product(shape)));
      a.shape = shape;
    }
    out.observed.arrays.push_back(std::move(a));
  }

  // Statistics.
  std::vector<StatisticsSpec> stats;
  for (const auto& name : config.contains("statistics")
                              ? names_per_root(config.at("statistics"), roots, "statistics")
                              : built.default_statistics)
    stats.push_back(statistics_by_name(name));
  for (std::size_t r = 0; r < roots; ++r) {
    try {
      stats[r].extract(out.observed.arrays[r]);
    } catch (const Error& e) {
      fail("statistics '" + stats[r].name() + "' cannot summarize observed dataset " +
           std::to_string(r) + ": " + e.what());
    }
  }

  // Sampler.
  if (!config.contains("sampler")) fail("missing 'sampler'");
  const json& s = config.at("sampler");
  const std::string kind = string_at(s, "kind", "sampler");
  try {
    if (kind == "rejection") {
      check_keys(s, "sampler", {"kind", "n_samples", "epsilon", "max_attempts_per_particle"});
      out.sampler = SamplerKind::Rejection;
      out.rejection_samples = count(s, "n_samples", "sampler");
      out.rejection_epsilon = number(s, "epsilon", "sampler");
      out.pmcabc.max_attempts_per_particle =
          count_or(s, "max_attempts_per_particle", 100000, "sampler");
      if (out.rejection_samples == 0) fail("sampler.n_samples must be positive");
      if (!(out.rejection_epsilon > 0)) fail("sampler.epsilon must be positive");
    } else if (kind == "pmcabc") {
      check_keys(s, "sampler", {"kind", "n_samples", "generations", "epsilon_schedule",
                                "epsilon_percentile", "max_attempts_per_particle"});
      out.sampler = SamplerKind::Pmcabc;
      auto& c = out.pmcabc;
      c.n_samples = count(s, "n_samples", "sampler");
      c.generations = count(s, "generations", "sampler");
      if (!s.contains("epsilon_schedule")) fail("pmcabc requires 'epsilon_schedule'");
      c.epsilon_schedule = numbers(s.at("epsilon_schedule"), "sampler.epsilon_schedule");
      c.epsilon_percentile = number_or(s, "epsilon_percentile", 0.1, "sampler");
      c.max_attempts_per_particle = count_or(s, "max_attempts_per_particle", 100000, "sampler");
      c.validate();
    } else if (kind == "pmc") {
      check_keys(s, "sampler", {"kind", "n_samples", "generations", "max_attempts_per_particle"});
      out.sampler = SamplerKind::Pmc;
      out.pmc.n_samples = count(s, "n_samples", "sampler");
      out.pmc.generations = count(s, "generations", "sampler");
      out.pmc.max_attempts_per_particle = count_or(s, "max_attempts_per_particle", 1000, "sampler");
    } else {
      fail("unknown sampler '" + kind + "'");
    }
  } catch (const SamplerError& e) {
    fail(e.what());
  }

  // Discrepancy or approximate likelihood.
  if (out.sampler == SamplerKind::Pmc) {
    if (!config.contains("approx_likelihood")) fail("sampler 'pmc' requires 'approx_likelihood'");
    if (config.contains("distance")) fail("sampler 'pmc' does not use 'distance'");
    const json& al = config.at("approx_likelihood");
    check_keys(al, "approx_likelihood", {"kind", "n_sim"});
    const std::string alk = string_at(al, "kind", "approx_likelihood");
    if (alk != "synthetic") fail("unknown approx_likelihood '" + alk + "'");
    out.pmc.n_sim_per_theta = count_or(al, "n_sim", 100, "approx_likelihood");
    auto sl = std::make_shared<SyntheticLikelihood>(stats);
    try {
      out.pmc.validate(sl->statistics_dim(out.observed));
    } catch (const SamplerError& e) {
      fail(e.what());
    }
    out.approx_likelihood = std::move(sl);
  } else {
    if (config.contains("approx_likelihood"))
      fail("sampler '" + kind + "' does not use 'approx_likelihood'");
    std::vector<std::string> kinds(roots, "euclidean");
    std::vector<double> weights;
    if (config.contains("distance")) {
      const json& d = config.at("distance");
      if (d.is_string()) {
        kinds = names_per_root(d, roots, "distance");
      } else {
        check_keys(d, "distance", {"kind", "weights"});
        if (d.contains("kind")) kinds = names_per_root(d.at("kind"), roots, "distance.kind");
        if (d.contains("weights")) weights = numbers(d.at("weights"), "distance.weights");
      }
    }
    std::vector<Distance::Component> comps;
    for (std::size_t r = 0; r < roots; ++r) comps.push_back({stats[r], distance_kind(kinds[r])});
    try {
      out.distance.emplace(std::move(comps), std::move(weights));
    } catch (const Error& e) {
      fail(e.what());
    }
  }

  if (out.sampler != SamplerKind::Rejection)
    out.kernel = parse_kernel(config.value("kernel", json("default")), graph);
  else if (config.contains("kernel"))
    fail("sampler 'rejection' does not use 'kernel'");

  // Executor, seed, output.
  if (config.contains("executor")) {
    const json& e = config.at("executor");
    check_keys(e, "executor", {"mode", "workers"});
    const auto mode = parse_mode(e.value("mode", std::string("sequential")));
    if (!mode) fail("executor.mode must be sequential, static or dynamic");
    out.executor.mode = *mode;
    out.executor.n_workers = count_or(e, "workers", 1, "executor");
    if (out.executor.n_workers == 0) fail("executor.workers must be positive");
  }
  if (!config.contains("seed")) fail("missing 'seed'");
  const json& seed = config.at("seed");
  if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
    fail("seed must be a non-negative integer");
  out.seed = config.at("seed").get<std::uint64_t>();
  if (config.contains("output")) out.output = string_at(config, "output", "experiment");

  out.raw["deviations"] = built.deviations;
  if (built.deviations.empty()) out.raw.erase("deviations");
  return out;
}

Journal run_experiment(const ExperimentConfig& config) {
  const InferenceProblem problem{*config.graph, config.observed};
  Journal j;
  switch (config.sampler) {
    case SamplerKind::Rejection:
      j = rejection_abc(problem, *config.distance, config.rejection_epsilon,
                        config.rejection_samples, config.executor, config.seed,
                        config.pmcabc.max_attempts_per_particle);
      break;
    case SamplerKind::Pmcabc:
      j = pmcabc_sample(problem, *config.distance, *config.kernel, config.pmcabc,
                        config.executor, config.seed);
      break;
    case SamplerKind::Pmc:
      j = pmc_sample(problem, *config.approx_likelihood, *config.kernel, config.pmc,
                     config.executor, config.seed);
      break;
  }
  json echo = config.raw;
  json deviations = echo.contains("deviations") ? echo["deviations"] : json::array();
  echo.erase("deviations");
  j.config["experiment"] = std::move(echo);
  if (!deviations.empty()) j.config["deviations"] = std::move(deviations);
  return j;
}

std::string journal_numeric_fingerprint(const Journal& journal) {
  json doc = journal_to_json(journal, false);
  // The executor block legitimately differs between otherwise identical runs.
  if (doc.contains("config")) {
    doc["config"].erase("executor");
    if (doc["config"].contains("experiment")) doc["config"]["experiment"].erase("executor");
  }
  return doc.dump();
}

BenchResult bench_experiment(const json& config, const fs::path& base_dir,
                             const std::vector<std::size_t>& worker_counts, ExecutionMode mode) {
  if (worker_counts.empty()) fail("bench needs at least one worker count");
  BenchResult out;
  std::string reference;
  for (std::size_t i = 0; i < worker_counts.size(); ++i) {
    if (worker_counts[i] == 0) fail("worker counts must be positive");
    json c = config;
    c["executor"] = {{"mode", mode_name(mode)}, {"workers", worker_counts[i]}};
    const ExperimentConfig exp = load_experiment(c, base_dir);
    const auto t0 = std::chrono::steady_clock::now();
    const Journal j = run_experiment(exp);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.records.push_back({worker_counts[i], wall, i == 0});
    const std::string fp = journal_numeric_fingerprint(j);
    if (i == 0)
      reference = fp;
    else if (fp != reference)
      out.journals_identical = false;
  }
  return out;
}

std::vector<double> lognormal_durations(std::size_t n, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::lognormal_distribution<double> dist(0.0, sigma);
  std::vector<double> out(n);
  for (auto& d : out) d = dist(rng);
  return out;
}

}  // namespace abc
