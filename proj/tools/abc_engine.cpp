// abc-engine: command-line front end for the ABC inference engine.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abc/error.hpp"
#include "abc/experiment.hpp"
#include "abc/lorenz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string mode;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_config = true) {
  auto* c = cmd->add_option("--config", o.config, "Experiment configuration (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed, overrides the config");
  cmd->add_option("--workers", o.workers,
                  "Worker threads, overrides the config (fallback: $ABC_ENGINE_WORKERS)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "Executor mode")
      ->check(CLI::IsMember({"sequential", "static", "dynamic"}));
  cmd->add_option("--out", o.out, "Output path");
}

std::optional<std::size_t> env_workers() {
  const char* v = std::getenv("ABC_ENGINE_WORKERS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n <= 0) throw abc::ConfigError("ABC_ENGINE_WORKERS must be a positive integer");
  return static_cast<std::size_t>(n);
}

// Command-line flags win over the config file; the environment variable only
// fills in a worker count that neither of them sets.
json apply_overrides(json config, const CommonOptions& o) {
  if (!config.is_object()) throw abc::ConfigError("config: top level must be an object");
  if (o.seed) config["seed"] = *o.seed;
  json executor = config.value("executor", json::object());
  if (!executor.is_object()) throw abc::ConfigError("config: executor must be an object");
  if (!o.mode.empty()) executor["mode"] = o.mode;
  if (o.workers) {
    executor["workers"] = *o.workers;
  } else if (!executor.contains("workers")) {
    if (auto w = env_workers()) executor["workers"] = *w;
  }
  if (executor.contains("workers") && !executor.contains("mode")) executor["mode"] = "dynamic";
  if (!executor.empty()) config["executor"] = executor;
  if (!o.out.empty()) config["output"] = o.out;
  return config;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw abc::Error("cannot write " + path.string());
  out << text;
}

void print_posterior(const abc::Journal& j) {
  if (j.generations.empty()) return;
  const std::size_t last = j.generations.size() - 1;
  const auto mean = abc::journal_posterior_mean(j, last);
  const auto cov = abc::journal_posterior_cov(j, last);
  std::cout << std::setprecision(6);
  std::cout << "posterior (generation " << last + 1 << " of " << j.generations.size() << ", "
            << j.generations[last].particles.size() << " particles)\n";
  for (std::size_t i = 0; i < mean.size(); ++i)
    std::cout << "  mean " << j.parameter_names[i] << " = " << mean[i] << '\n';
  std::cout << "  covariance\n";
  for (Eigen::Index r = 0; r < cov.rows(); ++r) {
    std::cout << "   ";
    for (Eigen::Index c = 0; c < cov.cols(); ++c) std::cout << ' ' << std::setw(14) << cov(r, c);
    std::cout << '\n';
  }
}

abc::ExperimentConfig load(const CommonOptions& o, json* effective = nullptr) {
  const fs::path path(o.config);
  json cfg = apply_overrides(abc::read_json_file(path), o);
  if (effective) *effective = cfg;
  return abc::load_experiment(cfg, path.parent_path());
}

int cmd_infer(const CommonOptions& o) {
  const auto exp = load(o);
  const auto journal = abc::run_experiment(exp);
  const std::string out = exp.output.empty() ? "journal.json" : exp.output;
  write_file(out, abc::journal_to_json(journal).dump(1) + "\n");
  print_posterior(journal);
  std::cout << "journal written to " << out << '\n';
  return kExitOk;
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long n = 0;
    try {
      n = std::stol(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || n <= 0) throw abc::ConfigError("invalid worker count '" + item + "'");
    out.push_back(static_cast<std::size_t>(n));
  }
  if (out.empty()) throw abc::ConfigError("empty worker-count list");
  return out;
}

int cmd_bench(const CommonOptions& o, const std::string& counts_text) {
  const auto counts = parse_counts(counts_text);
  json cfg;
  load(o, &cfg);  // validates before any run
  const auto mode = abc::parse_mode(o.mode.empty() ? "dynamic" : o.mode);
  const auto result = abc::bench_experiment(cfg, fs::path(o.config).parent_path(), counts, *mode);
  std::ostringstream csv;
  abc::write_scaling_csv(csv, result.records);
  const std::string out = o.out.empty() ? "scaling.csv" : o.out;
  write_file(out, csv.str());
  std::cout << csv.str();
  std::cout << "journals identical across worker counts: "
            << (result.journals_identical ? "yes" : "NO") << '\n';
  return result.journals_identical ? kExitOk : kExitRuntime;
}

std::vector<double> read_durations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw abc::ConfigError("cannot open durations file " + path.string());
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    for (char& c : tok)
      if (c == ',') c = ' ';
    std::stringstream ss(tok);
    std::string cell;
    while (ss >> cell) {
      char* end = nullptr;
      const double d = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0' || !(d >= 0) || !std::isfinite(d))
        throw abc::ConfigError("malformed duration '" + cell + "' in " + path.string());
      out.push_back(d);
    }
  }
  if (out.empty()) throw abc::ConfigError("durations file " + path.string() + " is empty");
  return out;
}

struct ScheduleOptions {
  std::string durations;
  std::size_t tasks = 200;
  double sigma = 1.5;
  std::uint64_t seed = 1;
  std::size_t workers = 8;
  std::string policy = "both";
  std::string out = "schedule";
};

int cmd_schedule_sim(const ScheduleOptions& o) {
  abc::ScheduleInstance inst;
  inst.n_workers = o.workers;
  json source;
  if (!o.durations.empty()) {
    inst.durations = read_durations(o.durations);
    source = {{"durations_file", o.durations}};
  } else {
    inst.durations = abc::lognormal_durations(o.tasks, o.sigma, o.seed);
    source = {{"generator", "lognormal"}, {"tasks", o.tasks}, {"sigma", o.sigma}, {"seed", o.seed}};
  }
  std::vector<std::pair<std::string, abc::SchedulePolicy>> policies;
  if (o.policy != "dynamic") policies.emplace_back("static", abc::SchedulePolicy::Static);
  if (o.policy != "static") policies.emplace_back("dynamic", abc::SchedulePolicy::DynamicGreedy);

  json report{{"source", source}, {"n_workers", inst.n_workers}, {"n_tasks", inst.durations.size()}};
  const fs::path dir(o.out);
  fs::create_directories(dir);
  for (const auto& [name, policy] : policies) {
    const auto r = abc::simulate_schedule(inst, policy);
    const auto imb = abc::imbalance_report(r.traces, inst.n_workers);
    report["policies"][name] = abc::to_json(imb);
    std::ostringstream csv;
    abc::write_imbalance_csv(csv, imb);
    write_file(dir / (name + "_workers.csv"), csv.str());
    std::cout << std::setw(8) << name << "  makespan " << std::setprecision(6) << r.makespan
              << "  imbalance " << imb.imbalance_ratio << "  idle " << imb.idle_fraction << '\n';
  }
  write_file(dir / "schedule.json", report.dump(2) + "\n");
  return kExitOk;
}

struct LorenzDemoOptions {
  std::size_t steps = 1024;
  std::uint64_t seed = 20190101;
  double theta1 = 2.0;
  double theta2 = 0.1;
  double phi = 0.4;
  std::string out = "lorenz";
  bool infer = false;
  std::size_t n_samples = 64;
  std::size_t generations = 3;
  std::optional<std::size_t> workers;
  std::string mode = "dynamic";
};

int cmd_lorenz_demo(const LorenzDemoOptions& o) {
  abc::lorenz::Params p;
  p.theta1 = o.theta1;
  p.theta2 = o.theta2;
  p.phi = o.phi;
  p.steps = o.steps;
  p.validate();
  abc::Rng rng(o.seed);
  const auto traj = abc::lorenz::simulate(p, abc::lorenz::default_initial_state(p.forcing), rng);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::string stem = "lorenz_T" + std::to_string(o.steps);
  std::ostringstream csv;
  abc::lorenz::write_trajectory_csv(csv, traj);
  write_file(dir / (stem + ".csv"), csv.str());
  json meta{{"theta", {o.theta1, o.theta2}},
            {"seed", o.seed},
            {"steps", o.steps},
            {"t_end", p.t_end},
            {"dt", p.dt()},
            {"phi", p.phi},
            {"forcing", p.forcing},
            {"initial_state", "F on every variable, +0.01 on y1"},
            {"rng", "mt19937_64, 40 standard normals per step, drawn before integration"},
            {"layout", "rows are time points t=0..steps, columns y1..y40"},
            {"shape", {abc::lorenz::kDim, o.steps + 1}}};
  if (o.steps != 1024) meta["deviation"] = "steps=" + std::to_string(o.steps) + " instead of 1024";
  write_file(dir / (stem + ".json"), meta.dump(2) + "\n");
  std::cout << "trajectory " << abc::lorenz::kDim << "x" << o.steps + 1 << " written to "
            << (dir / (stem + ".csv")).string() << '\n';
  if (!o.infer) return kExitOk;

  // Thresholds follow the data: the first generation accepts everything
  // within the prior-predictive spread and later ones adapt by quantile.
  json cfg{{"model", {{"builtin", "lorenz95"}, {"options", {{"steps", o.steps}, {"phi", o.phi}}}}},
           {"observed", json::array({{{"trajectory_csv", fs::absolute(dir / (stem + ".csv")).string()}}})},
           {"statistics", "hakkarainen-lorenz"},
           {"distance", "euclidean"},
           {"sampler",
            {{"kind", "pmcabc"},
             {"n_samples", o.n_samples},
             {"generations", o.generations},
             {"epsilon_schedule", std::vector<double>(o.generations, 0.0)},
             {"epsilon_percentile", 0.5}}},
           {"seed", o.seed}};
  cfg["sampler"]["epsilon_schedule"][0] = 1e9;
  std::size_t workers = o.workers.value_or(env_workers().value_or(1));
  cfg["executor"] = {{"mode", o.mode}, {"workers", workers}};
  const auto exp = abc::load_experiment(cfg, ".");
  const auto journal = abc::run_experiment(exp);
  write_file(dir / (stem + "_journal.json"), abc::journal_to_json(journal).dump(1) + "\n");
  print_posterior(journal);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"abc-engine: likelihood-free Bayesian inference with parallel population samplers"};
  app.require_subcommand(1);

  CommonOptions infer_opts;
  auto* infer = app.add_subcommand("infer", "Run the configured sampler and write a journal");
  add_common(infer, infer_opts);

  CommonOptions bench_opts;
  std::string counts = "1,2,4";
  auto* bench = app.add_subcommand("bench", "Run the same inference per worker count, write a scaling CSV");
  add_common(bench, bench_opts);
  bench->add_option("--counts", counts, "Comma-separated worker counts; the first is the baseline")
      ->capture_default_str();

  ScheduleOptions sched;
  auto* schedule = app.add_subcommand("schedule-sim", "Replay a task list under static and greedy scheduling");
  schedule->add_option("--durations", sched.durations, "File of task durations (whitespace or comma separated)")
      ->check(CLI::ExistingFile);
  schedule->add_option("--tasks", sched.tasks, "Generated task count")->capture_default_str();
  schedule->add_option("--sigma", sched.sigma, "Lognormal sigma of generated durations")->capture_default_str();
  schedule->add_option("--seed", sched.seed, "Generator seed")->capture_default_str();
  schedule->add_option("--workers", sched.workers, "Worker count")->check(CLI::PositiveNumber)->capture_default_str();
  schedule->add_option("--policy", sched.policy, "static, dynamic or both")
      ->check(CLI::IsMember({"static", "dynamic", "both"}))
      ->capture_default_str();
  schedule->add_option("--out", sched.out, "Output directory")->capture_default_str();

  LorenzDemoOptions demo;
  auto* lorenz = app.add_subcommand("lorenz-demo", "Generate the Lorenz-95 observed dataset, optionally infer");
  lorenz->add_option("--steps", demo.steps, "Integration steps over 4 time units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  lorenz->add_option("--seed", demo.seed, "Noise seed")->capture_default_str();
  lorenz->add_option("--theta1", demo.theta1, "Closure intercept")->capture_default_str();
  lorenz->add_option("--theta2", demo.theta2, "Closure slope")->capture_default_str();
  lorenz->add_option("--phi", demo.phi, "Forcing autocorrelation")->capture_default_str();
  lorenz->add_option("--out", demo.out, "Output directory")->capture_default_str();
  lorenz->add_flag("--infer", demo.infer, "Run a small PMCABC inference on the generated data");
  lorenz->add_option("--samples", demo.n_samples, "Particles for --infer")->capture_default_str();
  lorenz->add_option("--generations", demo.generations, "Generations for --infer")->capture_default_str();
  lorenz->add_option("--workers", demo.workers, "Worker threads for --infer")->check(CLI::PositiveNumber);
  lorenz->add_option("--mode", demo.mode, "Executor mode for --infer")
      ->check(CLI::IsMember({"sequential", "static", "dynamic"}))
      ->capture_default_str();

  app.footer("Exit codes: 0 success, 2 configuration error, 3 runtime error.\n"
             "ABC_ENGINE_WORKERS sets the worker count when neither --workers nor the config does.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*infer) return cmd_infer(infer_opts);
    if (*bench) return cmd_bench(bench_opts, counts);
    if (*schedule) return cmd_schedule_sim(sched);
    if (*lorenz) return cmd_lorenz_demo(demo);
  } catch (const abc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
