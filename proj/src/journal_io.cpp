#include <cmath>
#include <limits>

#include "abc/error.hpp"
#include "abc/samplers.hpp"

namespace abc {

namespace {

using nlohmann::json;

json real(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double real_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("journal: unexpected value '" + s + "'");
}

json matrix(const CovarianceMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(real(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json journal_to_json(const Journal& journal, bool include_timing) {
  json doc;
  doc["sampler"] = journal.sampler;
  doc["parameters"] = journal.parameter_names;
  doc["seed"] = journal.seed;
  doc["config"] = journal.config;
  json gens = json::array();
  for (const auto& g : journal.generations) {
    json jg;
    jg["epsilon"] = g.epsilon ? real(*g.epsilon) : json(nullptr);
    json particles = json::array();
    for (const auto& p : g.particles) particles.push_back(p.values);
    jg["particles"] = std::move(particles);
    jg["weights"] = g.weights;
    json distances = json::array();
    for (double d : g.distances) distances.push_back(real(d));
    jg["distances"] = std::move(distances);
    jg["covariance"] = matrix(g.covariance);
    jg["attempts"] = g.attempts;
    json traces = json::array();
    for (const auto& t : g.task_traces) {
      json jt{{"task_index", t.task_index}, {"attempts", t.n_simulation_attempts}};
      if (include_timing) {
        jt["worker_id"] = t.worker_id;
        jt["start_offset_s"] = t.start_offset;
        jt["duration_s"] = t.duration;
      }
      traces.push_back(std::move(jt));
    }
    jg["task_traces"] = std::move(traces);
    gens.push_back(std::move(jg));
  }
  doc["generations"] = std::move(gens);
  return doc;
}

Journal journal_from_json(const json& doc) {
  try {
    Journal j;
    j.sampler = doc.at("sampler").get<std::string>();
    j.parameter_names = doc.at("parameters").get<std::vector<std::string>>();
    j.seed = doc.at("seed").get<std::uint64_t>();
    j.config = doc.value("config", json::object());
    for (const auto& jg : doc.at("generations")) {
      Generation g;
      if (!jg.at("epsilon").is_null()) g.epsilon = real_from(jg.at("epsilon"));
      for (const auto& p : jg.at("particles"))
        g.particles.push_back(ParameterVector{p.get<std::vector<double>>()});
      g.weights = jg.at("weights").get<std::vector<double>>();
      for (const auto& d : jg.at("distances")) g.distances.push_back(real_from(d));
      const auto& cov = jg.at("covariance");
      const auto n = static_cast<Eigen::Index>(cov.size());
      g.covariance = CovarianceMatrix::Zero(n, n);
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
          g.covariance(r, c) = real_from(cov.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)));
      g.attempts = jg.at("attempts").get<std::vector<std::size_t>>();
      for (const auto& jt : jg.at("task_traces")) {
        TaskTrace t;
        t.task_index = jt.at("task_index").get<std::size_t>();
        t.n_simulation_attempts = jt.at("attempts").get<std::size_t>();
        t.worker_id = jt.value("worker_id", std::size_t{0});
        t.start_offset = jt.value("start_offset_s", 0.0);
        t.duration = jt.value("duration_s", 0.0);
        g.task_traces.push_back(t);
      }
      j.generations.push_back(std::move(g));
    }
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed journal: ") + e.what());
  }
}

}  // namespace abc
