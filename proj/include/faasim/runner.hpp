#ifndef FAASIM_RUNNER_HPP_
#define FAASIM_RUNNER_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faasim/cluster.hpp"
#include "faasim/report.hpp"
#include "faasim/workload.hpp"

namespace faasim::run {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct FailureInjection {
  std::string node;
  sim::Time at = 0;
};

struct SimConfig {
  uint64_t seed = 1;
  lattice::Mode mode = lattice::Mode::kLww;
  cluster::ClusterConfig cluster;
  load::Workload workload;
  std::vector<FailureInjection> failures;
  sim::Time time_limit = 600 * sim::kSecond;
  sim::Time quiescence_poll = 50 * sim::kMillisecond;

  lattice::Json to_json() const;
  // Throws ConfigError with a field-level diagnostic.
  static SimConfig from_json(const lattice::Json& j);
};

struct RunResult {
  std::string trace;  // NDJSON bytes
  std::vector<trace::Event> events;
  report::Metrics metrics;
  check::AnomalyReport anomalies;
  bool install_ok = true;
  std::string install_error;
};

// Executes the configured workload to quiescence (or the time limit) and
// assembles the trace, the metrics report and the anomaly report.
RunResult run(const SimConfig& config);

}  // namespace faasim::run

#endif  // FAASIM_RUNNER_HPP_
