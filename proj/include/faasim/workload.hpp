#ifndef FAASIM_WORKLOAD_HPP_
#define FAASIM_WORKLOAD_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faasim/cluster.hpp"
#include "faasim/executor.hpp"

// Workload specifications and seeded generators: random function chains
// over Zipfian keys, a read-heavy social feed, the sleep-function
// autoscaling pattern, gossip parameters, and a step-load profile.

namespace faasim::load {

// Seeded Zipf(s) sampler over ranks 1..n mapped to key indices 0..n-1.
class Zipf {
 public:
  Zipf(size_t n, double s);
  size_t sample(sim::Rng& rng) const;
  double pmf(size_t rank1) const;  // rank in [1, n]

 private:
  std::vector<double> cdf_;
  double norm_ = 1.0;
  double s_ = 1.0;
};

struct ArgTemplate {
  enum class Kind { kLiteral, kZipfRef, kFixedRef, kUpstream };
  Kind kind = Kind::kLiteral;
  std::string text;

  exec::Json to_json() const;
  static ArgTemplate from_json(const exec::Json& j);
};

struct Phase {
  sim::Time from = 0;
  sim::Time until = 0;  // 0 = open-ended
  int clients = 0;
};

struct Workload {
  std::string kind;
  std::vector<exec::FunctionDef> functions;
  std::vector<exec::DagSpec> dags;
  // dag -> fn -> arg templates
  std::map<std::string, std::map<std::string, std::vector<ArgTemplate>>> args;
  bool sink_writes = false;  // sink writes to one of the keys it read

  size_t key_count = 1000;
  std::string key_prefix = "k";
  double zipf_s = 1.0;
  int clients = 8;
  uint64_t requests_per_client = 50;
  sim::Time think = 0;
  std::vector<Phase> phases;  // step_load only

  // retwis parameters
  int users = 0;
  int seed_posts = 0;
  double read_fraction = 0.9;
  double reply_fraction = 0.5;

  // gossip parameters
  int actors = 0;
  double convergence_error = 0.05;

  uint64_t prepop_seed = 0;

  std::string key_at(size_t idx) const;

  exec::Json to_json() const;
  static Workload from_json(const exec::Json& j);
};

Workload generate_workload(const std::string& kind, uint64_t seed);

// Builds the per-client request stream factory for a workload. The
// factory draws keys with the client's own seeded generator, so a given
// (workload, seed, client index) always produces the same stream.
cluster::ClientSim::Factory make_factory(const Workload& workload,
                                         uint64_t seed, int client_index,
                                         uint64_t max_requests);

// Registers the workload's functions and DAGs through a scheduler and
// preloads the key space; invokes `done` once everything is acked.
void install_workload(cluster::Cluster& cluster, const Workload& workload,
                      std::function<void(bool ok, std::string error)> done);

}  // namespace faasim::load

#endif  // FAASIM_WORKLOAD_HPP_
