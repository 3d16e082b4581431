#ifndef FAASIM_MANAGER_HPP_
#define FAASIM_MANAGER_HPP_

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "faasim/executor.hpp"
#include "faasim/scheduler.hpp"

// Monitoring and resource management: aggregates executor metrics from
// the KVS, drives threshold autoscaling with a simulated node spin-up
// delay, and re-executes DAGs that time out or lose an upstream cache.

namespace faasim::mgr {

struct PolicyConfig {
  double scale_up_util = 0.70;
  double scale_down_util = 0.20;
  double step_fraction = 0.20;  // of the current fleet, at least one node
  sim::Time spin_up_delay = 150 * sim::kSecond;
  sim::Time policy_tick = 5 * sim::kSecond;
  sim::Time drain_window = 60 * sim::kSecond;
  sim::Time dag_timeout_floor = 1 * sim::kSecond;
  double dag_timeout_factor = 4.0;
  int min_nodes = 1;
  int max_nodes = 64;
  int max_retries = 3;
  std::string aggregator = "mean";  // or "max"
};

struct Action {
  enum class Kind { kAddNodes, kRemoveNodes, kPinFunction, kUnpinFunction };
  Kind kind;
  int count = 0;
  std::string fn;
  std::string slot;
};

// Snapshot the policy engine works from; assembled from KVS metadata or
// handed in directly by tests.
struct MetricsView {
  std::map<std::string, double> slot_util;        // live slots only
  std::map<std::string, uint64_t> dag_calls;      // per dag, cumulative
  std::map<std::string, uint64_t> dag_completed;  // per dag, cumulative
};

// Hooks into the simulation kernel's cluster bookkeeping.
struct ClusterOps {
  std::function<std::vector<std::string>(int n)> spawn_nodes;  // starting
  std::function<void(const std::string& node)> activate_node;  // -> live
  std::function<void(const std::string& node)> drain_node;
  std::function<bool(const std::string& node)> node_idle;
  std::function<void(const std::string& node)> remove_node;
  std::function<std::vector<std::string>()> live_nodes;
  std::function<std::vector<std::string>()> starting_nodes;
  std::function<std::vector<std::string>()> draining_nodes;
};

class Manager {
 public:
  Manager(exec::Env env, kvs::Client kvs_client, PolicyConfig cfg,
          ClusterOps cluster, std::vector<sched::Scheduler*> schedulers);

  // Pure policy step over a metrics view; applies no side effects.
  std::vector<Action> autoscale_step(const MetricsView& metrics);
  void apply(const std::vector<Action>& actions);

  void bootstrap_node(const std::string& node);

  // Execution lifecycle.
  void on_execution_started(const std::string& execution,
                            const exec::Request& request,
                            const std::map<std::string, std::string>& schedule,
                            int attempt);
  void on_completion(const exec::Completion& completion);
  void on_restart_signal(const std::string& execution,
                         const std::string& reason);

  void start();
  void stop() { running_ = false; }
  void policy_tick();
  void publish_cluster_view();

  const std::vector<std::pair<sim::Time, int>>& node_series() const {
    return node_series_;
  }
  size_t active_executions() const { return active_.size(); }
  uint64_t retries() const { return retries_; }
  uint64_t gave_up() const { return gave_up_; }

 private:
  struct ActiveExecution {
    exec::Request request;
    std::string dag;
    int attempt = 0;
    sim::Time started = 0;
    sim::Time deadline = 0;
    std::set<std::string> nodes;  // participating nodes (for GC lineage)
  };

  void collect_metrics(std::function<void(MetricsView)> done);
  void arm_timeout(const std::string& execution);
  void retry_execution(const std::string& execution, const std::string& reason);
  sim::Time timeout_for(const std::string& dag) const;
  void record_node_count();
  void start_tick();
  sched::Scheduler* pick_scheduler();

  exec::Env env_;
  kvs::Client kvs_;
  PolicyConfig cfg_;
  ClusterOps cluster_;
  std::vector<sched::Scheduler*> schedulers_;
  bool running_ = true;

  std::map<std::string, ActiveExecution> active_;
  std::map<std::string, std::set<std::string>> request_lineage_;
  std::set<std::string> finished_requests_;
  std::map<std::string, std::vector<sim::Time>> dag_latencies_;
  std::map<std::string, uint64_t> dag_completed_;
  std::map<std::string, sim::Time> drain_started_;
  uint64_t retries_ = 0;
  uint64_t gave_up_ = 0;
  size_t round_robin_ = 0;
  uint64_t meta_clock_ = 0;
  std::map<std::string, uint64_t> last_dag_calls_;
  std::map<std::string, uint64_t> last_dag_completed_;
  std::vector<std::pair<sim::Time, int>> node_series_;
};

}  // namespace faasim::mgr

#endif  // FAASIM_MANAGER_HPP_
