#ifndef FAASIM_CLUSTER_HPP_
#define FAASIM_CLUSTER_HPP_

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faasim/cache.hpp"
#include "faasim/executor.hpp"
#include "faasim/kvs.hpp"
#include "faasim/manager.hpp"
#include "faasim/scheduler.hpp"

// Wires every logical process of one simulated deployment to the event
// kernel: storage nodes, executor nodes (cache + worker slots),
// schedulers, the manager and clients.

namespace faasim::cluster {

struct ClusterConfig {
  int storage_nodes = 2;
  int exec_nodes = 3;
  int slots_per_node = 3;
  int schedulers = 1;
  int replication = 2;
  int vnodes = 16;
  lattice::Mode mode = lattice::Mode::kLww;
  uint64_t seed = 1;
  net::LatencyModel latency;
  sim::Time propagation_tick = 10 * sim::kMillisecond;
  sim::Time metrics_period = 100 * sim::kMillisecond;
  cache::CacheConfig cache;
  sched::SchedulerConfig scheduler;
  mgr::PolicyConfig policy;
};

// Closed-loop request issuer. The factory returns the next request or
// nullopt when the stream is exhausted.
class ClientSim {
 public:
  using Factory = std::function<std::optional<exec::Request>(uint64_t idx)>;

  ClientSim(std::string addr, sim::Kernel* kernel, net::Network* net,
            sched::Scheduler* scheduler, Factory factory, sim::Time think,
            sim::Time active_from = 0, sim::Time active_until = 0);

  const std::string& addr() const { return addr_; }
  void start();
  void on_result(const exec::Completion& completion);
  bool done() const { return done_; }
  uint64_t issued() const { return issued_; }
  uint64_t completed() const { return completed_; }
  uint64_t failed() const { return failed_; }
  const std::vector<sim::Time>& latencies() const { return latencies_; }
  const std::map<std::string, exec::Completion>& results() const {
    return results_;
  }

 private:
  void step();

  std::string addr_;
  sim::Kernel* kernel_;
  net::Network* net_;
  sched::Scheduler* scheduler_;
  Factory factory_;
  sim::Time think_;
  sim::Time active_from_;
  sim::Time active_until_;  // 0 = unbounded
  uint64_t issued_ = 0;
  uint64_t completed_ = 0;
  uint64_t failed_ = 0;
  bool waiting_ = false;
  bool done_ = false;
  std::string expected_request_;
  sim::Time issue_time_ = 0;
  std::set<std::string> seen_;
  std::vector<sim::Time> latencies_;
  std::map<std::string, exec::Completion> results_;
};

class Cluster {
 public:
  explicit Cluster(ClusterConfig cfg);

  sim::Kernel& kernel() { return kernel_; }
  trace::Log& log() { return log_; }
  net::Network& network() { return net_; }
  net::Directory& directory() { return dir_; }
  const ClusterConfig& config() const { return cfg_; }
  const kvs::Ring& ring() const { return ring_; }

  kvs::StorageNode* storage(const std::string& id) {
    return storage_ptrs_.at(id);
  }
  const std::map<std::string, kvs::StorageNode*>& storage_nodes() {
    return storage_ptrs_;
  }
  cache::Cache* cache_of(const std::string& node) {
    return caches_.at(node + ":c");
  }
  const std::map<std::string, cache::Cache*>& caches() { return caches_; }
  exec::Slot* slot(const std::string& addr) { return slots_.at(addr); }
  const std::map<std::string, exec::Slot*>& slots() { return slots_; }
  sched::Scheduler* scheduler(size_t i) { return schedulers_[i].get(); }
  size_t scheduler_count() const { return schedulers_.size(); }
  mgr::Manager* manager() { return manager_.get(); }

  kvs::Client make_kvs_client(const std::string& self) {
    return kvs::Client(self, &net_, &ring_, &storage_ptrs_);
  }
  exec::Env make_env(const std::string& sender);

  // Membership.
  std::vector<std::string> spawn_exec_nodes(int n);
  void activate_node(const std::string& node);
  void drain_node(const std::string& node);
  void remove_node(const std::string& node);
  bool node_idle(const std::string& node);
  void crash_node(const std::string& node);
  std::vector<std::string> nodes_in_state(const std::string& state) const;

  ClientSim* add_client(ClientSim::Factory factory, sim::Time think = 0,
                        sim::Time from = 0, sim::Time until = 0);
  const std::vector<std::unique_ptr<ClientSim>>& clients() const {
    return clients_;
  }

  void preload(const std::string& key, const std::string& value);
  void start();
  bool quiescent() const;

  uint64_t next_epoch() { return ++epoch_; }

 private:
  std::string add_exec_node(const std::string& state);

  ClusterConfig cfg_;
  sim::Kernel kernel_;
  net::Directory dir_;
  trace::Log log_;
  net::Network net_;
  kvs::Ring ring_;

  std::vector<std::unique_ptr<kvs::StorageNode>> storage_;
  std::map<std::string, kvs::StorageNode*> storage_ptrs_;
  std::vector<std::unique_ptr<cache::Cache>> cache_objs_;
  std::map<std::string, cache::Cache*> caches_;
  std::vector<std::unique_ptr<exec::Slot>> slot_objs_;
  std::map<std::string, exec::Slot*> slots_;
  std::vector<std::unique_ptr<sched::Scheduler>> schedulers_;
  std::unique_ptr<mgr::Manager> manager_;
  std::vector<std::unique_ptr<ClientSim>> clients_;

  std::map<std::string, std::string> node_state_;  // exec node -> state
  int next_node_ = 0;
  uint64_t epoch_ = 0;
  bool started_ = false;
};

}  // namespace faasim::cluster

#endif  // FAASIM_CLUSTER_HPP_
