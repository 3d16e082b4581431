#include "faasim/cluster.hpp"

namespace faasim::cluster {

ClientSim::ClientSim(std::string addr, sim::Kernel* kernel, net::Network* net,
                     sched::Scheduler* scheduler, Factory factory,
                     sim::Time think, sim::Time active_from,
                     sim::Time active_until)
    : addr_(std::move(addr)),
      kernel_(kernel),
      net_(net),
      scheduler_(scheduler),
      factory_(std::move(factory)),
      think_(think),
      active_from_(active_from),
      active_until_(active_until) {}

void ClientSim::start() {
  if (active_from_ > kernel_->now()) {
    kernel_->at(active_from_, [this]() { step(); });
  } else {
    step();
  }
}

void ClientSim::step() {
  if (done_ || waiting_) return;
  if (active_until_ > 0 && kernel_->now() >= active_until_) {
    done_ = true;
    return;
  }
  std::optional<exec::Request> request = factory_(issued_);
  if (!request) {
    done_ = true;
    return;
  }
  request->client = addr_;
  ++issued_;
  waiting_ = true;
  expected_request_ = request->request_id;
  issue_time_ = kernel_->now();
  sched::Scheduler* s = scheduler_;
  net_->send(addr_, s->id(), "invoke",
             [s, r = *request]() { s->invoke(r); });
}

void ClientSim::on_result(const exec::Completion& completion) {
  // Delivery is at-least-once across retries; the first result wins.
  if (!seen_.insert(completion.request_id).second) return;
  results_[completion.request_id] = completion;
  if (completion.ok) {
    ++completed_;
  } else {
    ++failed_;
  }
  if (waiting_ && completion.request_id == expected_request_) {
    waiting_ = false;
    latencies_.push_back(kernel_->now() - issue_time_);
    if (think_ > 0) {
      kernel_->after(think_, [this]() { step(); });
    } else {
      step();
    }
  }
}

Cluster::Cluster(ClusterConfig cfg)
    : cfg_(cfg),
      kernel_(cfg.seed),
      log_(&kernel_),
      net_(&kernel_, &dir_, &log_, cfg.latency) {
  std::vector<std::string> storage_ids;
  for (int i = 0; i < cfg_.storage_nodes; ++i) {
    storage_ids.push_back("s" + std::to_string(i));
  }
  ring_ = kvs::Ring(storage_ids, cfg_.vnodes, cfg_.replication);
  for (const std::string& id : storage_ids) {
    auto node = std::make_unique<kvs::StorageNode>(id, &net_,
                                                   cfg_.propagation_tick);
    node->set_ring(&ring_);
    node->set_update_sink([this](const std::string& cache_addr,
                                 const std::string& key,
                                 const lattice::Capsule& capsule) {
      auto it = caches_.find(cache_addr);
      if (it != caches_.end()) it->second->on_key_update(key, capsule);
    });
    dir_.add(id);
    storage_ptrs_[id] = node.get();
    storage_.push_back(std::move(node));
  }

  for (int i = 0; i < cfg_.exec_nodes; ++i) add_exec_node("live");

  for (int i = 0; i < cfg_.schedulers; ++i) {
    std::string id = "sched" + std::to_string(i);
    dir_.add(id);
    auto s = std::make_unique<sched::Scheduler>(
        id, make_env(id), make_kvs_client(id), cfg_.scheduler, cfg_.seed);
    s->on_execution_started = [this, id](const std::string& execution,
                                         const exec::Request& request,
                                         const std::map<std::string,
                                                        std::string>& schedule,
                                         int attempt) {
      net_.send(id, "mgr", "execution_started",
                [this, execution, request, schedule, attempt]() {
                  if (manager_) {
                    manager_->on_execution_started(execution, request,
                                                   schedule, attempt);
                  }
                });
    };
    schedulers_.push_back(std::move(s));
  }

  dir_.add("mgr");
  mgr::ClusterOps ops;
  ops.spawn_nodes = [this](int n) { return spawn_exec_nodes(n); };
  ops.activate_node = [this](const std::string& node) { activate_node(node); };
  ops.drain_node = [this](const std::string& node) { drain_node(node); };
  ops.node_idle = [this](const std::string& node) { return node_idle(node); };
  ops.remove_node = [this](const std::string& node) { remove_node(node); };
  ops.live_nodes = [this]() { return nodes_in_state("live"); };
  ops.starting_nodes = [this]() { return nodes_in_state("starting"); };
  ops.draining_nodes = [this]() { return nodes_in_state("draining"); };
  std::vector<sched::Scheduler*> scheds;
  for (auto& s : schedulers_) scheds.push_back(s.get());
  manager_ = std::make_unique<mgr::Manager>(make_env("mgr"),
                                            make_kvs_client("mgr"),
                                            cfg_.policy, ops, scheds);
}

exec::Env Cluster::make_env(const std::string& sender) {
  exec::Env env;
  env.kernel = &kernel_;
  env.net = &net_;
  env.dir = &dir_;
  env.log = &log_;
  env.mode = cfg_.mode;
  env.slots = &slots_;
  env.caches = &caches_;
  env.metrics_period = cfg_.metrics_period;
  env.on_completion = [this, sender](const exec::Completion& completion) {
    net_.send(sender, "mgr", "completion", [this, completion]() {
      if (manager_) manager_->on_completion(completion);
    });
    if (!completion.client.empty()) {
      net_.send(sender, completion.client, "result", [this, completion]() {
        for (auto& client : clients_) {
          if (client->addr() == completion.client) {
            client->on_result(completion);
            return;
          }
        }
      });
    }
  };
  env.on_restart = [this, sender](const std::string& execution,
                                  const std::string& reason) {
    net_.send(sender, "mgr", "restart_signal", [this, execution, reason]() {
      if (manager_) manager_->on_restart_signal(execution, reason);
    });
  };
  return env;
}

std::string Cluster::add_exec_node(const std::string& state) {
  std::string node = "n" + std::to_string(next_node_++);
  std::string cache_addr = node + ":c";
  dir_.add(cache_addr);
  auto c = std::make_unique<cache::Cache>(node, cfg_.mode, cfg_.cache, &net_,
                                          make_kvs_client(cache_addr),
                                          &caches_);
  caches_[cache_addr] = c.get();
  cache_objs_.push_back(std::move(c));
  for (int w = 0; w < cfg_.slots_per_node; ++w) {
    std::string addr = node + ":w" + std::to_string(w);
    dir_.add(addr);
    auto s = std::make_unique<exec::Slot>(make_env(addr), node, addr,
                                          make_kvs_client(addr),
                                          caches_.at(cache_addr));
    slots_[addr] = s.get();
    slot_objs_.push_back(std::move(s));
  }
  node_state_[node] = state;
  log_.membership(node, state, next_epoch());
  if (started_) {
    caches_.at(cache_addr)->start();
    for (auto& [addr, slot] : slots_) {
      if (slot->node() == node) slot->start();
    }
  }
  return node;
}

std::vector<std::string> Cluster::spawn_exec_nodes(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(add_exec_node("starting"));
  return out;
}

void Cluster::activate_node(const std::string& node) {
  auto it = node_state_.find(node);
  if (it == node_state_.end() || it->second != "starting") return;
  it->second = "live";
  log_.membership(node, "live", next_epoch());
}

void Cluster::drain_node(const std::string& node) {
  auto it = node_state_.find(node);
  if (it == node_state_.end() || it->second != "live") return;
  it->second = "draining";
  log_.membership(node, "draining", next_epoch());
}

void Cluster::remove_node(const std::string& node) {
  auto it = node_state_.find(node);
  if (it == node_state_.end()) return;
  it->second = "removed";
  log_.membership(node, "removed", next_epoch());
  for (auto& [addr, slot] : slots_) {
    if (slot->node() == node) {
      slot->stop();
      dir_.set_alive(addr, false);
    }
  }
  auto cache_it = caches_.find(node + ":c");
  if (cache_it != caches_.end()) {
    cache_it->second->stop();
    dir_.set_alive(cache_it->first, false);
  }
}

bool Cluster::node_idle(const std::string& node) {
  for (auto& [addr, slot] : slots_) {
    if (slot->node() == node && slot->alive() && slot->queue_depth() > 0) {
      return false;
    }
  }
  return true;
}

void Cluster::crash_node(const std::string& node) {
  auto it = node_state_.find(node);
  if (it == node_state_.end() || it->second == "removed" ||
      it->second == "crashed") {
    return;
  }
  it->second = "crashed";
  log_.membership(node, "crashed", next_epoch());
  for (auto& [addr, slot] : slots_) {
    if (slot->node() == node) slot->crash();
  }
  auto cache_it = caches_.find(node + ":c");
  if (cache_it != caches_.end()) {
    cache_it->second->stop();
    dir_.set_alive(cache_it->first, false);
  }
  if (manager_) manager_->publish_cluster_view();
}

std::vector<std::string> Cluster::nodes_in_state(const std::string& state) const {
  std::vector<std::string> out;
  for (const auto& [node, s] : node_state_) {
    if (s == state) out.push_back(node);
  }
  return out;
}

ClientSim* Cluster::add_client(ClientSim::Factory factory, sim::Time think,
                               sim::Time from, sim::Time until) {
  std::string addr = "client" + std::to_string(clients_.size());
  dir_.add(addr);
  sched::Scheduler* s =
      schedulers_[clients_.size() % schedulers_.size()].get();
  clients_.push_back(std::make_unique<ClientSim>(
      addr, &kernel_, &net_, s, std::move(factory), think, from, until));
  return clients_.back().get();
}

void Cluster::preload(const std::string& key, const std::string& value) {
  lattice::Capsule capsule;
  if (lattice::is_causal(cfg_.mode)) {
    lattice::CausalCapsule c;
    c.vc.set("init", 1);
    c.values.insert(value);
    capsule = lattice::Capsule{c};
  } else {
    capsule = lattice::Capsule{lattice::LwwCapsule{{1, "init"}, value}};
  }
  for (const std::string& replica : ring_.partition_for(key)) {
    storage_ptrs_.at(replica)->preload(key, capsule);
  }
}

void Cluster::start() {
  if (started_) return;
  started_ = true;
  for (auto& node : storage_) node->start();
  for (auto& c : cache_objs_) c->start();
  for (auto& [addr, slot] : slots_) slot->start();
  for (auto& s : schedulers_) {
    s->refresh_views();
    s->start();
  }
  manager_->start();
  for (auto& client : clients_) client->start();
}

bool Cluster::quiescent() const {
  for (const auto& client : clients_) {
    if (!client->done()) return false;
  }
  if (manager_ && manager_->active_executions() > 0) return false;
  for (const auto& c : cache_objs_) {
    if (c->pending_depth() > 0) return false;
  }
  for (const auto& [addr, slot] : const_cast<Cluster*>(this)->slots_) {
    if (slot->alive() && slot->queue_depth() > 0) return false;
  }
  return true;
}

}  // namespace faasim::cluster
