#include "faasim/manager.hpp"

#include <algorithm>
#include <cmath>

namespace faasim::mgr {

using exec::Json;

Manager::Manager(exec::Env env, kvs::Client kvs_client, PolicyConfig cfg,
                 ClusterOps cluster, std::vector<sched::Scheduler*> schedulers)
    : env_(std::move(env)),
      kvs_(std::move(kvs_client)),
      cfg_(cfg),
      cluster_(std::move(cluster)),
      schedulers_(std::move(schedulers)) {}

sched::Scheduler* Manager::pick_scheduler() {
  if (schedulers_.empty()) return nullptr;
  return schedulers_[round_robin_++ % schedulers_.size()];
}

std::vector<Action> Manager::autoscale_step(const MetricsView& metrics) {
  std::vector<Action> actions;

  // Per-DAG backlog: when calls keep outpacing completions, widen the pin
  // set so more executors can serve the DAG.
  for (const auto& [dag, calls] : metrics.dag_calls) {
    uint64_t done = 0;
    auto it = metrics.dag_completed.find(dag);
    if (it != metrics.dag_completed.end()) done = it->second;
    uint64_t in_rate = calls - last_dag_calls_[dag];
    uint64_t out_rate = done - last_dag_completed_[dag];
    last_dag_calls_[dag] = calls;
    last_dag_completed_[dag] = done;
    if (in_rate > 2 * out_rate && in_rate > 4) {
      // Target: the least-loaded slot; the scheduler resolves the exact
      // function list when applying.
      std::string best;
      double best_util = 2.0;
      for (const auto& [slot, util] : metrics.slot_util) {
        if (util < best_util) {
          best_util = util;
          best = slot;
        }
      }
      if (!best.empty()) {
        actions.push_back(
            {Action::Kind::kPinFunction, 0, dag, best});
      }
    }
  }

  double agg = 0.0;
  if (!metrics.slot_util.empty()) {
    if (cfg_.aggregator == "max") {
      for (const auto& [slot, util] : metrics.slot_util) {
        agg = std::max(agg, util);
      }
    } else {
      for (const auto& [slot, util] : metrics.slot_util) agg += util;
      agg /= static_cast<double>(metrics.slot_util.size());
    }
  }

  int live = static_cast<int>(cluster_.live_nodes().size());
  int starting = static_cast<int>(cluster_.starting_nodes().size());
  int fleet = live + starting;

  if (fleet < cfg_.min_nodes) {
    actions.push_back({Action::Kind::kAddNodes, cfg_.min_nodes - fleet});
  } else if (agg > cfg_.scale_up_util && starting == 0 &&
             fleet < cfg_.max_nodes) {
    // One step per sustained overload; the spin-up plateau suppresses
    // further adds until the pending nodes go live.
    int step = std::max(1, static_cast<int>(std::ceil(
                               cfg_.step_fraction * static_cast<double>(fleet))));
    step = std::min(step, cfg_.max_nodes - fleet);
    actions.push_back({Action::Kind::kAddNodes, step});
  } else if (agg < cfg_.scale_down_util && starting == 0 &&
             live > cfg_.min_nodes) {
    int step = std::max(1, static_cast<int>(std::ceil(
                               cfg_.step_fraction * static_cast<double>(live))));
    step = std::min(step, live - cfg_.min_nodes);
    actions.push_back({Action::Kind::kRemoveNodes, step});
  }
  return actions;
}

void Manager::apply(const std::vector<Action>& actions) {
  for (const Action& action : actions) {
    switch (action.kind) {
      case Action::Kind::kAddNodes: {
        std::vector<std::string> spawned = cluster_.spawn_nodes(action.count);
        for (const std::string& node : spawned) {
          env_.kernel->after(cfg_.spin_up_delay, [this, node]() {
            if (!running_) return;
            bootstrap_node(node);
          });
        }
        publish_cluster_view();
        break;
      }
      case Action::Kind::kRemoveNodes: {
        // Drain the least-loaded live nodes.
        std::vector<std::string> live = cluster_.live_nodes();
        std::sort(live.begin(), live.end());
        int n = std::min<int>(action.count, static_cast<int>(live.size()));
        for (int i = 0; i < n; ++i) {
          const std::string& node = live[i];
          cluster_.drain_node(node);
          drain_started_[node] = env_.kernel->now();
        }
        publish_cluster_view();
        break;
      }
      case Action::Kind::kPinFunction: {
        // action.fn carries the dag name; pin each of its functions.
        sched::Scheduler* s = pick_scheduler();
        if (s == nullptr) break;
        kvs_.get("_sys/dag/" + action.fn,
                 [this, s, slot = action.slot](
                     std::optional<lattice::Capsule> c) {
                   if (!c) return;
                   exec::DagSpec dag =
                       exec::DagSpec::from_json(Json::parse(c->revealed()));
                   for (const auto& fn : dag.functions) {
                     auto it = env_.slots->find(slot);
                     if (it == env_.slots->end()) continue;
                     exec::Slot* target = it->second;
                     env_.net->send("mgr", slot, "pin_function",
                                    [target, fn]() {
                                      if (target->alive()) {
                                        target->on_pin(fn, nullptr);
                                      }
                                    });
                   }
                 });
        break;
      }
      case Action::Kind::kUnpinFunction: {
        auto it = env_.slots->find(action.slot);
        if (it != env_.slots->end()) it->second->on_unpin(action.fn);
        break;
      }
    }
  }
}

void Manager::bootstrap_node(const std::string& node) {
  // The KVS is the only source of truth: read the registry and the DAG
  // metadata, cache every function, then go live.
  kvs_.get("_sys/registry", [this, node](std::optional<lattice::Capsule> reg) {
    std::vector<std::string> fns;
    if (reg && !reg->is_lww()) {
      for (const auto& name : reg->causal().values) fns.push_back(name);
    }
    auto pending = std::make_shared<size_t>(fns.size() + 1);
    auto finish = [this, node, pending]() {
      if (--*pending != 0) return;
      cluster_.activate_node(node);
      publish_cluster_view();
    };
    for (const auto& fn : fns) {
      kvs_.get("_sys/fn/" + fn,
               [this, node, fn, finish](std::optional<lattice::Capsule> def) {
                 if (def) {
                   for (auto& [addr, slot] : *env_.slots) {
                     if (slot->node() == node && slot->alive()) {
                       slot->on_pin(fn, nullptr);
                     }
                   }
                 }
                 finish();
               });
    }
    finish();
  });
}

sim::Time Manager::timeout_for(const std::string& dag) const {
  auto it = dag_latencies_.find(dag);
  if (it == dag_latencies_.end() || it->second.empty()) {
    return cfg_.dag_timeout_floor;
  }
  std::vector<sim::Time> sorted = it->second;
  std::sort(sorted.begin(), sorted.end());
  size_t idx = static_cast<size_t>(
      std::min<double>(static_cast<double>(sorted.size()) - 1.0,
                       std::ceil(0.99 * static_cast<double>(sorted.size()))));
  sim::Time p99 = sorted[idx];
  sim::Time scaled =
      static_cast<sim::Time>(cfg_.dag_timeout_factor * static_cast<double>(p99));
  return std::max(cfg_.dag_timeout_floor, scaled);
}

void Manager::on_execution_started(
    const std::string& execution, const exec::Request& request,
    const std::map<std::string, std::string>& schedule, int attempt) {
  ActiveExecution active;
  active.request = request;
  active.dag = request.dag;
  active.attempt = attempt;
  active.started = env_.kernel->now();
  active.deadline = active.started + timeout_for(request.dag);
  for (const auto& [fn, slot] : schedule) {
    active.nodes.insert(slot.substr(0, slot.find(':')));
  }
  active_[execution] = active;
  request_lineage_[request.request_id].insert(execution);
  arm_timeout(execution);
}

void Manager::arm_timeout(const std::string& execution) {
  auto it = active_.find(execution);
  if (it == active_.end()) return;
  env_.kernel->at(it->second.deadline, [this, execution]() {
    if (!running_) return;
    auto it = active_.find(execution);
    if (it == active_.end()) return;
    retry_execution(execution, "timeout");
  });
}

void Manager::retry_execution(const std::string& execution,
                              const std::string& reason) {
  auto it = active_.find(execution);
  if (it == active_.end()) return;
  ActiveExecution state = it->second;
  active_.erase(it);
  if (finished_requests_.contains(state.request.request_id)) return;

  if (state.attempt + 1 > cfg_.max_retries) {
    ++gave_up_;
    exec::Completion done;
    done.execution = execution;
    done.request_id = state.request.request_id;
    done.dag = state.dag;
    done.client = state.request.client;
    done.ok = false;
    done.error = "GivesUp after " + std::to_string(state.attempt + 1) +
                 " attempts (" + reason + ")";
    done.finished_at = env_.kernel->now();
    if (env_.on_completion) env_.on_completion(done);
    return;
  }
  ++retries_;
  sched::Scheduler* s = pick_scheduler();
  if (s == nullptr) return;
  std::string fresh = execution + "~r" + std::to_string(state.attempt + 1);
  // Fresh execution id, fresh read set and dependency metadata.
  env_.net->send("mgr", s->id(), "reschedule",
                 [s, fresh, request = state.request,
                  attempt = state.attempt + 1]() {
                   s->schedule_dag(fresh, request, attempt);
                 });
}

void Manager::on_completion(const exec::Completion& completion) {
  auto it = active_.find(completion.execution);
  std::set<std::string> nodes;
  if (it != active_.end()) {
    nodes = it->second.nodes;
    if (completion.ok) {
      dag_latencies_[completion.dag].push_back(env_.kernel->now() -
                                               it->second.started);
      if (dag_latencies_[completion.dag].size() > 256) {
        dag_latencies_[completion.dag].erase(
            dag_latencies_[completion.dag].begin());
      }
      ++dag_completed_[completion.dag];
    }
    active_.erase(it);
  }
  if (!completion.ok) {
    // Program errors surface to the client without retry; the executor
    // already delivered the error result.
    finished_requests_.insert(completion.request_id);
    return;
  }
  finished_requests_.insert(completion.request_id);

  // Snapshots of abandoned attempts survive until a re-execution
  // completes; GC the whole lineage now.
  auto lineage = request_lineage_.find(completion.request_id);
  if (lineage != request_lineage_.end()) {
    for (const std::string& exec_id : lineage->second) {
      if (exec_id == completion.execution) continue;
      for (auto& [addr, cache] : *env_.caches) {
        cache::Cache* peer = cache;
        std::string target = addr;
        std::string stale = exec_id;
        env_.net->send("mgr", target, "gc",
                       [peer, stale]() { peer->gc(stale); });
      }
      active_.erase(exec_id);
    }
    request_lineage_.erase(lineage);
  }
}

void Manager::on_restart_signal(const std::string& execution,
                                const std::string& reason) {
  retry_execution(execution, reason);
}

void Manager::collect_metrics(std::function<void(MetricsView)> done) {
  auto view = std::make_shared<MetricsView>();
  std::vector<std::string> live = cluster_.live_nodes();
  std::vector<std::string> slots;
  for (const std::string& node : live) {
    for (auto& [addr, slot] : *env_.slots) {
      if (slot->node() == node && slot->alive()) slots.push_back(addr);
    }
  }
  auto pending = std::make_shared<size_t>(slots.size() + schedulers_.size() + 1);
  auto settle = [view, pending, done]() {
    if (--*pending == 0) done(*view);
  };
  for (const std::string& addr : slots) {
    kvs_.get("_meta/exec/" + addr,
             [view, addr, settle](std::optional<lattice::Capsule> c) {
               if (c) {
                 Json j = Json::parse(c->revealed());
                 view->slot_util[addr] = j.at("util").get<double>();
               }
               settle();
             });
  }
  for (sched::Scheduler* s : schedulers_) {
    kvs_.get("_meta/sched/" + s->id(),
             [view, settle](std::optional<lattice::Capsule> c) {
               if (c) {
                 Json j = Json::parse(c->revealed());
                 for (auto it = j.begin(); it != j.end(); ++it) {
                   view->dag_calls[it.key()] += it->get<uint64_t>();
                 }
               }
               settle();
             });
  }
  for (const auto& [dag, n] : dag_completed_) view->dag_completed[dag] = n;
  settle();
}

void Manager::policy_tick() {
  collect_metrics([this](MetricsView view) {
    if (!running_) return;
    apply(autoscale_step(view));

    // Finish draining nodes that have gone idle or exhausted the window.
    std::vector<std::string> draining = cluster_.draining_nodes();
    for (const std::string& node : draining) {
      bool idle = cluster_.node_idle(node);
      bool expired = env_.kernel->now() - drain_started_[node] >=
                     cfg_.drain_window;
      if (idle || expired) {
        cluster_.remove_node(node);
        drain_started_.erase(node);
      }
    }
    if (!draining.empty()) publish_cluster_view();
    record_node_count();
  });
}

void Manager::record_node_count() {
  node_series_.emplace_back(env_.kernel->now(),
                            static_cast<int>(cluster_.live_nodes().size()));
}

void Manager::publish_cluster_view() {
  Json view;
  Json nodes = Json::array();
  auto emit = [this, &nodes](const std::vector<std::string>& ids,
                             const std::string& state) {
    for (const std::string& id : ids) {
      Json n;
      n["id"] = id;
      n["state"] = state;
      Json slots = Json::array();
      for (auto& [addr, slot] : *env_.slots) {
        if (slot->node() == id) slots.push_back(addr);
      }
      n["slots"] = slots;
      nodes.push_back(n);
    }
  };
  emit(cluster_.live_nodes(), "live");
  emit(cluster_.starting_nodes(), "starting");
  emit(cluster_.draining_nodes(), "draining");
  view["nodes"] = nodes;
  lattice::Capsule capsule = lattice::encapsulate(
      view.dump(), lattice::Mode::kLww, "mgr", ++meta_clock_, {});
  kvs_.put("_sys/cluster", capsule, nullptr);
}

void Manager::start() {
  publish_cluster_view();
  record_node_count();
  env_.kernel->after(cfg_.policy_tick, [this]() {
    if (!running_) return;
    policy_tick();
    start_tick();
  });
}

void Manager::start_tick() {
  env_.kernel->after(cfg_.policy_tick, [this]() {
    if (!running_) return;
    policy_tick();
    start_tick();
  });
}

}  // namespace faasim::mgr
