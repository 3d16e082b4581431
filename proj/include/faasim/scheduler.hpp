#ifndef FAASIM_SCHEDULER_HPP_
#define FAASIM_SCHEDULER_HPP_

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "faasim/executor.hpp"

// Stateless-per-request scheduler: function/DAG registration, schedule
// construction, and the locality + backpressure placement heuristics.
// Schedulers never talk to each other; shared state lives in the KVS.

namespace faasim::sched {

struct SchedulerConfig {
  double saturation = 0.70;
  int pins_per_function = 1;
  sim::Time refresh_period = 100 * sim::kMillisecond;
};

struct SlotView {
  double util = 0.0;
  std::set<std::string> pinned;
  bool live = true;
};

struct SchedulerStats {
  uint64_t assignments = 0;
  uint64_t saturated_assignments = 0;
  uint64_t schedules = 0;
};

using ReplyFn = std::function<void(bool ok, std::string error)>;

class Scheduler {
 public:
  Scheduler(std::string id, exec::Env env, kvs::Client kvs_client,
            SchedulerConfig cfg, uint64_t seed);

  const std::string& id() const { return id_; }

  // Client-facing entry points (already on this scheduler's side of the
  // network).
  void register_function(const exec::FunctionDef& def, ReplyFn reply);
  void register_dag(const exec::DagSpec& spec, ReplyFn reply);
  void invoke(const exec::Request& request);

  // Also the re-execution entry used by the manager.
  void schedule_dag(const std::string& execution, const exec::Request& request,
                    int attempt);

  // Locality + backpressure pick over slot addresses.
  std::string pick_executor(const std::vector<std::string>& candidates,
                            const std::vector<std::string>& ref_keys);

  void refresh_views();
  void start();
  void stop() { running_ = false; }

  void note_call(const std::string& dag) { ++call_counts_[dag]; }
  const std::map<std::string, uint64_t>& call_counts() const {
    return call_counts_;
  }
  const SchedulerStats& stats() const { return stats_; }
  const std::map<std::string, std::set<std::string>>& cache_key_index() const {
    return cache_keys_;
  }

  // View maintenance used by tests and by optimistic local updates.
  void set_slot_view(const std::string& slot, SlotView view) {
    slot_views_[slot] = std::move(view);
  }
  void set_cache_keys(const std::string& cache, std::set<std::string> keys) {
    cache_keys_[cache] = std::move(keys);
  }

  std::function<void(const std::string& execution, const exec::Request&,
                     const std::map<std::string, std::string>& schedule,
                     int attempt)>
      on_execution_started;

 private:
  void pin_function(const std::string& fn, const std::string& slot,
                    std::function<void(bool)> ack);
  std::vector<std::string> pinned_slots(const std::string& fn) const;
  std::vector<std::string> live_slots() const;
  void dispatch(const std::string& execution, const exec::Request& request,
                const exec::DagSpec& dag,
                const std::map<std::string, std::string>& schedule,
                int attempt);
  void fail_request(const exec::Request& request, const std::string& error);
  std::string next_execution_id() {
    return id_ + ":e" + std::to_string(execution_seq_++);
  }

  std::string id_;
  exec::Env env_;
  kvs::Client kvs_;
  SchedulerConfig cfg_;
  sim::Rng rng_;
  bool running_ = true;

  std::set<std::string> registry_;
  std::map<std::string, exec::DagSpec> dags_;
  std::map<std::string, SlotView> slot_views_;
  std::map<std::string, std::set<std::string>> cache_keys_;
  std::map<std::string, uint64_t> call_counts_;
  uint64_t execution_seq_ = 0;
  uint64_t meta_clock_ = 0;
  SchedulerStats stats_;
};

}  // namespace faasim::sched

#endif  // FAASIM_SCHEDULER_HPP_
