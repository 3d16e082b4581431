#include "faasim/scheduler.hpp"

#include <algorithm>

namespace faasim::sched {

using exec::Json;

Scheduler::Scheduler(std::string id, exec::Env env, kvs::Client kvs_client,
                     SchedulerConfig cfg, uint64_t seed)
    : id_(std::move(id)),
      env_(std::move(env)),
      kvs_(std::move(kvs_client)),
      cfg_(cfg),
      rng_(sim::derive_seed(seed, "sched/" + id_)) {}

void Scheduler::register_function(const exec::FunctionDef& def, ReplyFn reply) {
  kvs_.get("_sys/registry", [this, def,
                             reply](std::optional<lattice::Capsule> c) {
    std::set<std::string> names = registry_;
    if (c && !c->is_lww()) {
      for (const auto& v : c->causal().values) names.insert(v);
    }
    if (names.contains(def.name)) {
      reply(false, "DuplicateName: " + def.name);
      return;
    }
    registry_.insert(def.name);
    lattice::Capsule body = lattice::encapsulate(
        def.to_json().dump(), lattice::Mode::kLww, id_, ++meta_clock_, {});
    kvs_.put("_sys/fn/" + def.name, body, nullptr);
    // The shared registry list is a concurrent set: one unique writer id
    // per name keeps every registration as a sibling.
    lattice::CausalCapsule entry;
    entry.vc.set("reg:" + def.name, 1);
    entry.values.insert(def.name);
    kvs_.put("_sys/registry", lattice::Capsule{entry},
             [reply](lattice::Version) { reply(true, ""); });
  });
}

void Scheduler::register_dag(const exec::DagSpec& spec, ReplyFn reply) {
  kvs_.get("_sys/registry", [this, spec,
                             reply](std::optional<lattice::Capsule> c) {
    std::set<std::string> names = registry_;
    if (c && !c->is_lww()) {
      for (const auto& v : c->causal().values) names.insert(v);
    }
    registry_ = names;
    for (const auto& fn : spec.functions) {
      if (!names.contains(fn)) {
        reply(false, "MissingFunction: " + fn);
        return;
      }
    }
    std::string diag = spec.validate();
    if (!diag.empty()) {
      reply(false, "CyclicDag: " + diag);
      return;
    }
    if (env_.mode == lattice::Mode::kDsrr && !spec.linear()) {
      reply(false, "NonLinearDag: repeatable read requires a linear dag");
      return;
    }
    dags_[spec.name] = spec;
    lattice::Capsule body = lattice::encapsulate(
        spec.to_json().dump(), lattice::Mode::kLww, id_, ++meta_clock_, {});
    kvs_.put("_sys/dag/" + spec.name, body, nullptr);

    // Pin every function on the configured number of executors so each
    // has the function cached before the first schedule.
    auto pending = std::make_shared<size_t>(1);
    auto failed = std::make_shared<bool>(false);
    auto settle = [pending, failed, reply]() {
      if (--*pending == 0) {
        if (*failed) {
          reply(false, "NoAvailableExecutor: pin failed");
        } else {
          reply(true, "");
        }
      }
    };
    for (const auto& fn : spec.functions) {
      std::vector<std::string> slots = live_slots();
      std::stable_sort(slots.begin(), slots.end(),
                       [this](const std::string& a, const std::string& b) {
                         return slot_views_[a].util < slot_views_[b].util;
                       });
      int want = std::min<int>(cfg_.pins_per_function,
                               static_cast<int>(slots.size()));
      if (want == 0) {
        *failed = true;
        continue;
      }
      for (int i = 0; i < want; ++i) {
        ++*pending;
        pin_function(fn, slots[i], [settle, failed](bool ok) {
          if (!ok) *failed = true;
          settle();
        });
      }
    }
    settle();
  });
}

void Scheduler::pin_function(const std::string& fn, const std::string& slot,
                             std::function<void(bool)> ack) {
  slot_views_[slot].pinned.insert(fn);
  auto it = env_.slots->find(slot);
  exec::Slot* target = it == env_.slots->end() ? nullptr : it->second;
  env_.net->send(id_, slot, "pin_function", [this, target, fn, slot, ack]() {
    if (target == nullptr) {
      if (ack) ack(false);
      return;
    }
    target->on_pin(fn, [this, slot, ack](bool ok) {
      env_.net->send(slot, id_, "pin_ack", [ack, ok]() {
        if (ack) ack(ok);
      });
    });
  });
}

std::vector<std::string> Scheduler::live_slots() const {
  std::vector<std::string> out;
  for (const auto& [slot, view] : slot_views_) {
    if (view.live && env_.dir->alive(slot)) out.push_back(slot);
  }
  return out;
}

std::vector<std::string> Scheduler::pinned_slots(const std::string& fn) const {
  std::vector<std::string> out;
  for (const auto& [slot, view] : slot_views_) {
    if (view.live && env_.dir->alive(slot) && view.pinned.contains(fn)) {
      out.push_back(slot);
    }
  }
  return out;
}

std::string Scheduler::pick_executor(
    const std::vector<std::string>& candidates,
    const std::vector<std::string>& ref_keys) {
  std::vector<std::string> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  ++stats_.assignments;

  if (ref_keys.empty()) {
    return sorted[rng_.index(sorted.size())];
  }

  auto util_of = [this](const std::string& slot) {
    auto it = slot_views_.find(slot);
    return it == slot_views_.end() ? 0.0 : it->second.util;
  };
  auto overlap_of = [this, &ref_keys](const std::string& slot) {
    std::string cache = slot.substr(0, slot.find(':')) + ":c";
    auto it = cache_keys_.find(cache);
    if (it == cache_keys_.end()) return size_t{0};
    size_t n = 0;
    for (const auto& key : ref_keys) {
      if (it->second.contains(key)) ++n;
    }
    return n;
  };

  std::vector<std::string> eligible;
  for (const auto& slot : sorted) {
    if (util_of(slot) <= cfg_.saturation) eligible.push_back(slot);
  }
  if (eligible.empty()) {
    // Everyone is saturated: fall back to the least-loaded executor and
    // flag the event.
    ++stats_.saturated_assignments;
    std::string best = sorted.front();
    for (const auto& slot : sorted) {
      if (util_of(slot) < util_of(best)) best = slot;
    }
    return best;
  }

  std::string best = eligible.front();
  for (const auto& slot : eligible) {
    size_t o = overlap_of(slot);
    size_t b = overlap_of(best);
    if (o > b || (o == b && util_of(slot) < util_of(best))) {
      best = slot;  // ties beyond (overlap, util) resolve to lowest address
    }
  }
  return best;
}

void Scheduler::fail_request(const exec::Request& request,
                             const std::string& error) {
  exec::Completion done;
  done.request_id = request.request_id;
  done.dag = request.dag;
  done.client = request.client;
  done.ok = false;
  done.error = error;
  done.finished_at = env_.kernel->now();
  if (env_.on_completion) env_.on_completion(done);
}

void Scheduler::invoke(const exec::Request& request) {
  note_call(request.dag);
  if (request.single) {
    if (!registry_.contains(request.dag)) {
      // Not seen locally; trust the registry in storage.
      kvs_.get("_sys/registry",
               [this, request](std::optional<lattice::Capsule> c) {
                 bool found = false;
                 if (c && !c->is_lww()) {
                   found = c->causal().values.contains(request.dag);
                 }
                 if (!found) {
                   fail_request(request, "UnknownFunction: " + request.dag);
                   return;
                 }
                 registry_.insert(request.dag);
                 invoke(request);
               });
      return;
    }
    exec::DagSpec solo;
    solo.name = request.dag;
    solo.functions = {request.dag};
    std::vector<std::string> candidates = live_slots();
    if (candidates.empty()) {
      fail_request(request, "NoAvailableExecutor");
      return;
    }
    std::string slot =
        pick_executor(candidates, request.ref_keys(request.dag));
    std::map<std::string, std::string> schedule{{request.dag, slot}};
    dispatch(next_execution_id(), request, solo, schedule, 0);
    return;
  }

  auto it = dags_.find(request.dag);
  if (it == dags_.end()) {
    kvs_.get("_sys/dag/" + request.dag,
             [this, request](std::optional<lattice::Capsule> c) {
               if (!c) {
                 fail_request(request, "UnknownDag: " + request.dag);
                 return;
               }
               dags_[request.dag] =
                   exec::DagSpec::from_json(Json::parse(c->revealed()));
               invoke(request);
             });
    return;
  }
  schedule_dag(next_execution_id(), request, 0);
}

void Scheduler::schedule_dag(const std::string& execution,
                             const exec::Request& request, int attempt) {
  auto it = dags_.find(request.dag);
  if (it == dags_.end()) {
    fail_request(request, "UnknownDag: " + request.dag);
    return;
  }
  const exec::DagSpec& dag = it->second;

  std::map<std::string, std::string> schedule;
  for (const auto& fn : dag.functions) {
    std::vector<std::string> candidates = pinned_slots(fn);
    if (candidates.empty()) {
      // Pins may have died with a node; re-pin on demand.
      std::vector<std::string> all = live_slots();
      if (all.empty()) {
        fail_request(request, "NoAvailableExecutor: " + fn);
        return;
      }
      std::stable_sort(all.begin(), all.end(),
                       [this](const std::string& a, const std::string& b) {
                         return slot_views_[a].util < slot_views_[b].util;
                       });
      pin_function(fn, all.front(), nullptr);
      candidates = {all.front()};
    }
    schedule[fn] = pick_executor(candidates, request.ref_keys(fn));
  }
  ++stats_.schedules;
  dispatch(execution, request, dag, schedule, attempt);
}

void Scheduler::dispatch(const std::string& execution,
                         const exec::Request& request,
                         const exec::DagSpec& dag,
                         const std::map<std::string, std::string>& schedule,
                         int attempt) {
  env_.log->schedule(execution, dag.name, schedule, dag.edges);
  if (on_execution_started) {
    on_execution_started(execution, request, schedule, attempt);
  }

  // Broadcast the schedule, collect acks, then trigger the sources; every
  // participant observes the schedule before any stage runs.
  std::set<std::string> participants;
  for (const auto& [fn, slot] : schedule) participants.insert(slot);
  auto pending = std::make_shared<size_t>(participants.size());
  auto fire = [this, execution, request, dag, schedule, attempt]() {
    for (const auto& fn : dag.sources()) {
      exec::StageTrigger trigger;
      trigger.execution = execution;
      trigger.fn = fn;
      trigger.dag = dag;
      trigger.schedule = schedule;
      trigger.request = request;
      trigger.attempt = attempt;
      const std::string slot = schedule.at(fn);
      auto it = env_.slots->find(slot);
      exec::Slot* target = it == env_.slots->end() ? nullptr : it->second;
      env_.net->send(id_, slot, "stage_trigger", [target, trigger]() {
        if (target != nullptr) target->on_trigger(trigger);
      });
    }
  };
  for (const auto& slot : participants) {
    auto it = env_.slots->find(slot);
    exec::Slot* target = it == env_.slots->end() ? nullptr : it->second;
    env_.net->send(
        id_, slot, "schedule_bcast",
        [this, target, slot, execution, pending, fire]() {
          if (target == nullptr) return;
          target->on_schedule_broadcast(execution, [this, slot, pending,
                                                    fire]() {
            env_.net->send(slot, id_, "schedule_ack", [pending, fire]() {
              if (--*pending == 0) fire();
            });
          });
        });
  }
  if (participants.empty()) fire();
}

void Scheduler::refresh_views() {
  kvs_.get("_sys/cluster", [this](std::optional<lattice::Capsule> c) {
    if (!c) return;
    Json view = Json::parse(c->revealed());
    for (const auto& node : view.at("nodes")) {
      bool live = node.at("state").get<std::string>() == "live";
      for (const auto& slot : node.at("slots")) {
        std::string addr = slot.get<std::string>();
        slot_views_[addr].live = live;
        if (!live) continue;
        kvs_.get("_meta/exec/" + addr,
                 [this, addr](std::optional<lattice::Capsule> m) {
                   if (!m) return;
                   Json j = Json::parse(m->revealed());
                   SlotView& v = slot_views_[addr];
                   v.util = j.at("util").get<double>();
                   v.pinned.clear();
                   for (const auto& fn : j.at("pinned")) {
                     v.pinned.insert(fn.get<std::string>());
                   }
                   v.live = true;
                 });
      }
      std::string cache = node.at("id").get<std::string>() + ":c";
      kvs_.get("_meta/cachekeys/" + cache,
               [this, cache](std::optional<lattice::Capsule> m) {
                 if (!m) return;
                 Json keys = Json::parse(m->revealed());
                 std::set<std::string>& s = cache_keys_[cache];
                 s.clear();
                 for (const auto& key : keys) s.insert(key.get<std::string>());
               });
    }
  });

  // Push local call counts for the monitoring system.
  Json counts;
  for (const auto& [dag, n] : call_counts_) counts[dag] = n;
  lattice::Capsule capsule = lattice::encapsulate(
      counts.dump(), lattice::Mode::kLww, id_, ++meta_clock_, {});
  kvs_.put("_meta/sched/" + id_, capsule, nullptr);
}

void Scheduler::start() {
  env_.kernel->after(cfg_.refresh_period, [this]() {
    if (!running_) return;
    refresh_views();
    start();
  });
}

}  // namespace faasim::sched
