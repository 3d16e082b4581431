#include "faasim/executor.hpp"

#include <algorithm>

namespace faasim::exec {

Json FunctionDef::to_json() const {
  Json j;
  j["name"] = name;
  j["body"] = body;
  j["service_ms"] = service_ms;
  return j;
}

FunctionDef FunctionDef::from_json(const Json& j) {
  FunctionDef def;
  def.name = j.at("name").get<std::string>();
  def.body = j.at("body").get<std::string>();
  def.service_ms = j.at("service_ms").get<int64_t>();
  return def;
}

std::string DagSpec::validate() const {
  std::set<std::string> names(functions.begin(), functions.end());
  if (names.size() != functions.size()) return "duplicate function in dag";
  for (const auto& [from, to] : edges) {
    if (!names.contains(from) || !names.contains(to)) {
      return "edge endpoint not in dag: " + from + "->" + to;
    }
  }
  if (topo_order().size() != functions.size()) return "dag has a cycle";
  return "";
}

bool DagSpec::linear() const {
  for (const auto& fn : functions) {
    if (parents(fn).size() > 1 || children(fn).size() > 1) return false;
  }
  return sources().size() == 1 && sinks().size() == 1;
}

std::vector<std::string> DagSpec::sources() const {
  std::vector<std::string> out;
  for (const auto& fn : functions) {
    if (parents(fn).empty()) out.push_back(fn);
  }
  return out;
}

std::vector<std::string> DagSpec::sinks() const {
  std::vector<std::string> out;
  for (const auto& fn : functions) {
    if (children(fn).empty()) out.push_back(fn);
  }
  return out;
}

std::vector<std::string> DagSpec::parents(const std::string& fn) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : edges) {
    if (to == fn) out.push_back(from);
  }
  return out;
}

std::vector<std::string> DagSpec::children(const std::string& fn) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : edges) {
    if (from == fn) out.push_back(to);
  }
  return out;
}

std::vector<std::string> DagSpec::topo_order() const {
  std::map<std::string, size_t> indegree;
  for (const auto& fn : functions) indegree[fn] = 0;
  for (const auto& [from, to] : edges) {
    if (from == to) return {};  // self-loop
    ++indegree[to];
  }
  std::vector<std::string> ready;
  for (const auto& fn : functions) {
    if (indegree[fn] == 0) ready.push_back(fn);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string fn = ready.front();
    ready.erase(ready.begin());
    order.push_back(fn);
    for (const auto& child : children(fn)) {
      if (--indegree[child] == 0) ready.push_back(child);
    }
  }
  return order.size() == functions.size() ? order
                                          : std::vector<std::string>{};
}

Json DagSpec::to_json() const {
  Json j;
  j["name"] = name;
  j["functions"] = functions;
  Json e = Json::array();
  for (const auto& [from, to] : edges) e.push_back(Json::array({from, to}));
  j["edges"] = e;
  return j;
}

DagSpec DagSpec::from_json(const Json& j) {
  DagSpec spec;
  spec.name = j.at("name").get<std::string>();
  for (const auto& fn : j.at("functions")) {
    spec.functions.push_back(fn.get<std::string>());
  }
  for (const auto& e : j.at("edges")) {
    spec.edges.emplace_back(e.at(0).get<std::string>(),
                            e.at(1).get<std::string>());
  }
  return spec;
}

Json ArgSpec::to_json() const {
  Json j;
  switch (kind) {
    case Kind::kLiteral: j["lit"] = text; break;
    case Kind::kRef: j["ref"] = text; break;
    case Kind::kUpstream: j["up"] = true; break;
  }
  return j;
}

ArgSpec ArgSpec::from_json(const Json& j) {
  if (j.contains("lit")) return literal(j["lit"].get<std::string>());
  if (j.contains("ref")) return ref(j["ref"].get<std::string>());
  return upstream();
}

std::vector<std::string> Request::ref_keys(const std::string& fn) const {
  std::vector<std::string> out;
  auto it = args.find(fn);
  if (it == args.end()) return out;
  for (const ArgSpec& arg : it->second) {
    if (arg.kind == ArgSpec::Kind::kRef) out.push_back(arg.text);
  }
  return out;
}

std::string slot_of_invocation(const std::string& invocation_id) {
  auto pos = invocation_id.find('#');
  return pos == std::string::npos ? invocation_id
                                  : invocation_id.substr(0, pos);
}

void InvocationCtx::send(const std::string& to_id, const Json& body) {
  Message msg;
  msg.id = id_ + "/" + std::to_string(send_seq_++);
  msg.from = id_;
  msg.body = body;
  std::string target = slot_of_invocation(to_id);
  Env& env = slot_->env();
  if (env.dir->alive(target)) {
    Slot* peer = env.slots->at(target);
    env.net->send(slot_->addr(), target, "direct_msg",
                  [peer, to_id, msg]() { peer->deliver_message(to_id, msg); });
    return;
  }
  // No direct connection: park the message in the receiver's KVS inbox.
  Json wire;
  wire["id"] = msg.id;
  wire["from"] = msg.from;
  wire["body"] = msg.body;
  lattice::CausalCapsule capsule;
  capsule.vc.set("msg:" + msg.id, 1);
  capsule.values.insert(wire.dump());
  slot_->kvs().put("_sys/inbox/" + to_id, lattice::Capsule{capsule}, nullptr);
}

void InvocationCtx::recv(std::function<void(std::vector<Message>)> cb) {
  std::vector<Message> out;
  while (!mailbox_.empty()) {
    Message msg = std::move(mailbox_.front());
    mailbox_.pop_front();
    if (!seen(msg.id)) out.push_back(std::move(msg));
  }
  // Fall back to draining the inbox key.
  slot_->kvs().get(
      "_sys/inbox/" + id_,
      [this, out = std::move(out), cb](std::optional<lattice::Capsule> c) mutable {
        if (c && !c->is_lww()) {
          for (const auto& raw : c->causal().values) {
            Json wire = Json::parse(raw);
            Message msg;
            msg.id = wire.at("id").get<std::string>();
            msg.from = wire.at("from").get<std::string>();
            msg.body = wire.at("body");
            if (!seen(msg.id)) out.push_back(std::move(msg));
          }
        }
        cb(std::move(out));
      });
}

bool InvocationCtx::seen(const std::string& msg_id) {
  return !seen_.insert(msg_id).second;
}

void InvocationCtx::deliver(Message msg) {
  if (on_message_) {
    if (!seen(msg.id)) on_message_(std::move(msg));
    return;
  }
  mailbox_.push_back(std::move(msg));
}

Slot::Slot(Env env, std::string node_id, std::string addr,
           kvs::Client kvs_client, cache::Cache* local_cache)
    : env_(std::move(env)),
      node_id_(std::move(node_id)),
      addr_(std::move(addr)),
      kvs_(std::move(kvs_client)),
      cache_(local_cache) {}

std::string Slot::next_invocation_id() {
  return addr_ + "#" + std::to_string(invocation_seq_++);
}

void Slot::deliver_message(const std::string& invocation_id, Message msg) {
  if (!alive_) return;
  auto it = active_ctx_.find(invocation_id);
  if (it == active_ctx_.end()) return;  // invocation finished; dropped
  it->second->deliver(std::move(msg));
}

std::shared_ptr<InvocationCtx> Slot::spawn_actor(const std::string& tag) {
  std::string id = next_invocation_id();
  (void)tag;
  auto ctx = std::make_shared<InvocationCtx>(id, this);
  active_ctx_[id] = ctx;
  return ctx;
}

void Slot::finish_actor(const std::string& invocation_id) {
  active_ctx_.erase(invocation_id);
}

void Slot::on_pin(const std::string& fn, std::function<void(bool)> ack) {
  if (!alive_) return;
  pinned_.insert(fn);
  if (defs_.contains(fn)) {
    if (ack) ack(true);
    return;
  }
  fetch_def(fn, [this, fn, ack](std::optional<FunctionDef> def) {
    if (def) defs_[fn] = *def;
    if (ack) ack(def.has_value());
  });
}

void Slot::on_unpin(const std::string& fn) { pinned_.erase(fn); }

void Slot::on_schedule_broadcast(const std::string& execution,
                                 std::function<void()> ack) {
  if (!alive_) return;
  (void)execution;
  if (ack) ack();
}

void Slot::fetch_def(const std::string& fn,
                     std::function<void(std::optional<FunctionDef>)> cb) {
  kvs_.get("_sys/fn/" + fn,
           [cb](std::optional<lattice::Capsule> c) {
             if (!c) {
               cb(std::nullopt);
               return;
             }
             cb(FunctionDef::from_json(Json::parse(c->revealed())));
           });
}

void Slot::on_trigger(StageTrigger trigger) {
  if (!alive_) return;
  size_t indegree = trigger.dag.parents(trigger.fn).size();
  if (indegree > 1) {
    auto& partial = partial_[trigger.execution];
    auto it = partial.find(trigger.fn);
    if (it == partial.end()) {
      partial.emplace(trigger.fn, Partial{trigger, 1});
      return;
    }
    Partial& p = it->second;
    for (const auto& [parent, value] : trigger.inputs) {
      p.trigger.inputs.emplace(parent, value);
    }
    // First arrival wins per key; dependency constraints take the join.
    for (const auto& [key, entry] : trigger.read_set) {
      p.trigger.read_set.emplace(key, entry);
    }
    p.trigger.deps.merge(trigger.deps);
    if (++p.arrived < indegree) return;
    StageTrigger merged = std::move(p.trigger);
    partial.erase(trigger.fn);
    queue_.push_back(std::move(merged));
    pump();
    return;
  }
  queue_.push_back(std::move(trigger));
  pump();
}

void Slot::pump() {
  if (!alive_ || busy_ || queue_.empty()) return;
  busy_ = true;
  auto inv = std::make_shared<Invocation>();
  inv->trigger = std::move(queue_.front());
  queue_.pop_front();
  inv->started = env_.kernel->now();
  accounted_mark_ = inv->started;
  current_ = inv;
  std::string id = next_invocation_id();
  inv->ctx = std::make_shared<InvocationCtx>(id, this);
  active_ctx_[id] = inv->ctx;
  run(inv);
}

void Slot::note_busy(sim::Time from) {
  sim::Time now = env_.kernel->now();
  sim::Time start = std::max(from, accounted_mark_);
  if (now > start) busy_accum_ += now - start;
  accounted_mark_ = now;
}

void Slot::run(InvocationPtr inv) {
  const std::string& fn = inv->trigger.fn;
  if (!defs_.contains(fn)) {
    fetch_def(fn, [this, inv, fn](std::optional<FunctionDef> def) {
      if (inv->aborted || !alive_) return;
      if (!def) {
        fail_stage(inv, "unknown function: " + fn, false);
        return;
      }
      defs_[fn] = *def;
      run(inv);
    });
    return;
  }
  resolve_args(inv, [this, inv](bool ok) {
    if (inv->aborted || !alive_ || !ok) return;
    const FunctionDef& def = defs_.at(inv->trigger.fn);
    env_.kernel->after(def.service_ms * sim::kMillisecond,
                       [this, inv]() {
                         if (inv->aborted || !alive_) return;
                         eval_body(inv);
                       });
  });
}

void Slot::read_key(InvocationPtr inv, const std::string& key,
                    cache::ReadCallback cb) {
  const std::string& exec = inv->trigger.execution;
  switch (env_.mode) {
    case lattice::Mode::kDsrr:
      cache_->rr_read(exec, key, inv->trigger.read_set, std::move(cb));
      break;
    case lattice::Mode::kDsc:
      cache_->causal_read(exec, key, inv->trigger.read_set, inv->trigger.deps,
                          std::move(cb));
      break;
    default:
      cache_->get(key, std::move(cb));
      break;
  }
}

void Slot::apply_read(InvocationPtr inv, const std::string& key,
                      const cache::ReadResult& r) {
  env_.log->read(key, r.version, addr_, r.serving_cache,
                 inv->trigger.execution, inv->trigger.fn, r.value);
  lattice::Mode mode = env_.mode;
  if (mode == lattice::Mode::kDsrr) {
    inv->trigger.read_set.emplace(key,
                                  cache::SessionEntry{r.version, r.serving_cache});
  } else if (mode == lattice::Mode::kDsc || mode == lattice::Mode::kMk) {
    inv->trigger.read_set.insert_or_assign(
        key, cache::SessionEntry{r.version, r.serving_cache});
    cache::SessionDeps delta;
    delta.vcs = r.capsule_deps;
    delta.holders = r.dep_holders;
    if (!r.version.is_lww()) {
      delta.vcs.entries[key].merge_max(r.version.vc());
      delta.holders[key] = r.serving_cache;
    }
    inv->trigger.deps.merge(delta);
  }
}

void Slot::resolve_args(InvocationPtr inv, std::function<void(bool)> done) {
  const auto& arg_specs = inv->trigger.request.args;
  auto specs_it = arg_specs.find(inv->trigger.fn);
  std::vector<ArgSpec> specs =
      specs_it == arg_specs.end() ? std::vector<ArgSpec>{} : specs_it->second;
  inv->resolved_args.assign(specs.size(), dsl::Value{});

  // Upstream results are consumed in parent order.
  std::vector<dsl::Value> upstream;
  for (const std::string& parent : inv->trigger.dag.parents(inv->trigger.fn)) {
    auto it = inv->trigger.inputs.find(parent);
    if (it != inv->trigger.inputs.end()) upstream.push_back(it->second);
  }
  size_t upstream_used = 0;

  struct Shared {
    size_t outstanding = 1;
    bool failed = false;
  };
  auto shared = std::make_shared<Shared>();
  auto settle = [this, shared, done]() {
    if (--shared->outstanding == 0 && !shared->failed) done(true);
  };

  // Identical referenced keys resolve once and fan out; distinct keys in
  // session modes resolve sequentially so every read sees the constraints
  // of the previous one.
  std::map<std::string, std::vector<size_t>> ref_slots;
  for (size_t i = 0; i < specs.size(); ++i) {
    const ArgSpec& spec = specs[i];
    switch (spec.kind) {
      case ArgSpec::Kind::kLiteral:
        try {
          inv->resolved_args[i] = dsl::Value::decode(spec.text);
        } catch (const std::exception&) {
          inv->resolved_args[i] = dsl::Value{spec.text};
        }
        break;
      case ArgSpec::Kind::kUpstream:
        if (upstream_used < upstream.size()) {
          inv->resolved_args[i] = upstream[upstream_used++];
        }
        break;
      case ArgSpec::Kind::kRef:
        ref_slots[spec.text].push_back(i);
        break;
    }
  }

  std::vector<std::string> keys;
  for (const auto& [key, slots] : ref_slots) keys.push_back(key);

  bool sequential = env_.mode == lattice::Mode::kDsc;
  if (!sequential) {
    shared->outstanding += keys.size();
    for (const std::string& key : keys) {
      auto indices = ref_slots[key];
      read_key(inv, key, [this, inv, key, indices, shared, settle,
                          done](cache::ReadResult r) {
        if (inv->aborted || !alive_ || shared->failed) return;
        if (r.status != cache::ReadStatus::kOk) {
          shared->failed = true;
          fail_stage(inv, "read of " + key + " failed",
                     r.status == cache::ReadStatus::kUnavailable);
          return;
        }
        apply_read(inv, key, r);
        for (size_t i : indices) {
          inv->resolved_args[i] = dsl::Value::decode(r.value);
        }
        settle();
      });
    }
    settle();
    return;
  }

  // Sequential chain for causal sessions.
  auto step = std::make_shared<std::function<void(size_t)>>();
  *step = [this, inv, keys, ref_slots, settle, shared, step,
           done](size_t i) mutable {
    if (inv->aborted || !alive_ || shared->failed) return;
    if (i == keys.size()) {
      settle();
      return;
    }
    const std::string key = keys[i];
    auto indices = ref_slots.at(key);
    read_key(inv, key, [this, inv, key, indices, i, step, shared,
                        done](cache::ReadResult r) {
      if (inv->aborted || !alive_ || shared->failed) return;
      if (r.status != cache::ReadStatus::kOk) {
        shared->failed = true;
        fail_stage(inv, "read of " + key + " failed",
                   r.status == cache::ReadStatus::kUnavailable);
        return;
      }
      apply_read(inv, key, r);
      for (size_t idx : indices) {
        inv->resolved_args[idx] = dsl::Value::decode(r.value);
      }
      (*step)(i + 1);
    });
  };
  (*step)(0);
}

void Slot::write_key(InvocationPtr inv, const std::string& key,
                     const dsl::Value& value, std::function<void(bool)> done) {
  cache::SessionDeps empty;
  const cache::SessionDeps* deps = &empty;
  lattice::Mode mode = env_.mode;
  if (mode == lattice::Mode::kDsc || mode == lattice::Mode::kMk) {
    deps = &inv->trigger.deps;
  }
  lattice::DependencySet written_deps = deps->vcs;
  cache_->put(inv->trigger.execution, key, value.encode(), addr_, *deps,
              [this, inv, key, value, written_deps,
               done](lattice::Version version) {
                if (inv->aborted || !alive_) return;
                env_.log->write(key, version, addr_, cache_->addr(),
                                inv->trigger.execution, inv->trigger.fn,
                                value.encode(), written_deps);
                lattice::Mode mode = env_.mode;
                if (mode == lattice::Mode::kDsrr) {
                  // Later stages must see this update, not the first read.
                  inv->trigger.read_set.insert_or_assign(
                      key, cache::SessionEntry{version, cache_->addr()});
                } else if (mode == lattice::Mode::kDsc ||
                           mode == lattice::Mode::kMk) {
                  inv->trigger.read_set.insert_or_assign(
                      key, cache::SessionEntry{version, cache_->addr()});
                  cache::SessionDeps delta;
                  delta.vcs.entries[key] = version.vc();
                  delta.holders[key] = cache_->addr();
                  inv->trigger.deps.merge(delta);
                }
                done(true);
              });
}

void Slot::eval_body(InvocationPtr inv) {
  const FunctionDef& def = defs_.at(inv->trigger.fn);
  dsl::ExprPtr body;
  try {
    body = dsl::parse(def.body);
  } catch (const std::exception& ex) {
    fail_stage(inv, std::string("body parse: ") + ex.what(), false);
    return;
  }

  dsl::StoreOps store;
  store.kget = [this, inv](const std::string& key,
                           std::function<void(bool, dsl::Value)> k) {
    read_key(inv, key, [this, inv, key, k](cache::ReadResult r) {
      if (inv->aborted || !alive_) return;
      if (r.status == cache::ReadStatus::kUnavailable) {
        fail_stage(inv, "read of " + key + " unavailable", true);
        return;
      }
      if (r.status != cache::ReadStatus::kOk) {
        k(false, {});
        return;
      }
      apply_read(inv, key, r);
      k(true, dsl::Value::decode(r.value));
    });
  };
  store.kput = [this, inv](const std::string& key, const dsl::Value& value,
                           std::function<void(bool)> k) {
    write_key(inv, key, value, [k](bool ok) { k(ok); });
  };

  dsl::eval(body, inv->resolved_args, store,
            [this, inv](bool ok, dsl::Value result, std::string error) {
              if (inv->aborted || !alive_) return;
              if (!ok) {
                fail_stage(inv, "execution error: " + error, false);
                return;
              }
              finish_stage(inv, result);
            });
}

void Slot::finish_stage(InvocationPtr inv, const dsl::Value& result) {
  const StageTrigger& t = inv->trigger;
  std::vector<std::string> next = t.dag.children(t.fn);
  if (next.empty()) {
    complete_dag(inv, result);
    return;
  }
  for (const std::string& child : next) {
    auto assigned = t.schedule.find(child);
    if (assigned == t.schedule.end()) continue;
    StageTrigger out;
    out.execution = t.execution;
    out.fn = child;
    out.dag = t.dag;
    out.inputs[t.fn] = result;
    if (env_.mode == lattice::Mode::kDsrr) {
      out.read_set = t.read_set;
    } else if (env_.mode == lattice::Mode::kDsc) {
      out.read_set = t.read_set;
      out.deps = t.deps;
    }
    out.schedule = t.schedule;
    out.request = t.request;
    out.attempt = t.attempt;
    const std::string target = assigned->second;
    Slot* peer = nullptr;
    auto it = env_.slots->find(target);
    if (it != env_.slots->end()) peer = it->second;
    env_.net->send(addr_, target, "stage_trigger",
                   [peer, out]() {
                     if (peer != nullptr) peer->on_trigger(out);
                   });
  }
  ++completed_stages_;
  recent_latencies_.push_back(env_.kernel->now() - inv->started);
  if (recent_latencies_.size() > 64) {
    recent_latencies_.erase(recent_latencies_.begin());
  }
  note_busy(inv->started);
  active_ctx_.erase(inv->ctx->id());
  busy_ = false;
  current_.reset();
  pump();
}

void Slot::complete_dag(InvocationPtr inv, const dsl::Value& result) {
  const StageTrigger& t = inv->trigger;
  auto deliver = [this, inv, result]() {
    const StageTrigger& t = inv->trigger;
    Completion done;
    done.execution = t.execution;
    done.request_id = t.request.request_id;
    done.dag = t.request.dag;
    done.client = t.request.client;
    done.attempt = t.attempt;
    done.ok = true;
    done.result = result;
    done.read_set = t.read_set;
    done.finished_at = env_.kernel->now();

    if (t.request.store_in_kvs) {
      lattice::Capsule future = lattice::encapsulate(
          result.encode(), lattice::Mode::kLww, addr_, ++lww_seq_, {});
      kvs_.put("_sys/future/" + t.request.request_id, future, nullptr);
    }
    if (env_.on_completion) env_.on_completion(done);

    // Completion lets every participating cache drop its snapshots.
    if (env_.mode == lattice::Mode::kDsrr || env_.mode == lattice::Mode::kDsc) {
      std::set<std::string> nodes;
      for (const auto& [fn, slot] : t.schedule) {
        nodes.insert(slot.substr(0, slot.find(':')));
      }
      for (const std::string& node : nodes) {
        std::string cache_addr = node + ":c";
        auto it = env_.caches->find(cache_addr);
        cache::Cache* peer = it == env_.caches->end() ? nullptr : it->second;
        std::string exec = t.execution;
        env_.net->send(addr_, cache_addr, "gc", [peer, exec]() {
          if (peer != nullptr) peer->gc(exec);
        });
      }
    }

    ++completed_stages_;
    recent_latencies_.push_back(env_.kernel->now() - inv->started);
    if (recent_latencies_.size() > 64) {
      recent_latencies_.erase(recent_latencies_.begin());
    }
    note_busy(inv->started);
    active_ctx_.erase(inv->ctx->id());
    busy_ = false;
    current_.reset();
    pump();
  };

  if (!t.request.sink_write_key.empty()) {
    write_key(inv, t.request.sink_write_key, result,
              [this, inv, deliver](bool ok) {
                if (inv->aborted || !alive_) return;
                (void)ok;
                deliver();
              });
    return;
  }
  deliver();
}

void Slot::fail_stage(InvocationPtr inv, const std::string& reason,
                      bool restart) {
  if (inv->aborted) return;
  inv->aborted = true;
  const StageTrigger& t = inv->trigger;
  if (restart) {
    if (env_.on_restart) env_.on_restart(t.execution, reason);
  } else {
    Completion done;
    done.execution = t.execution;
    done.request_id = t.request.request_id;
    done.dag = t.request.dag;
    done.client = t.request.client;
    done.attempt = t.attempt;
    done.ok = false;
    done.error = reason;
    done.finished_at = env_.kernel->now();
    if (env_.on_completion) env_.on_completion(done);
  }
  note_busy(inv->started);
  active_ctx_.erase(inv->ctx->id());
  busy_ = false;
  current_.reset();
  pump();
}

void Slot::crash() {
  alive_ = false;
  running_ = false;
  env_.dir->set_alive(addr_, false);
  if (current_) current_->aborted = true;
  queue_.clear();
  partial_.clear();
  active_ctx_.clear();
  busy_ = false;
}

void Slot::publish_metrics() {
  sim::Time now = env_.kernel->now();
  sim::Time window = now - window_start_;
  if (busy_ && current_) note_busy(current_->started);
  double util = window > 0 ? static_cast<double>(busy_accum_) /
                                 static_cast<double>(window)
                           : 0.0;
  util = std::min(1.0, std::max(0.0, util));
  last_util_ = util;
  busy_accum_ = 0;
  window_start_ = now;

  Json j;
  j["addr"] = addr_;
  j["util"] = util;
  Json fns = Json::array();
  for (const auto& fn : pinned_) fns.push_back(fn);
  j["pinned"] = fns;
  j["queue"] = queue_.size();
  j["completed"] = completed_stages_;
  Json lat = Json::array();
  for (sim::Time l : recent_latencies_) lat.push_back(l);
  j["recent_latencies_us"] = lat;
  lattice::Capsule capsule = lattice::encapsulate(
      j.dump(), lattice::Mode::kLww, addr_, ++metrics_clock_, {});
  kvs_.put("_meta/exec/" + addr_, capsule, nullptr);
}

void Slot::start() {
  window_start_ = env_.kernel->now();
  env_.kernel->after(env_.metrics_period, [this]() { metrics_tick(); });
}

void Slot::metrics_tick() {
  if (!running_ || !alive_) return;
  publish_metrics();
  env_.kernel->after(env_.metrics_period, [this]() { metrics_tick(); });
}

}  // namespace faasim::exec
