#ifndef FAASIM_EXECUTOR_HPP_
#define FAASIM_EXECUTOR_HPP_

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faasim/cache.hpp"
#include "faasim/dsl.hpp"
#include "faasim/kvs.hpp"
#include "faasim/lattice.hpp"
#include "faasim/net.hpp"
#include "faasim/trace.hpp"

// Long-running function executors. One node hosts a cache plus a fixed
// number of worker slots; each slot runs one invocation at a time and
// threads read-set / dependency metadata to downstream DAG stages.

namespace faasim::exec {

using lattice::Json;

struct FunctionDef {
  std::string name;
  std::string body;  // DSL source
  int64_t service_ms = 1;

  Json to_json() const;
  static FunctionDef from_json(const Json& j);
};

struct DagSpec {
  std::string name;
  std::vector<std::string> functions;
  std::vector<std::pair<std::string, std::string>> edges;

  // Empty string when well formed, else a diagnostic.
  std::string validate() const;
  bool linear() const;
  std::vector<std::string> sources() const;
  std::vector<std::string> sinks() const;
  std::vector<std::string> parents(const std::string& fn) const;
  std::vector<std::string> children(const std::string& fn) const;
  std::vector<std::string> topo_order() const;

  Json to_json() const;
  static DagSpec from_json(const Json& j);
};

struct ArgSpec {
  enum class Kind { kLiteral, kRef, kUpstream };
  Kind kind = Kind::kLiteral;
  std::string text;  // literal DSL source, or the referenced key

  static ArgSpec literal(std::string src) {
    return {Kind::kLiteral, std::move(src)};
  }
  static ArgSpec ref(std::string key) { return {Kind::kRef, std::move(key)}; }
  static ArgSpec upstream() { return {Kind::kUpstream, ""}; }

  Json to_json() const;
  static ArgSpec from_json(const Json& j);
};

// One client request: either a single function call or a DAG execution.
struct Request {
  std::string request_id;
  std::string dag;  // dag name; for single calls the function name
  bool single = false;
  std::map<std::string, std::vector<ArgSpec>> args;  // per function
  std::string sink_write_key;
  bool store_in_kvs = false;
  std::string client;

  std::vector<std::string> ref_keys(const std::string& fn) const;
};

struct StageTrigger {
  std::string execution;
  std::string fn;
  DagSpec dag;  // single-function calls use a one-node dag
  std::map<std::string, dsl::Value> inputs;  // parent fn -> result
  cache::ReadSet read_set;
  cache::SessionDeps deps;
  std::map<std::string, std::string> schedule;  // fn -> slot
  Request request;
  int attempt = 0;
};

struct Completion {
  std::string execution;
  std::string request_id;
  std::string dag;
  std::string client;
  int attempt = 0;
  bool ok = false;
  std::string error;
  dsl::Value result;
  cache::ReadSet read_set;
  sim::Time finished_at = 0;
};

struct Message {
  std::string id;
  std::string from;
  Json body;
};

class Slot;

// Shared wiring handed to every slot by the cluster.
struct Env {
  sim::Kernel* kernel = nullptr;
  net::Network* net = nullptr;
  net::Directory* dir = nullptr;
  trace::Log* log = nullptr;
  lattice::Mode mode = lattice::Mode::kLww;
  std::map<std::string, Slot*>* slots = nullptr;
  std::map<std::string, cache::Cache*>* caches = nullptr;
  std::function<void(const Completion&)> on_completion;
  std::function<void(const std::string& execution, const std::string& reason)>
      on_restart;
  sim::Time metrics_period = 100 * sim::kMillisecond;
};

// Context handed to resident actors (direct messaging users).
class InvocationCtx {
 public:
  InvocationCtx(std::string id, Slot* slot) : id_(std::move(id)), slot_(slot) {}

  const std::string& id() const { return id_; }
  void send(const std::string& to_id, const Json& body);
  void recv(std::function<void(std::vector<Message>)> cb);
  void set_on_message(std::function<void(Message)> fn) {
    on_message_ = std::move(fn);
  }

 private:
  friend class Slot;
  void deliver(Message msg);
  bool seen(const std::string& msg_id);

  std::string id_;
  Slot* slot_;
  std::deque<Message> mailbox_;
  std::set<std::string> seen_;
  uint64_t send_seq_ = 0;
  std::function<void(Message)> on_message_;
};

// Parses an invocation id back to the slot address that owns it.
std::string slot_of_invocation(const std::string& invocation_id);

class Slot {
 public:
  Slot(Env env, std::string node_id, std::string addr, kvs::Client kvs_client,
       cache::Cache* local_cache);

  const std::string& addr() const { return addr_; }
  const std::string& node() const { return node_id_; }
  bool alive() const { return alive_; }

  // Network-facing entry points.
  void on_trigger(StageTrigger trigger);
  void on_pin(const std::string& fn, std::function<void(bool)> ack);
  void on_unpin(const std::string& fn);
  void on_schedule_broadcast(const std::string& execution,
                             std::function<void()> ack);
  void deliver_message(const std::string& invocation_id, Message msg);

  // Resident actors for long-lived messaging protocols.
  std::shared_ptr<InvocationCtx> spawn_actor(const std::string& tag);
  void finish_actor(const std::string& invocation_id);

  const std::set<std::string>& pinned() const { return pinned_; }
  bool pins(const std::string& fn) const { return pinned_.contains(fn); }
  double last_utilization() const { return last_util_; }
  size_t queue_depth() const { return queue_.size(); }

  void crash();
  void start();
  void stop() { running_ = false; }

  kvs::Client& kvs() { return kvs_; }
  cache::Cache* cache() { return cache_; }
  Env& env() { return env_; }

  uint64_t completed_stages() const { return completed_stages_; }

 private:
  friend class InvocationCtx;

  struct Invocation : std::enable_shared_from_this<Invocation> {
    StageTrigger trigger;
    std::shared_ptr<InvocationCtx> ctx;
    std::vector<dsl::Value> resolved_args;
    bool aborted = false;
    sim::Time started = 0;
  };
  using InvocationPtr = std::shared_ptr<Invocation>;

  struct Partial {
    StageTrigger trigger;
    size_t arrived = 0;
  };

  void pump();
  void run(InvocationPtr inv);
  void resolve_args(InvocationPtr inv, std::function<void(bool)> done);
  void read_key(InvocationPtr inv, const std::string& key,
                cache::ReadCallback cb);
  void apply_read(InvocationPtr inv, const std::string& key,
                  const cache::ReadResult& r);
  void write_key(InvocationPtr inv, const std::string& key,
                 const dsl::Value& value, std::function<void(bool)> done);
  void eval_body(InvocationPtr inv);
  void finish_stage(InvocationPtr inv, const dsl::Value& result);
  void fail_stage(InvocationPtr inv, const std::string& reason, bool restart);
  void complete_dag(InvocationPtr inv, const dsl::Value& result);
  void fetch_def(const std::string& fn,
                 std::function<void(std::optional<FunctionDef>)> cb);
  void publish_metrics();
  void metrics_tick();
  std::string next_invocation_id();
  void note_busy(sim::Time from);

  Env env_;
  std::string node_id_;
  std::string addr_;
  kvs::Client kvs_;
  cache::Cache* cache_;
  bool alive_ = true;
  bool running_ = true;

  std::set<std::string> pinned_;
  std::map<std::string, FunctionDef> defs_;
  std::deque<StageTrigger> queue_;
  bool busy_ = false;
  InvocationPtr current_;
  // execution -> fn -> accumulated partial trigger (fan-in)
  std::map<std::string, std::map<std::string, Partial>> partial_;
  std::map<std::string, std::shared_ptr<InvocationCtx>> active_ctx_;

  uint64_t invocation_seq_ = 0;
  uint64_t completed_stages_ = 0;
  uint64_t lww_seq_ = 0;
  sim::Time busy_accum_ = 0;
  sim::Time window_start_ = 0;
  sim::Time accounted_mark_ = 0;
  double last_util_ = 0.0;
  std::vector<sim::Time> recent_latencies_;
  uint64_t metrics_clock_ = 0;
};

}  // namespace faasim::exec

#endif  // FAASIM_EXECUTOR_HPP_
