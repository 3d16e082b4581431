#ifndef FAASIM_CACHE_HPP_
#define FAASIM_CACHE_HPP_

#include <functional>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faasim/kvs.hpp"
#include "faasim/lattice.hpp"
#include "faasim/net.hpp"

// Per-node cache that intermediates all KVS access for the co-located
// executor slots. In causal modes the live entries always form a causal
// cut; per-DAG version snapshots back the repeatable-read and causal
// session protocols.

namespace faasim::cache {

using lattice::Bytes;
using lattice::Capsule;
using lattice::DependencySet;
using lattice::VectorClock;
using lattice::Version;

struct SessionEntry {
  Version version;
  std::string holder;  // cache that can serve this exact snapshot

  bool operator==(const SessionEntry&) const = default;
};

// Read-set threaded through a DAG execution: key -> first/latest read.
using ReadSet = std::map<std::string, SessionEntry>;

// Accumulated causal constraints plus holder hints for snapshot fetches.
struct SessionDeps {
  DependencySet vcs;
  std::map<std::string, std::string> holders;

  void merge(const SessionDeps& other);
  bool operator==(const SessionDeps&) const = default;
};

enum class ReadStatus { kOk, kNotFound, kUnavailable };

struct ReadResult {
  ReadStatus status = ReadStatus::kNotFound;
  Bytes value;
  Version version;
  std::string serving_cache;
  DependencySet capsule_deps;                      // causal modes only
  std::map<std::string, std::string> dep_holders;  // key -> cache or ""
};

using ReadCallback = std::function<void(ReadResult)>;

struct CacheConfig {
  size_t capacity = 0;  // live entries; 0 = unbounded
  bool strict_valid = false;
  sim::Time keyset_period = 100 * sim::kMillisecond;
  sim::Time upstream_timeout = 50 * sim::kMillisecond;
  sim::Time retry_interval = 5 * sim::kMillisecond;
  sim::Time miss_timeout = 200 * sim::kMillisecond;
};

struct CacheStats {
  uint64_t hits = 0;
  uint64_t misses = 0;
  uint64_t upstream_fetches = 0;
  uint64_t evictions = 0;
  size_t max_pending = 0;
};

class Cache {
 public:
  Cache(std::string node_id, lattice::Mode mode, CacheConfig cfg,
        net::Network* net, kvs::Client kvs_client,
        std::map<std::string, Cache*>* peers);

  const std::string& addr() const { return addr_; }
  lattice::Mode mode() const { return mode_; }

  // Plain read path (LWW, SK, MK): local hit or fetch-on-miss.
  void get(const std::string& key, ReadCallback cb);
  // Repeatable-read path; the caller owns and threads R.
  void rr_read(const std::string& execution, const std::string& key,
               const ReadSet& read_set, ReadCallback cb);
  // Distributed-session causal path.
  void causal_read(const std::string& execution, const std::string& key,
                   const ReadSet& read_set, const SessionDeps& deps,
                   ReadCallback cb);
  // Encapsulates, installs locally, acks, then pushes to the KVS. The ack
  // carries the freshly written version (not the post-merge clock).
  void put(const std::string& execution, const std::string& key,
           const Bytes& value, const std::string& writer,
           const SessionDeps& session_deps,
           std::function<void(Version)> ack);

  void gc(const std::string& execution);

  // Network-facing.
  void on_key_update(const std::string& key, const Capsule& capsule);
  void on_fetch_snapshot(const std::string& execution, const std::string& key,
                         const std::optional<Version>& required,
                         std::function<void(std::optional<Capsule>,
                                            std::map<std::string, std::string>)>
                             respond);

  void start();
  void stop() { running_ = false; }
  void publish_keyset();

  // Introspection.
  std::map<std::string, Capsule> contents() const;
  bool holds(const std::string& key) const { return entries_.contains(key); }
  size_t snapshot_count(const std::string& execution) const;
  size_t total_snapshots() const;
  size_t pending_depth() const { return pending_.size(); }
  const CacheStats& stats() const { return stats_; }
  uint64_t epoch() const { return epoch_; }

 private:
  struct Entry {
    Capsule capsule;
    sim::Time last_refresh = 0;
  };

  struct PendingInstall {
    Capsule capsule;
    std::set<std::string> fetching;
  };

  bool cut_maintained() const {
    return mode_ == lattice::Mode::kMk || mode_ == lattice::Mode::kDsc;
  }

  Entry* live(const std::string& key);
  void touch(const std::string& key);
  void install(const std::string& key, const Capsule& capsule);
  void evict_if_over_capacity();
  // Entry point for every inbound capsule (updates, fetches). In cut
  // modes this buffers until dependencies are satisfiable.
  void ingest(const std::string& key, const Capsule& capsule);
  void process_pending();
  void retry_pending();
  void schedule_keyset_tick();
  void schedule_retry_tick();
  void request_fetch(const std::string& key);
  void notify_waiters(const std::string& key);
  void enforce_cut_for_deps(const DependencySet& deps);

  void serve_local(const std::string& execution, const std::string& key,
                   const Capsule& capsule, const std::string& serving,
                   ReadCallback cb);
  void freeze(const std::string& execution, const std::string& key,
              const Capsule& capsule);
  std::map<std::string, std::string> freeze_deps(const std::string& execution,
                                                 const DependencySet& deps);
  const Capsule* frozen(const std::string& execution,
                        const std::string& key) const;

  void fetch_and_serve(const std::string& execution, const std::string& key,
                       ReadCallback cb);
  void await_install(const std::string& key, sim::Time deadline,
                     std::function<void(bool)> done);
  void fetch_upstream(const std::string& holder, const std::string& execution,
                      const std::string& key,
                      const std::optional<Version>& required,
                      std::function<void(std::optional<Capsule>,
                                         std::map<std::string, std::string>)>
                          done);
  // Re-fetches from the KVS until the returned clock is valid against
  // `required` or the deadline passes.
  void validity_fetch(const std::string& execution, const std::string& key,
                      const VectorClock& required, sim::Time deadline,
                      ReadCallback cb);
  void causal_read_constrained(const std::string& execution,
                               const std::string& key,
                               const VectorClock& required,
                               std::vector<std::string> holders,
                               ReadCallback cb);

  std::string node_id_;
  std::string addr_;
  lattice::Mode mode_;
  CacheConfig cfg_;
  net::Network* net_;
  kvs::Client kvs_;
  std::map<std::string, Cache*>* peers_;
  bool running_ = true;

  std::map<std::string, Entry> entries_;
  std::list<std::string> lru_;  // back = most recent
  std::map<std::string, std::list<std::string>::iterator> lru_pos_;

  // execution -> key -> frozen capsule
  std::map<std::string, std::map<std::string, Capsule>> snapshots_;

  uint64_t lww_clock_ = 0;
  std::map<std::string, uint64_t> causal_clocks_;  // per writer thread

  std::map<std::string, PendingInstall> pending_;
  bool processing_ = false;
  std::map<std::string, VectorClock> dep_floor_;
  std::map<std::string, std::vector<std::function<void()>>> install_waiters_;
  std::set<std::string> fetch_outstanding_;

  uint64_t epoch_ = 0;
  CacheStats stats_;
};

}  // namespace faasim::cache

#endif  // FAASIM_CACHE_HPP_
