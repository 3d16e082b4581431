#ifndef FAASIM_KVS_HPP_
#define FAASIM_KVS_HPP_

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faasim/lattice.hpp"
#include "faasim/net.hpp"

// Partitioned, replicated, merge-on-write store plus the key -> caches
// index used to push updates out to co-located caches.

namespace faasim::kvs {

using Key = std::string;

uint64_t stable_hash(const std::string& s);

// Consistent-hash ring over storage node ids. partition_for is a pure
// function of (key, membership): unrelated node additions only remap keys
// on moved ring segments.
class Ring {
 public:
  Ring() = default;
  Ring(const std::vector<std::string>& nodes, int vnodes, int replication);

  std::vector<std::string> partition_for(const Key& key) const;
  bool empty() const { return ring_.empty(); }
  int replication() const { return replication_; }

 private:
  std::map<uint64_t, std::string> ring_;
  int replication_ = 2;
  size_t node_count_ = 0;
};

struct KeysetSnapshot {
  std::string cache_address;
  std::set<Key> keys;
  uint64_t epoch = 0;
};

struct StorageStats {
  uint64_t puts = 0;
  uint64_t gets = 0;
  uint64_t updates_pushed = 0;
};

class StorageNode {
 public:
  using UpdateSink = std::function<void(const std::string& cache, const Key&,
                                        const lattice::Capsule&)>;

  StorageNode(std::string id, net::Network* net, sim::Time propagation_tick);

  const std::string& id() const { return id_; }

  void handle_put(const Key& key, const lattice::Capsule& capsule,
                  std::function<void(lattice::Version)> ack);
  // Replica-side merge, no ack and no propagation duty.
  void handle_replicate(const Key& key, const lattice::Capsule& capsule);
  void handle_get(const Key& key,
                  std::function<void(std::optional<lattice::Capsule>)> reply);
  void handle_delete(const Key& key, std::function<void()> ack);
  void handle_keyset(const KeysetSnapshot& snapshot);

  // Delivers KeyUpdate messages to caches; wired up by the cluster.
  void set_update_sink(UpdateSink sink) { update_sink_ = std::move(sink); }
  void set_ring(const Ring* ring) { ring_ = ring; }

  void start() { schedule_tick(); }
  void stop() { running_ = false; }
  // Flushes pending update propagation immediately (test hook).
  void propagate_now() { propagation_pass(); }

  const std::map<Key, lattice::Capsule>& shard() const { return shard_; }
  const std::map<Key, std::set<std::string>>& index() const { return index_; }
  const StorageStats& stats() const { return stats_; }
  bool owns(const Key& key) const;

  // Installs a capsule without messages or traces (workload preload).
  void preload(const Key& key, const lattice::Capsule& capsule) {
    shard_[key] = capsule;
  }

 private:
  bool merge_in(const Key& key, const lattice::Capsule& capsule);
  bool primary_for(const Key& key) const;
  void propagation_pass();
  void schedule_tick();

  std::string id_;
  net::Network* net_;
  sim::Time propagation_tick_;
  bool running_ = true;
  const Ring* ring_ = nullptr;
  UpdateSink update_sink_;

  std::map<Key, lattice::Capsule> shard_;
  std::map<Key, std::set<std::string>> index_;
  std::map<std::string, uint64_t> cache_epochs_;
  std::map<std::string, std::set<Key>> cache_keys_;  // owned keys per cache
  std::set<Key> dirty_;
  StorageStats stats_;
};

// Routing helper used by caches, schedulers, the manager and clients.
// Puts go to the key's primary replica, which acks after its own merge
// and forwards to sibling replicas; gets go to a seeded-random replica,
// which is how reads can observe replication lag.
class Client {
 public:
  Client(std::string self, net::Network* net, const Ring* ring,
         std::map<std::string, StorageNode*>* nodes)
      : self_(std::move(self)), net_(net), ring_(ring), nodes_(nodes) {}

  // Each returns false when the cluster view is empty (UnknownPartition).
  bool put(const Key& key, const lattice::Capsule& capsule,
           std::function<void(lattice::Version)> ack);
  bool get(const Key& key,
           std::function<void(std::optional<lattice::Capsule>)> reply);
  bool del(const Key& key, std::function<void()> ack);
  void keyset(const KeysetSnapshot& snapshot);

  const std::string& self() const { return self_; }

 private:
  StorageNode* node(const std::string& id) { return nodes_->at(id); }

  std::string self_;
  net::Network* net_;
  const Ring* ring_;
  std::map<std::string, StorageNode*>* nodes_;
};

}  // namespace faasim::kvs

#endif  // FAASIM_KVS_HPP_
