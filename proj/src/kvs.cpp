#include "faasim/kvs.hpp"

#include <algorithm>

namespace faasim::kvs {

uint64_t stable_hash(const std::string& s) {
  // FNV-1a, fixed across platforms so partitioning is reproducible.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Ring::Ring(const std::vector<std::string>& nodes, int vnodes, int replication)
    : replication_(replication), node_count_(nodes.size()) {
  for (const auto& node : nodes) {
    for (int v = 0; v < vnodes; ++v) {
      ring_[stable_hash(node + "#" + std::to_string(v))] = node;
    }
  }
}

std::vector<std::string> Ring::partition_for(const Key& key) const {
  std::vector<std::string> out;
  if (ring_.empty()) return out;
  size_t want = std::min<size_t>(replication_, node_count_);
  auto it = ring_.lower_bound(stable_hash(key));
  while (out.size() < want) {
    if (it == ring_.end()) it = ring_.begin();
    if (std::find(out.begin(), out.end(), it->second) == out.end()) {
      out.push_back(it->second);
    }
    ++it;
  }
  return out;
}

StorageNode::StorageNode(std::string id, net::Network* net,
                         sim::Time propagation_tick)
    : id_(std::move(id)), net_(net), propagation_tick_(propagation_tick) {}

bool StorageNode::owns(const Key& key) const {
  if (ring_ == nullptr) return true;
  auto replicas = ring_->partition_for(key);
  return std::find(replicas.begin(), replicas.end(), id_) != replicas.end();
}

bool StorageNode::primary_for(const Key& key) const {
  if (ring_ == nullptr) return true;
  auto replicas = ring_->partition_for(key);
  return !replicas.empty() && replicas.front() == id_;
}

bool StorageNode::merge_in(const Key& key, const lattice::Capsule& capsule) {
  auto it = shard_.find(key);
  if (it == shard_.end()) {
    shard_.emplace(key, capsule);
    dirty_.insert(key);
    return true;
  }
  lattice::Capsule before = it->second;
  // An equal-clock merge with diverging values means a writer broke the
  // unique-id contract; surface it in the trace.
  if (!capsule.is_lww() && !before.is_lww() &&
      capsule.causal().values != before.causal().values &&
      lattice::compare(before.causal().vc, capsule.causal().vc) ==
          lattice::VcOrder::kEqual) {
    net_->log().message(id_, id_, "equal_vc_merge");
  }
  it->second.merge(capsule);
  if (it->second == before) return false;
  dirty_.insert(key);
  return true;
}

void StorageNode::handle_put(const Key& key, const lattice::Capsule& capsule,
                             std::function<void(lattice::Version)> ack) {
  ++stats_.puts;
  merge_in(key, capsule);
  if (ack) ack(shard_.at(key).version());
}

void StorageNode::handle_replicate(const Key& key,
                                   const lattice::Capsule& capsule) {
  merge_in(key, capsule);
}

void StorageNode::handle_get(
    const Key& key,
    std::function<void(std::optional<lattice::Capsule>)> reply) {
  ++stats_.gets;
  auto it = shard_.find(key);
  if (it == shard_.end()) {
    reply(std::nullopt);
  } else {
    reply(it->second);
  }
}

void StorageNode::handle_delete(const Key& key, std::function<void()> ack) {
  shard_.erase(key);
  index_.erase(key);
  dirty_.erase(key);
  for (auto& [cache, keys] : cache_keys_) keys.erase(key);
  if (ack) ack();
}

void StorageNode::handle_keyset(const KeysetSnapshot& snapshot) {
  auto it = cache_epochs_.find(snapshot.cache_address);
  if (it != cache_epochs_.end() && snapshot.epoch <= it->second) return;
  cache_epochs_[snapshot.cache_address] = snapshot.epoch;

  std::set<Key> owned;
  for (const Key& key : snapshot.keys) {
    if (owns(key)) owned.insert(key);
  }
  // Reconcile: drop index entries for keys absent from the new snapshot.
  auto& previous = cache_keys_[snapshot.cache_address];
  for (const Key& key : previous) {
    if (!owned.contains(key)) {
      auto idx = index_.find(key);
      if (idx != index_.end()) {
        idx->second.erase(snapshot.cache_address);
        if (idx->second.empty()) index_.erase(idx);
      }
    }
  }
  for (const Key& key : owned) {
    index_[key].insert(snapshot.cache_address);
  }
  previous = std::move(owned);
}

void StorageNode::propagation_pass() {
  for (const Key& key : dirty_) {
    // Only the primary pushes updates so caches see one message per merge.
    if (!primary_for(key)) continue;
    auto idx = index_.find(key);
    if (idx == index_.end()) continue;
    auto shard_it = shard_.find(key);
    if (shard_it == shard_.end()) continue;
    for (const std::string& cache : idx->second) {
      ++stats_.updates_pushed;
      lattice::Capsule capsule = shard_it->second;
      net_->send(id_, cache, "key_update",
                 [this, cache, key, capsule]() {
                   if (update_sink_) update_sink_(cache, key, capsule);
                 });
    }
  }
  dirty_.clear();
}

void StorageNode::schedule_tick() {
  net_->kernel().after(propagation_tick_, [this]() {
    if (!running_) return;
    propagation_pass();
    schedule_tick();
  });
}

bool Client::put(const Key& key, const lattice::Capsule& capsule,
                 std::function<void(lattice::Version)> ack) {
  if (ring_ == nullptr || ring_->empty()) return false;
  auto replicas = ring_->partition_for(key);
  std::string primary = replicas.front();
  std::vector<std::string> siblings(replicas.begin() + 1, replicas.end());
  net_->send(self_, primary, "kvs_put",
             [this, primary, key, capsule, siblings, ack]() {
               node(primary)->handle_put(
                   key, capsule, [this, primary, ack](lattice::Version v) {
                     net_->send(primary, self_, "kvs_put_ack",
                                [ack, v]() { if (ack) ack(v); });
                   });
               for (const std::string& sibling : siblings) {
                 net_->send(primary, sibling, "kvs_replicate",
                            [this, sibling, key, capsule]() {
                              node(sibling)->handle_replicate(key, capsule);
                            });
               }
             });
  return true;
}

bool Client::get(const Key& key,
                 std::function<void(std::optional<lattice::Capsule>)> reply) {
  if (ring_ == nullptr || ring_->empty()) return false;
  auto replicas = ring_->partition_for(key);
  const std::string target =
      replicas[net_->kernel().rng().index(replicas.size())];
  net_->send(self_, target, "kvs_get", [this, target, key, reply]() {
    node(target)->handle_get(
        key, [this, target, reply](std::optional<lattice::Capsule> capsule) {
          net_->send(target, self_, "kvs_get_resp",
                     [reply, capsule]() { reply(capsule); });
        });
  });
  return true;
}

bool Client::del(const Key& key, std::function<void()> ack) {
  if (ring_ == nullptr || ring_->empty()) return false;
  auto replicas = ring_->partition_for(key);
  auto pending = std::make_shared<size_t>(replicas.size());
  for (const std::string& target : replicas) {
    net_->send(self_, target, "kvs_delete",
               [this, target, key, pending, ack]() {
                 node(target)->handle_delete(key, [this, target, pending,
                                                   ack]() {
                   net_->send(target, self_, "kvs_delete_ack",
                              [pending, ack]() {
                                if (--*pending == 0 && ack) ack();
                              });
                 });
               });
  }
  return true;
}

void Client::keyset(const KeysetSnapshot& snapshot) {
  if (nodes_ == nullptr) return;
  for (auto& [id, n] : *nodes_) {
    std::string target = id;
    net_->send(self_, target, "keyset_snapshot", [this, target, snapshot]() {
      node(target)->handle_keyset(snapshot);
    });
  }
}

}  // namespace faasim::kvs
