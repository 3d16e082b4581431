#include "faasim/cache.hpp"

#include <algorithm>
#include <memory>

namespace faasim::cache {

using lattice::VcOrder;

void SessionDeps::merge(const SessionDeps& other) {
  for (const auto& [key, vc] : other.vcs.entries) {
    auto it = vcs.entries.find(key);
    if (it == vcs.entries.end()) {
      vcs.entries[key] = vc;
      auto h = other.holders.find(key);
      if (h != other.holders.end()) holders[key] = h->second;
      continue;
    }
    VcOrder order = lattice::compare(vc, it->second);
    it->second.merge_max(vc);
    // Keep the first holder unless the other side strictly dominates; a
    // stale hint is re-validated at fetch time anyway.
    if (order == VcOrder::kDominates) {
      auto h = other.holders.find(key);
      if (h != other.holders.end()) holders[key] = h->second;
    }
  }
}

Cache::Cache(std::string node_id, lattice::Mode mode, CacheConfig cfg,
             net::Network* net, kvs::Client kvs_client,
             std::map<std::string, Cache*>* peers)
    : node_id_(std::move(node_id)),
      addr_(node_id_ + ":c"),
      mode_(mode),
      cfg_(cfg),
      net_(net),
      kvs_(std::move(kvs_client)),
      peers_(peers) {}

Cache::Entry* Cache::live(const std::string& key) {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void Cache::touch(const std::string& key) {
  auto pos = lru_pos_.find(key);
  if (pos != lru_pos_.end()) lru_.erase(pos->second);
  lru_.push_back(key);
  lru_pos_[key] = std::prev(lru_.end());
}

void Cache::evict_if_over_capacity() {
  if (cfg_.capacity == 0) return;
  while (entries_.size() > cfg_.capacity && !lru_.empty()) {
    std::string victim = lru_.front();
    lru_.pop_front();
    lru_pos_.erase(victim);
    entries_.erase(victim);
    ++stats_.evictions;
  }
}

void Cache::install(const std::string& key, const Capsule& capsule) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[key] = Entry{capsule, net_->kernel().now()};
  } else {
    it->second.capsule.merge(capsule);
    it->second.last_refresh = net_->kernel().now();
  }
  touch(key);
  evict_if_over_capacity();
}

void Cache::notify_waiters(const std::string& key) {
  auto it = install_waiters_.find(key);
  if (it == install_waiters_.end()) return;
  std::vector<std::function<void()>> waiters = std::move(it->second);
  install_waiters_.erase(it);
  for (auto& fn : waiters) fn();
}

void Cache::enforce_cut_for_deps(const DependencySet& deps) {
  if (!cut_maintained()) return;
  for (const auto& [dep_key, dep_vc] : deps.entries) {
    dep_floor_[dep_key].merge_max(dep_vc);
    Entry* entry = live(dep_key);
    if (entry != nullptr && !entry->capsule.is_lww() &&
        lattice::compare(entry->capsule.causal().vc, dep_vc) ==
            VcOrder::kDominatedBy) {
      // A locally cached version older than a now-required dependency
      // would break the cut; drop it and heal from the KVS.
      entries_.erase(dep_key);
      auto pos = lru_pos_.find(dep_key);
      if (pos != lru_pos_.end()) {
        lru_.erase(pos->second);
        lru_pos_.erase(pos);
      }
      ++stats_.evictions;
      request_fetch(dep_key);
    }
  }
}

void Cache::ingest(const std::string& key, const Capsule& capsule) {
  if (!cut_maintained()) {
    install(key, capsule);
    notify_waiters(key);
    process_pending();
    return;
  }
  Entry* entry = live(key);
  if (entry != nullptr) {
    Capsule merged = entry->capsule;
    merged.merge(capsule);
    if (merged == entry->capsule) {
      entry->last_refresh = net_->kernel().now();
      return;
    }
  }
  auto it = pending_.find(key);
  if (it == pending_.end()) {
    pending_[key] = PendingInstall{capsule, {}};
  } else {
    it->second.capsule.merge(capsule);
  }
  stats_.max_pending = std::max(stats_.max_pending, pending_.size());
  process_pending();
}

void Cache::request_fetch(const std::string& key) {
  if (fetch_outstanding_.contains(key)) return;
  fetch_outstanding_.insert(key);
  kvs_.get(key, [this, key](std::optional<Capsule> capsule) {
    fetch_outstanding_.erase(key);
    if (capsule) ingest(key, *capsule);
  });
}

void Cache::process_pending() {
  if (processing_) return;
  processing_ = true;

  std::vector<std::string> installed;
  bool progress = true;
  while (progress) {
    progress = false;
    // Candidate set: pending items whose floor and dependency checks pass
    // against live entries plus other candidates (handles mutual deps).
    std::set<std::string> candidates;
    for (const auto& [key, item] : pending_) candidates.insert(key);

    bool shrunk = true;
    while (shrunk) {
      shrunk = false;
      for (auto it = candidates.begin(); it != candidates.end();) {
        const std::string& key = *it;
        const PendingInstall& item = pending_.at(key);
        Capsule merged = item.capsule;
        if (Entry* entry = live(key)) {
          merged = entry->capsule;
          merged.merge(item.capsule);
        }
        bool ok = true;
        if (!merged.is_lww()) {
          auto floor = dep_floor_.find(key);
          if (floor != dep_floor_.end() &&
              !lattice::valid_against(merged.causal().vc, floor->second)) {
            ok = false;
          }
          if (ok) {
            for (const auto& [dep_key, dep_vc] :
                 item.capsule.causal().deps.entries) {
              Entry* dep = live(dep_key);
              bool satisfied =
                  dep != nullptr && !dep->capsule.is_lww() &&
                  lattice::valid_against(dep->capsule.causal().vc, dep_vc);
              if (!satisfied && candidates.contains(dep_key) &&
                  dep_key != key) {
                Capsule dep_merged = pending_.at(dep_key).capsule;
                if (Entry* dep_live = live(dep_key)) {
                  dep_merged = dep_live->capsule;
                  dep_merged.merge(pending_.at(dep_key).capsule);
                }
                satisfied = !dep_merged.is_lww() &&
                            lattice::valid_against(dep_merged.causal().vc,
                                                   dep_vc);
              }
              if (!satisfied) {
                ok = false;
                break;
              }
            }
          }
        }
        if (!ok) {
          it = candidates.erase(it);
          shrunk = true;
        } else {
          ++it;
        }
      }
    }

    for (const std::string& key : candidates) {
      const PendingInstall& item = pending_.at(key);
      if (!item.capsule.is_lww()) {
        for (const auto& [dep_key, dep_vc] :
             item.capsule.causal().deps.entries) {
          dep_floor_[dep_key].merge_max(dep_vc);
        }
      }
      install(key, item.capsule);
      installed.push_back(key);
      progress = true;
    }
    for (const std::string& key : candidates) pending_.erase(key);
  }

  // Kick fetches for whatever is still blocked.
  for (const auto& [key, item] : pending_) {
    if (!item.capsule.is_lww()) {
      auto floor = dep_floor_.find(key);
      Capsule merged = item.capsule;
      if (Entry* entry = live(key)) {
        merged = entry->capsule;
        merged.merge(item.capsule);
      }
      if (floor != dep_floor_.end() &&
          !lattice::valid_against(merged.causal().vc, floor->second)) {
        request_fetch(key);
      }
      for (const auto& [dep_key, dep_vc] : item.capsule.causal().deps.entries) {
        Entry* dep = live(dep_key);
        if (dep == nullptr ||
            (!dep->capsule.is_lww() &&
             !lattice::valid_against(dep->capsule.causal().vc, dep_vc))) {
          request_fetch(dep_key);
        }
      }
    }
  }

  processing_ = false;
  for (const std::string& key : installed) notify_waiters(key);
}

void Cache::retry_pending() {
  for (const auto& [key, item] : pending_) {
    request_fetch(key);
    if (!item.capsule.is_lww()) {
      for (const auto& [dep_key, dep_vc] : item.capsule.causal().deps.entries) {
        (void)dep_vc;
        request_fetch(dep_key);
      }
    }
  }
}

void Cache::freeze(const std::string& execution, const std::string& key,
                   const Capsule& capsule) {
  if (execution.empty()) return;
  if (mode_ != lattice::Mode::kDsrr && mode_ != lattice::Mode::kDsc) return;
  snapshots_[execution].insert_or_assign(key, capsule);
}

const Capsule* Cache::frozen(const std::string& execution,
                             const std::string& key) const {
  auto it = snapshots_.find(execution);
  if (it == snapshots_.end()) return nullptr;
  auto kit = it->second.find(key);
  return kit == it->second.end() ? nullptr : &kit->second;
}

std::map<std::string, std::string> Cache::freeze_deps(
    const std::string& execution, const DependencySet& deps) {
  std::map<std::string, std::string> holders;
  if (execution.empty() || mode_ != lattice::Mode::kDsc) return holders;
  for (const auto& [dep_key, dep_vc] : deps.entries) {
    const Capsule* snap = frozen(execution, dep_key);
    if (snap != nullptr && !snap->is_lww() &&
        lattice::valid_against(snap->causal().vc, dep_vc)) {
      holders[dep_key] = addr_;
      continue;
    }
    Entry* entry = live(dep_key);
    if (entry != nullptr && !entry->capsule.is_lww() &&
        lattice::valid_against(entry->capsule.causal().vc, dep_vc)) {
      freeze(execution, dep_key, entry->capsule);
      holders[dep_key] = addr_;
    } else {
      holders[dep_key] = "";
    }
  }
  return holders;
}

void Cache::serve_local(const std::string& execution, const std::string& key,
                        const Capsule& capsule, const std::string& serving,
                        ReadCallback cb) {
  ReadResult out;
  out.status = ReadStatus::kOk;
  out.value = capsule.revealed();
  out.version = capsule.version();
  out.serving_cache = serving;
  if (!capsule.is_lww()) {
    out.capsule_deps = capsule.causal().deps;
    out.dep_holders = freeze_deps(execution, capsule.causal().deps);
  }
  freeze(execution, key, capsule);
  cb(std::move(out));
}

void Cache::await_install(const std::string& key, sim::Time deadline,
                          std::function<void(bool)> done) {
  auto fired = std::make_shared<bool>(false);
  install_waiters_[key].push_back([fired, done]() {
    if (*fired) return;
    *fired = true;
    done(true);
  });
  net_->kernel().at(deadline, [fired, done]() {
    if (*fired) return;
    *fired = true;
    done(false);
  });
}

void Cache::fetch_and_serve(const std::string& execution,
                            const std::string& key, ReadCallback cb) {
  kvs_.get(key, [this, execution, key, cb](std::optional<Capsule> capsule) {
    if (!capsule) {
      cb(ReadResult{});  // kNotFound
      return;
    }
    ingest(key, *capsule);
    if (Entry* entry = live(key)) {
      serve_local(execution, key, entry->capsule, addr_, cb);
      return;
    }
    // Cut maintenance buffered the install; wait for it.
    sim::Time deadline = net_->kernel().now() + cfg_.miss_timeout;
    await_install(key, deadline, [this, execution, key, cb](bool ok) {
      Entry* entry = ok ? live(key) : nullptr;
      if (entry == nullptr) {
        ReadResult out;
        out.status = ReadStatus::kUnavailable;
        cb(std::move(out));
        return;
      }
      serve_local(execution, key, entry->capsule, addr_, cb);
    });
  });
}

void Cache::get(const std::string& key, ReadCallback cb) {
  if (Entry* entry = live(key)) {
    ++stats_.hits;
    touch(key);
    serve_local("", key, entry->capsule, addr_, cb);
    return;
  }
  ++stats_.misses;
  fetch_and_serve("", key, cb);
}

void Cache::rr_read(const std::string& execution, const std::string& key,
                    const ReadSet& read_set, ReadCallback cb) {
  auto rs = read_set.find(key);
  if (rs == read_set.end()) {
    // First read in the DAG: any available version, frozen locally.
    if (Entry* entry = live(key)) {
      ++stats_.hits;
      touch(key);
      serve_local(execution, key, entry->capsule, addr_, cb);
      return;
    }
    ++stats_.misses;
    fetch_and_serve(execution, key, cb);
    return;
  }

  const Version& want = rs->second.version;
  if (const Capsule* snap = frozen(execution, key)) {
    ++stats_.hits;
    serve_local(execution, key, *snap, addr_, cb);
    return;
  }
  if (Entry* entry = live(key)) {
    if (entry->capsule.is_lww() && Version{entry->capsule.lww().ts} == want) {
      ++stats_.hits;
      touch(key);
      serve_local(execution, key, entry->capsule, addr_, cb);
      return;
    }
  }
  // Local version is absent or has been overwritten; recover the exact
  // snapshot from the cache that recorded the first read.
  const std::string holder = rs->second.holder;
  if (holder == addr_) {
    ReadResult out;
    out.status = ReadStatus::kUnavailable;
    cb(std::move(out));
    return;
  }
  ++stats_.upstream_fetches;
  fetch_upstream(holder, execution, key, want,
                 [this, execution, key, holder, cb](
                     std::optional<Capsule> capsule,
                     std::map<std::string, std::string>) {
                   if (!capsule) {
                     ReadResult out;
                     out.status = ReadStatus::kUnavailable;
                     cb(std::move(out));
                     return;
                   }
                   freeze(execution, key, *capsule);
                   ReadResult out;
                   out.status = ReadStatus::kOk;
                   out.value = capsule->revealed();
                   out.version = capsule->version();
                   out.serving_cache = holder;
                   cb(std::move(out));
                 });
}

void Cache::causal_read(const std::string& execution, const std::string& key,
                        const ReadSet& read_set, const SessionDeps& deps,
                        ReadCallback cb) {
  // The required clock folds the read-set entry together with any
  // accumulated dependency constraint; reads always extend deps, so the
  // dependency entry is at least as strong as the read-set one.
  VectorClock required;
  std::vector<std::string> holders;
  bool constrained = false;
  auto rs = read_set.find(key);
  if (rs != read_set.end() && !rs->second.version.is_lww()) {
    required.merge_max(rs->second.version.vc());
    if (!rs->second.holder.empty()) holders.push_back(rs->second.holder);
    constrained = true;
  }
  auto dp = deps.vcs.entries.find(key);
  if (dp != deps.vcs.entries.end()) {
    required.merge_max(dp->second);
    auto h = deps.holders.find(key);
    if (h != deps.holders.end() && !h->second.empty() &&
        (holders.empty() || holders.front() != h->second)) {
      holders.push_back(h->second);
    }
    constrained = true;
  }

  if (!constrained) {
    if (Entry* entry = live(key)) {
      ++stats_.hits;
      touch(key);
      serve_local(execution, key, entry->capsule, addr_, cb);
      return;
    }
    ++stats_.misses;
    fetch_and_serve(execution, key, cb);
    return;
  }
  causal_read_constrained(execution, key, required, std::move(holders), cb);
}

void Cache::causal_read_constrained(const std::string& execution,
                                    const std::string& key,
                                    const VectorClock& required,
                                    std::vector<std::string> holders,
                                    ReadCallback cb) {
  if (const Capsule* snap = frozen(execution, key)) {
    if (!snap->is_lww() &&
        lattice::valid_against(snap->causal().vc, required,
                               cfg_.strict_valid)) {
      ++stats_.hits;
      serve_local(execution, key, *snap, addr_, cb);
      return;
    }
  }
  if (Entry* entry = live(key)) {
    if (!entry->capsule.is_lww() &&
        lattice::valid_against(entry->capsule.causal().vc, required,
                               cfg_.strict_valid)) {
      ++stats_.hits;
      touch(key);
      serve_local(execution, key, entry->capsule, addr_, cb);
      return;
    }
  }
  // Walk the holder hints; each response is re-validated because hints
  // can go stale when constraints grow past the frozen snapshot.
  if (!holders.empty()) {
    std::string holder = holders.front();
    holders.erase(holders.begin());
    if (holder == addr_) {
      causal_read_constrained(execution, key, required, std::move(holders),
                              cb);
      return;
    }
    ++stats_.upstream_fetches;
    fetch_upstream(
        holder, execution, key, Version{required},
        [this, execution, key, required, holders = std::move(holders), holder,
         cb](std::optional<Capsule> capsule,
             std::map<std::string, std::string> dep_holders) mutable {
          if (capsule && !capsule->is_lww() &&
              lattice::valid_against(capsule->causal().vc, required,
                                     cfg_.strict_valid)) {
            freeze(execution, key, *capsule);
            ReadResult out;
            out.status = ReadStatus::kOk;
            out.value = capsule->revealed();
            out.version = capsule->version();
            out.serving_cache = holder;
            out.capsule_deps = capsule->causal().deps;
            out.dep_holders = std::move(dep_holders);
            cb(std::move(out));
            return;
          }
          causal_read_constrained(execution, key, required, std::move(holders),
                                  cb);
        });
    return;
  }
  validity_fetch(execution, key, required,
                 net_->kernel().now() + cfg_.upstream_timeout, cb);
}

void Cache::validity_fetch(const std::string& execution,
                           const std::string& key, const VectorClock& required,
                           sim::Time deadline, ReadCallback cb) {
  kvs_.get(key, [this, execution, key, required, deadline,
                 cb](std::optional<Capsule> capsule) {
    if (capsule && !capsule->is_lww() &&
        lattice::valid_against(capsule->causal().vc, required,
                               cfg_.strict_valid)) {
      // Serve and freeze the fetched version; healing the live entry is
      // left to the install pipeline so the cut stays intact.
      ingest(key, *capsule);
      freeze(execution, key, *capsule);
      ReadResult out;
      out.status = ReadStatus::kOk;
      out.value = capsule->revealed();
      out.version = capsule->version();
      out.serving_cache = addr_;
      out.capsule_deps = capsule->causal().deps;
      out.dep_holders = freeze_deps(execution, capsule->causal().deps);
      cb(std::move(out));
      return;
    }
    if (net_->kernel().now() >= deadline) {
      ReadResult out;
      out.status = ReadStatus::kUnavailable;
      cb(std::move(out));
      return;
    }
    net_->kernel().after(cfg_.retry_interval,
                         [this, execution, key, required, deadline, cb]() {
                           validity_fetch(execution, key, required, deadline,
                                          cb);
                         });
  });
}

void Cache::put(const std::string& execution, const std::string& key,
                const Bytes& value, const std::string& writer,
                const SessionDeps& session_deps,
                std::function<void(Version)> ack) {
  Capsule capsule;
  if (!lattice::is_causal(mode_)) {
    uint64_t clock = lww_clock_ + 1;
    if (Entry* entry = live(key)) {
      clock = std::max(clock, entry->capsule.lww().ts.clock + 1);
    }
    lww_clock_ = clock;
    capsule = lattice::encapsulate(value, mode_, addr_, clock, {});
  } else {
    uint64_t clock = ++causal_clocks_[writer];
    capsule =
        lattice::encapsulate(value, mode_, writer, clock, session_deps.vcs);
  }
  Version written = capsule.version();

  install(key, capsule);
  if (!capsule.is_lww()) {
    enforce_cut_for_deps(capsule.causal().deps);
  }
  freeze(execution, key, entries_.at(key).capsule);
  notify_waiters(key);
  process_pending();

  // Ack locally, then hand the merged capsule to the KVS.
  if (ack) ack(written);
  kvs_.put(key, entries_.at(key).capsule, nullptr);
}

void Cache::gc(const std::string& execution) { snapshots_.erase(execution); }

void Cache::on_key_update(const std::string& key, const Capsule& capsule) {
  ingest(key, capsule);
}

void Cache::on_fetch_snapshot(
    const std::string& execution, const std::string& key,
    const std::optional<Version>& required,
    std::function<void(std::optional<Capsule>,
                       std::map<std::string, std::string>)>
        respond) {
  auto matches = [&](const Capsule& capsule) {
    if (!required) return true;
    if (required->is_lww()) {
      return capsule.is_lww() && capsule.lww().ts == required->ts();
    }
    return !capsule.is_lww() &&
           lattice::valid_against(capsule.causal().vc, required->vc(),
                                  cfg_.strict_valid);
  };

  if (const Capsule* snap = frozen(execution, key)) {
    if (matches(*snap)) {
      std::map<std::string, std::string> holders;
      if (!snap->is_lww()) holders = freeze_deps(execution, snap->causal().deps);
      respond(*snap, std::move(holders));
      return;
    }
  }
  if (Entry* entry = live(key)) {
    if (matches(entry->capsule)) {
      freeze(execution, key, entry->capsule);
      std::map<std::string, std::string> holders;
      if (!entry->capsule.is_lww()) {
        holders = freeze_deps(execution, entry->capsule.causal().deps);
      }
      respond(entry->capsule, std::move(holders));
      return;
    }
  }
  respond(std::nullopt, {});
}

void Cache::fetch_upstream(
    const std::string& holder, const std::string& execution,
    const std::string& key, const std::optional<Version>& required,
    std::function<void(std::optional<Capsule>,
                       std::map<std::string, std::string>)>
        done) {
  auto fired = std::make_shared<bool>(false);
  net_->kernel().after(cfg_.upstream_timeout, [fired, done]() {
    if (*fired) return;
    *fired = true;
    done(std::nullopt, {});
  });
  auto it = peers_->find(holder);
  if (it == peers_->end()) return;  // timeout resolves the request
  Cache* peer = it->second;
  net_->send(addr_, holder, "fetch_snapshot",
             [this, peer, execution, key, required, holder, fired, done]() {
               peer->on_fetch_snapshot(
                   execution, key, required,
                   [this, holder, fired, done](
                       std::optional<Capsule> capsule,
                       std::map<std::string, std::string> holders) {
                     net_->send(holder, addr_, "snapshot_resp",
                                [fired, done, capsule = std::move(capsule),
                                 holders = std::move(holders)]() mutable {
                                  if (*fired) return;
                                  *fired = true;
                                  done(std::move(capsule), std::move(holders));
                                });
                   });
             });
}

void Cache::publish_keyset() {
  ++epoch_;
  kvs::KeysetSnapshot snapshot;
  snapshot.cache_address = addr_;
  snapshot.epoch = epoch_;
  for (const auto& [key, entry] : entries_) snapshot.keys.insert(key);
  kvs_.keyset(snapshot);

  // Mirror the keyset into a metadata key so schedulers can build their
  // locality index from the KVS alone.
  lattice::Json keys = lattice::Json::array();
  for (const auto& key : snapshot.keys) keys.push_back(key);
  Capsule meta = lattice::encapsulate(keys.dump(), lattice::Mode::kLww, addr_,
                                      epoch_, {});
  kvs_.put("_meta/cachekeys/" + addr_, meta, nullptr);
}

std::map<std::string, Capsule> Cache::contents() const {
  std::map<std::string, Capsule> out;
  for (const auto& [key, entry] : entries_) out.emplace(key, entry.capsule);
  return out;
}

size_t Cache::snapshot_count(const std::string& execution) const {
  auto it = snapshots_.find(execution);
  return it == snapshots_.end() ? 0 : it->second.size();
}

size_t Cache::total_snapshots() const {
  size_t n = 0;
  for (const auto& [exec, snaps] : snapshots_) n += snaps.size();
  return n;
}

void Cache::schedule_keyset_tick() {
  net_->kernel().after(cfg_.keyset_period, [this]() {
    if (!running_) return;
    publish_keyset();
    schedule_keyset_tick();
  });
}

void Cache::schedule_retry_tick() {
  net_->kernel().after(cfg_.retry_interval, [this]() {
    if (!running_) return;
    retry_pending();
    if (!pending_.empty()) process_pending();
    schedule_retry_tick();
  });
}

void Cache::start() {
  schedule_keyset_tick();
  if (cut_maintained()) schedule_retry_tick();
}

}  // namespace faasim::cache
