#include "faasim/checker.hpp"

#include <algorithm>

namespace faasim::check {

using lattice::Json;
using lattice::VcOrder;
using lattice::Version;

namespace {

void join(Clock& into, const Clock& from) {
  for (const auto& [comp, count] : from) {
    auto it = into.find(comp);
    if (it == into.end() || it->second < count) into[comp] = count;
  }
}

bool version_covers(const Version& big, const Version& small) {
  if (big.is_lww() != small.is_lww()) return false;
  if (big.is_lww()) return big.ts() == small.ts();
  VcOrder order = lattice::compare(small.vc(), big.vc());
  return order == VcOrder::kEqual || order == VcOrder::kDominatedBy;
}

}  // namespace

uint32_t HbIndex::intern(const std::string& comp) {
  auto it = comp_ids_.find(comp);
  if (it != comp_ids_.end()) return it->second;
  uint32_t id = static_cast<uint32_t>(comp_ids_.size());
  comp_ids_.emplace(comp, id);
  return id;
}

std::vector<std::string> HbIndex::parents_of(const std::string& execution,
                                             const std::string& fn) const {
  std::vector<std::string> out;
  auto it = dags_.find(execution);
  if (it == dags_.end()) return out;
  for (const auto& [from, to] : it->second.edges) {
    if (to == fn) out.push_back(from);
  }
  return out;
}

HbIndex::Ctx& HbIndex::ensure_ctx(const std::string& execution,
                                  const std::string& fn, size_t at_idx) {
  std::string key = execution + "/" + fn;
  auto it = ctxs_.find(key);
  if (it != ctxs_.end() && it->second.realized) return it->second;
  Ctx& ctx = ctxs_[key];
  if (ctx.realized) return ctx;
  ctx.realized = true;
  ctx.comp = intern(key.empty() ? "op" : key);
  if (!execution.empty()) {
    if (!dags_.contains(execution)) {
      throw MalformedTrace("event for execution without schedule: " +
                           execution + " at " + std::to_string(at_idx));
    }
    // A child's scope starts from everything its ancestors read; parents
    // always finish before the child's first event.
    for (const std::string& parent : parents_of(execution, fn)) {
      Ctx& p = ensure_ctx(execution, parent, at_idx);
      join(ctx.read_clock, p.read_clock);
      for (const auto& [cache, clock] : p.cache_read) {
        join(ctx.cache_read[cache], clock);
      }
    }
  }
  return ctx;
}

void HbIndex::add(const trace::Event& ev) {
  size_t idx = next_idx_++;
  switch (ev.kind) {
    case trace::Kind::kSchedule: {
      DagInfo info;
      info.edges = ev.dag_edges;
      info.assignments = ev.assignments;
      dags_[ev.execution] = std::move(info);
      return;
    }
    case trace::Kind::kWrite: {
      std::string ctx_key = ev.execution.empty()
                                ? "op:" + std::to_string(idx)
                                : ev.execution;
      Ctx& ctx = ev.execution.empty()
                     ? ensure_ctx("", ctx_key, idx)
                     : ensure_ctx(ev.execution, ev.fn, idx);
      WriteRec rec;
      rec.idx = idx;
      rec.key = ev.key;
      rec.version = ev.version;
      rec.comp = ctx.comp;
      rec.count = ++ctx.writes;
      rec.clock = ctx.read_clock;
      rec.clock[ctx.comp] = ctx.writes;
      writes_[ev.key].push_back(std::move(rec));
      return;
    }
    case trace::Kind::kRead: {
      std::string ctx_key = ev.execution.empty()
                                ? "op:" + std::to_string(idx)
                                : ev.execution;
      Ctx& ctx = ev.execution.empty()
                     ? ensure_ctx("", ctx_key, idx)
                     : ensure_ctx(ev.execution, ev.fn, idx);
      ReadRec rec;
      rec.idx = idx;
      rec.key = ev.key;
      rec.execution = ev.execution;
      rec.fn = ev.fn;
      rec.cache = ev.cache;
      rec.version = ev.version;
      rec.covered = covered(ev.key, ev.version);
      rec.base = rec.covered.empty();
      scope_pre_.push_back(ctx.read_clock);
      auto cache_it = ctx.cache_read.find(ev.cache);
      cache_scope_pre_.push_back(cache_it == ctx.cache_read.end()
                                     ? Clock{}
                                     : cache_it->second);
      const auto& key_writes = writes_[ev.key];
      for (size_t ci : rec.covered) {
        join(ctx.read_clock, key_writes[ci].clock);
        join(ctx.cache_read[ev.cache], key_writes[ci].clock);
      }
      reads_.push_back(std::move(rec));
      return;
    }
    default:
      return;
  }
}

const std::vector<WriteRec>& HbIndex::writes_of(const std::string& key) const {
  static const std::vector<WriteRec> empty;
  auto it = writes_.find(key);
  return it == writes_.end() ? empty : it->second;
}

std::vector<size_t> HbIndex::covered(const std::string& key,
                                     const Version& version) const {
  std::vector<size_t> out;
  const auto& list = writes_of(key);
  for (size_t i = 0; i < list.size(); ++i) {
    if (version_covers(version, list[i].version)) out.push_back(i);
  }
  return out;
}

bool HbIndex::hb(const WriteRec& a, const WriteRec& b) const {
  auto it = b.clock.find(a.comp);
  return it != b.clock.end() && it->second >= a.count;
}

const Clock& HbIndex::scope_before(size_t read_index) const {
  return scope_pre_.at(read_index);
}

const Clock& HbIndex::cache_scope_before(size_t read_index) const {
  return cache_scope_pre_.at(read_index);
}

bool HbIndex::superseded(const std::string& key, const Version& version,
                         const Clock& scope, std::string* witness) const {
  const auto& list = writes_of(key);
  std::vector<size_t> cov = covered(key, version);
  if (cov.empty()) return false;  // base versions are concurrent with all
  for (size_t m = 0; m < list.size(); ++m) {
    if (std::find(cov.begin(), cov.end(), m) != cov.end()) continue;
    const WriteRec& mid = list[m];
    auto it = scope.find(mid.comp);
    if (it == scope.end() || it->second < mid.count) continue;  // not in deps
    bool all_before = true;
    for (size_t ci : cov) {
      if (!hb(list[ci], mid)) {
        all_before = false;
        break;
      }
    }
    if (all_before) {
      if (witness != nullptr) {
        *witness = "write@" + std::to_string(mid.idx);
      }
      return true;
    }
  }
  return false;
}

bool HbIndex::cut_violation(
    const std::vector<std::pair<std::string, Version>>& contents,
    std::string* why) const {
  // Pair (a, b) violates the cut when some write of a's key supersedes a
  // and is in b's dependency closure.
  for (const auto& [key_a, ver_a] : contents) {
    std::vector<size_t> cov_a = covered(key_a, ver_a);
    if (cov_a.empty()) continue;
    const auto& list = writes_of(key_a);
    for (const auto& [key_b, ver_b] : contents) {
      if (key_a == key_b && ver_a == ver_b) continue;
      Clock b_closure;
      for (size_t ci : covered(key_b, ver_b)) {
        join(b_closure, writes_of(key_b)[ci].clock);
      }
      for (size_t m = 0; m < list.size(); ++m) {
        if (std::find(cov_a.begin(), cov_a.end(), m) != cov_a.end()) continue;
        const WriteRec& mid = list[m];
        auto it = b_closure.find(mid.comp);
        if (it == b_closure.end() || it->second < mid.count) continue;
        bool all_before = true;
        for (size_t ci : cov_a) {
          if (!hb(list[ci], mid)) {
            all_before = false;
            break;
          }
        }
        if (all_before) {
          if (why != nullptr) {
            *why = key_a + " superseded by write@" +
                   std::to_string(mid.idx) + " required by " + key_b;
          }
          return true;
        }
      }
    }
  }
  return false;
}

namespace {

struct DsrrState {
  std::map<std::string, Version> first_read;
  std::map<std::string, Version> last_write;
};

bool dag_is_linear(const std::vector<std::pair<std::string, std::string>>& edges,
                   const std::map<std::string, std::string>& assignments) {
  std::map<std::string, int> in, out;
  for (const auto& [fn, slot] : assignments) {
    in[fn] = 0;
    out[fn] = 0;
  }
  for (const auto& [from, to] : edges) {
    ++out[from];
    ++in[to];
    if (out[from] > 1 || in[to] > 1) return false;
  }
  return true;
}

std::vector<std::string> linear_order(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::map<std::string, std::string>& assignments) {
  std::map<std::string, std::string> next;
  std::set<std::string> has_parent;
  for (const auto& [from, to] : edges) {
    next[from] = to;
    has_parent.insert(to);
  }
  std::string head;
  for (const auto& [fn, slot] : assignments) {
    if (!has_parent.contains(fn)) head = fn;
  }
  std::vector<std::string> order;
  while (!head.empty()) {
    order.push_back(head);
    auto it = next.find(head);
    head = it == next.end() ? "" : it->second;
  }
  return order;
}

}  // namespace

Json AnomalyReport::to_json() const {
  Json j;
  Json counts;
  counts["sk"] = sk;
  counts["mk"] = mk;
  counts["dsc"] = dsc;
  counts["dsrr"] = dsrr;
  j["counts"] = counts;
  j["mk_additional"] = mk_additional;
  j["dsc_additional"] = dsc_additional;
  j["evidence"] = evidence;
  return j;
}

AnomalyReport check_anomalies(const std::vector<trace::Event>& events,
                              const std::set<std::string>& levels) {
  auto enabled = [&levels](const std::string& level) {
    return levels.empty() || levels.contains(level);
  };

  HbIndex index;
  std::set<size_t> flag_sk;
  std::set<size_t> flag_mk;
  std::set<size_t> flag_dsc;
  AnomalyReport report;
  auto add_evidence = [&report](const std::string& level, size_t idx,
                                const std::string& key,
                                const std::string& witness) {
    if (report.evidence.size() >= 50) return;
    Json e;
    e["level"] = level;
    e["read"] = idx;
    e["key"] = key;
    e["witness"] = witness;
    report.evidence.push_back(e);
  };

  size_t read_counter = 0;
  for (const trace::Event& ev : events) {
    if (ev.kind == trace::Kind::kRead) {
      // Evaluate against the pre-read scope, then fold the read in.
      index.add(ev);
      size_t r = read_counter++;
      const ReadRec& rec = index.reads()[r];

      if (enabled("sk") && rec.version.is_lww() && !rec.base) {
        const auto& list = index.writes_of(rec.key);
        const WriteRec& seen = list[rec.covered.front()];
        for (const WriteRec& other : list) {
          if (other.idx >= rec.idx) break;
          if (other.version == rec.version) continue;
          if (!other.version.is_lww()) continue;
          if (other.version.ts() < rec.version.ts() &&
              !index.hb(other, seen) && !index.hb(seen, other)) {
            // A concurrent sibling lost the last-writer-wins merge.
            flag_sk.insert(rec.idx);
            add_evidence("sk", rec.idx, rec.key,
                         "write@" + std::to_string(other.idx));
            break;
          }
        }
      }

      if (!rec.execution.empty()) {
        std::string witness;
        if (enabled("dsc") &&
            index.superseded(rec.key, rec.version, index.scope_before(r),
                             &witness)) {
          flag_dsc.insert(rec.idx);
          add_evidence("dsc", rec.idx, rec.key, witness);
        }
        if (enabled("mk") &&
            index.superseded(rec.key, rec.version,
                             index.cache_scope_before(r), &witness)) {
          flag_mk.insert(rec.idx);
          add_evidence("mk", rec.idx, rec.key, witness);
        }
      }
    } else {
      index.add(ev);
    }
  }

  // Repeatable read: linear sessions only, walked in stage order.
  uint64_t dsrr = 0;
  if (enabled("dsrr")) {
    std::map<std::string, std::vector<const trace::Event*>> by_exec;
    std::map<std::string, const trace::Event*> schedules;
    for (const trace::Event& ev : events) {
      if (ev.kind == trace::Kind::kSchedule) schedules[ev.execution] = &ev;
      if ((ev.kind == trace::Kind::kRead || ev.kind == trace::Kind::kWrite) &&
          !ev.execution.empty()) {
        by_exec[ev.execution].push_back(&ev);
      }
    }
    for (const auto& [execution, evs] : by_exec) {
      auto sched = schedules.find(execution);
      if (sched == schedules.end()) {
        throw MalformedTrace("execution without schedule: " + execution);
      }
      if (!dag_is_linear(sched->second->dag_edges,
                         sched->second->assignments)) {
        continue;
      }
      std::vector<std::string> order = linear_order(
          sched->second->dag_edges, sched->second->assignments);
      std::map<std::string, size_t> stage_of;
      for (size_t i = 0; i < order.size(); ++i) stage_of[order[i]] = i;
      std::vector<const trace::Event*> ordered = evs;
      std::stable_sort(ordered.begin(), ordered.end(),
                       [&stage_of](const trace::Event* a,
                                   const trace::Event* b) {
                         return stage_of[a->fn] < stage_of[b->fn];
                       });
      DsrrState state;
      for (const trace::Event* ev : ordered) {
        if (ev->kind == trace::Kind::kWrite) {
          state.last_write[ev->key] = ev->version;
          continue;
        }
        auto wit = state.last_write.find(ev->key);
        if (wit != state.last_write.end()) {
          if (!(ev->version == wit->second)) {
            ++dsrr;
            add_evidence("dsrr", ev->seq, ev->key, "intra-dag update missed");
          }
          continue;
        }
        auto fit = state.first_read.find(ev->key);
        if (fit == state.first_read.end()) {
          state.first_read[ev->key] = ev->version;
          continue;
        }
        if (!(ev->version == fit->second)) {
          ++dsrr;
          add_evidence("dsrr", ev->seq, ev->key, "first-read version lost");
        }
      }
    }
  }

  report.sk = flag_sk.size();
  std::set<size_t> mk_union = flag_sk;
  mk_union.insert(flag_mk.begin(), flag_mk.end());
  report.mk = mk_union.size();
  report.mk_additional = report.mk - report.sk;
  std::set<size_t> dsc_union = mk_union;
  dsc_union.insert(flag_dsc.begin(), flag_dsc.end());
  report.dsc = dsc_union.size();
  report.dsc_additional = report.dsc - report.mk;
  report.dsrr = dsrr;
  return report;
}

}  // namespace faasim::check
