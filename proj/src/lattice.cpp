#include "faasim/lattice.hpp"

#include <stdexcept>

namespace faasim::lattice {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kLww: return "lww";
    case Mode::kDsrr: return "dsrr";
    case Mode::kSk: return "sk";
    case Mode::kMk: return "mk";
    case Mode::kDsc: return "dsc";
  }
  return "lww";
}

Mode mode_from_name(const std::string& name) {
  if (name == "lww") return Mode::kLww;
  if (name == "dsrr") return Mode::kDsrr;
  if (name == "sk") return Mode::kSk;
  if (name == "mk") return Mode::kMk;
  if (name == "dsc") return Mode::kDsc;
  throw std::invalid_argument("unknown consistency mode: " + name);
}

LwwCapsule merge(const LwwCapsule& a, const LwwCapsule& b) {
  return b.ts > a.ts ? b : a;
}

VectorClock::VectorClock(std::map<std::string, uint64_t> entries) {
  for (auto& [id, clock] : entries) {
    if (clock != 0) entries_.emplace(id, clock);
  }
}

uint64_t VectorClock::at(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? 0 : it->second;
}

void VectorClock::set(const std::string& id, uint64_t clock) {
  if (clock == 0) {
    entries_.erase(id);
  } else {
    entries_[id] = clock;
  }
}

void VectorClock::merge_max(const VectorClock& other) {
  for (const auto& [id, clock] : other.entries_) {
    auto it = entries_.find(id);
    if (it == entries_.end() || it->second < clock) entries_[id] = clock;
  }
}

VcOrder compare(const VectorClock& a, const VectorClock& b) {
  bool a_greater = false;
  bool b_greater = false;
  for (const auto& [id, clock] : a.entries()) {
    uint64_t other = b.at(id);
    if (clock > other) a_greater = true;
    if (clock < other) b_greater = true;
  }
  for (const auto& [id, clock] : b.entries()) {
    if (a.at(id) < clock) b_greater = true;
  }
  if (a_greater && b_greater) return VcOrder::kConcurrent;
  if (a_greater) return VcOrder::kDominates;
  if (b_greater) return VcOrder::kDominatedBy;
  return VcOrder::kEqual;
}

bool valid_against(const VectorClock& version, const VectorClock& required,
                   bool strict) {
  VcOrder order = compare(version, required);
  if (strict) return order == VcOrder::kDominates || order == VcOrder::kEqual;
  return order != VcOrder::kDominatedBy;
}

void DependencySet::merge(const DependencySet& other) {
  for (const auto& [key, vc] : other.entries) {
    entries[key].merge_max(vc);
  }
}

CausalCapsule merge(const CausalCapsule& a, const CausalCapsule& b) {
  switch (compare(a.vc, b.vc)) {
    case VcOrder::kDominates:
      return a;
    case VcOrder::kDominatedBy:
      return b;
    case VcOrder::kEqual: {
      // Well-formed writers never produce equal clocks with different
      // values; union keeps the merge total anyway.
      CausalCapsule out = a;
      out.deps.merge(b.deps);
      out.values.insert(b.values.begin(), b.values.end());
      return out;
    }
    case VcOrder::kConcurrent: {
      CausalCapsule out;
      out.vc = a.vc;
      out.vc.merge_max(b.vc);
      out.deps = a.deps;
      out.deps.merge(b.deps);
      out.values = a.values;
      out.values.insert(b.values.begin(), b.values.end());
      return out;
    }
  }
  return a;
}

const Bytes& reveal(const CausalCapsule& c) {
  if (c.values.empty()) throw std::logic_error("reveal of empty capsule");
  return *c.values.begin();
}

void Capsule::merge(const Capsule& other) {
  if (is_lww() != other.is_lww()) {
    throw std::invalid_argument("capsule mode mismatch in merge");
  }
  if (is_lww()) {
    body_ = lattice::merge(lww(), other.lww());
  } else {
    body_ = lattice::merge(causal(), other.causal());
  }
}

const Bytes& Capsule::revealed() const {
  if (is_lww()) return lww().value;
  return reveal(causal());
}

Version Capsule::version() const {
  if (is_lww()) return Version{lww().ts};
  return Version{causal().vc};
}

Json vc_to_json(const VectorClock& vc) {
  Json arr = Json::array();
  for (const auto& [id, clock] : vc.entries()) {
    arr.push_back(Json::array({id, clock}));
  }
  return arr;
}

VectorClock vc_from_json(const Json& j) {
  VectorClock vc;
  for (const auto& pair : j) {
    vc.set(pair.at(0).get<std::string>(), pair.at(1).get<uint64_t>());
  }
  return vc;
}

Json deps_to_json(const DependencySet& d) {
  Json arr = Json::array();
  for (const auto& [key, vc] : d.entries) {
    arr.push_back(Json::array({key, vc_to_json(vc)}));
  }
  return arr;
}

DependencySet deps_from_json(const Json& j) {
  DependencySet d;
  for (const auto& pair : j) {
    d.entries[pair.at(0).get<std::string>()] = vc_from_json(pair.at(1));
  }
  return d;
}

Json Version::to_json() const {
  Json j;
  if (is_lww()) {
    j["ts"] = Json::array({ts().clock, ts().node_id});
  } else {
    j["vc"] = vc_to_json(vc());
  }
  return j;
}

Version Version::from_json(const Json& j) {
  if (j.contains("ts")) {
    return Version{LwwTimestamp{j["ts"].at(0).get<uint64_t>(),
                                j["ts"].at(1).get<std::string>()}};
  }
  return Version{vc_from_json(j.at("vc"))};
}

Json Capsule::to_json() const {
  Json j;
  if (is_lww()) {
    j["mode"] = "lww";
    j["ts"] = Json::array({lww().ts.clock, lww().ts.node_id});
    j["value"] = lww().value;
  } else {
    j["mode"] = "causal";
    j["vc"] = vc_to_json(causal().vc);
    j["deps"] = deps_to_json(causal().deps);
    j["values"] = Json::array();
    for (const auto& v : causal().values) j["values"].push_back(v);
  }
  return j;
}

Capsule Capsule::from_json(const Json& j) {
  if (j.at("mode") == "lww") {
    LwwCapsule c;
    c.ts.clock = j["ts"].at(0).get<uint64_t>();
    c.ts.node_id = j["ts"].at(1).get<std::string>();
    c.value = j["value"].get<std::string>();
    return Capsule{c};
  }
  CausalCapsule c;
  c.vc = vc_from_json(j.at("vc"));
  c.deps = deps_from_json(j.at("deps"));
  for (const auto& v : j.at("values")) c.values.insert(v.get<std::string>());
  return Capsule{c};
}

Capsule encapsulate(const Bytes& value, Mode mode, const std::string& writer,
                    uint64_t clock, const DependencySet& session_deps) {
  if (!is_causal(mode)) {
    return Capsule{LwwCapsule{{clock, writer}, value}};
  }
  CausalCapsule c;
  c.vc.set(writer, clock);
  c.deps = session_deps;
  c.values.insert(value);
  return Capsule{c};
}

}  // namespace faasim::lattice
