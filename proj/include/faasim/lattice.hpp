#ifndef FAASIM_LATTICE_HPP_
#define FAASIM_LATTICE_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>

#include "json.hpp"

// Lattice data types for coordination-free conflict resolution. All
// operations here are pure functions on value types; no shared state.

namespace faasim::lattice {

using Bytes = std::string;
using Json = nlohmann::ordered_json;

enum class Mode { kLww, kDsrr, kSk, kMk, kDsc };

constexpr bool is_causal(Mode m) {
  return m == Mode::kSk || m == Mode::kMk || m == Mode::kDsc;
}

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

// Totally ordered write stamp: compare by (clock, node_id). Distinct
// writers never produce an equal pair as long as node ids are unique.
struct LwwTimestamp {
  uint64_t clock = 0;
  std::string node_id;

  friend auto operator<=>(const LwwTimestamp&, const LwwTimestamp&) = default;
};

struct LwwCapsule {
  LwwTimestamp ts;
  Bytes value;

  bool operator==(const LwwCapsule&) const = default;
};

LwwCapsule merge(const LwwCapsule& a, const LwwCapsule& b);

enum class VcOrder { kDominates, kDominatedBy, kEqual, kConcurrent };

// Map of writer id -> logical clock. Zero entries are dropped so that
// equality and comparison treat absent and zero the same.
class VectorClock {
 public:
  VectorClock() = default;
  explicit VectorClock(std::map<std::string, uint64_t> entries);

  uint64_t at(const std::string& id) const;
  void set(const std::string& id, uint64_t clock);
  // Entrywise max.
  void merge_max(const VectorClock& other);
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, uint64_t>& entries() const { return entries_; }

  bool operator==(const VectorClock&) const = default;
  bool operator<(const VectorClock& o) const { return entries_ < o.entries_; }

 private:
  std::map<std::string, uint64_t> entries_;
};

VcOrder compare(const VectorClock& a, const VectorClock& b);

// True when `version` may be served against a required clock: it must not
// be strictly dominated. With `strict`, concurrent versions are rejected.
bool valid_against(const VectorClock& version, const VectorClock& required,
                   bool strict = false);

// key -> version clock. Union-merge takes the entrywise-max clock on keys
// present in both sets.
struct DependencySet {
  std::map<std::string, VectorClock> entries;

  void merge(const DependencySet& other);
  bool empty() const { return entries.empty(); }
  bool operator==(const DependencySet&) const = default;
};

struct CausalCapsule {
  VectorClock vc;
  DependencySet deps;
  std::set<Bytes> values;  // concurrent siblings, never empty

  bool operator==(const CausalCapsule&) const = default;
};

CausalCapsule merge(const CausalCapsule& a, const CausalCapsule& b);

// Deterministic tie-break across concurrent siblings: the
// lexicographically smallest byte sequence.
const Bytes& reveal(const CausalCapsule& c);

// Version metadata as recorded in read sets and traces.
struct Version {
  std::variant<LwwTimestamp, VectorClock> v;

  bool is_lww() const { return std::holds_alternative<LwwTimestamp>(v); }
  const LwwTimestamp& ts() const { return std::get<LwwTimestamp>(v); }
  const VectorClock& vc() const { return std::get<VectorClock>(v); }

  bool operator==(const Version&) const = default;

  Json to_json() const;
  static Version from_json(const Json& j);
};

class Capsule {
 public:
  Capsule() : body_(LwwCapsule{}) {}
  explicit Capsule(LwwCapsule c) : body_(std::move(c)) {}
  explicit Capsule(CausalCapsule c) : body_(std::move(c)) {}

  bool is_lww() const { return std::holds_alternative<LwwCapsule>(body_); }
  const LwwCapsule& lww() const { return std::get<LwwCapsule>(body_); }
  const CausalCapsule& causal() const { return std::get<CausalCapsule>(body_); }

  // Lattice merge; both sides must hold the same capsule kind.
  void merge(const Capsule& other);

  const Bytes& revealed() const;
  Version version() const;

  bool operator==(const Capsule&) const = default;

  // Stable self-describing form: mode tag, entries sorted by id, deps
  // sorted by key, values sorted. Byte-stable across runs.
  Json to_json() const;
  static Capsule from_json(const Json& j);

 private:
  std::variant<LwwCapsule, CausalCapsule> body_;
};

// Wraps an opaque value in the lattice for the given mode. LWW and DSRR
// use a timestamped capsule; causal modes stamp the writer's clock and
// snapshot the session dependency set.
Capsule encapsulate(const Bytes& value, Mode mode, const std::string& writer,
                    uint64_t clock, const DependencySet& session_deps);

Json vc_to_json(const VectorClock& vc);
VectorClock vc_from_json(const Json& j);
Json deps_to_json(const DependencySet& d);
DependencySet deps_from_json(const Json& j);

}  // namespace faasim::lattice

#endif  // FAASIM_LATTICE_HPP_
