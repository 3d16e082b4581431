#ifndef FAASIM_CHECKER_HPP_
#define FAASIM_CHECKER_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faasim/lattice.hpp"
#include "faasim/trace.hpp"

// Trace-level consistency checking. Happens-before is derived purely
// from the trace: program order within a session path, plus
// write-observed-by-read edges, transitively. The index assigns every
// session context an interned vector clock so all queries reduce to
// clock comparisons.

namespace faasim::check {

struct MalformedTrace : std::runtime_error {
  explicit MalformedTrace(const std::string& what)
      : std::runtime_error(what) {}
};

using Clock = std::map<uint32_t, uint64_t>;

struct WriteRec {
  size_t idx = 0;          // trace position
  std::string key;
  lattice::Version version;
  uint32_t comp = 0;       // writing context component
  uint64_t count = 0;      // per-context write counter
  Clock clock;             // context clock at the write, own entry included
};

struct ReadRec {
  size_t idx = 0;
  std::string key;
  std::string execution;
  std::string fn;
  std::string cache;
  lattice::Version version;
  std::vector<size_t> covered;  // indices into writes_of(key)
  bool base = false;            // no covering write in the trace
};

// Incremental happens-before index over a trace prefix.
class HbIndex {
 public:
  void add(const trace::Event& ev);

  const std::vector<WriteRec>& writes_of(const std::string& key) const;
  // Writes whose version is covered by (folded into) `version`.
  std::vector<size_t> covered(const std::string& key,
                              const lattice::Version& version) const;
  bool hb(const WriteRec& a, const WriteRec& b) const;  // a -> b

  // True when reading `version` for `key` would conflict with a
  // dependency already fixed by `scope` (a joined clock): some write of
  // `key` is in the scope's dependency closure and strictly supersedes
  // every write covered by `version`.
  bool superseded(const std::string& key, const lattice::Version& version,
                  const Clock& scope, std::string* witness) const;

  // Cut check over explicit cache contents.
  bool cut_violation(
      const std::vector<std::pair<std::string, lattice::Version>>& contents,
      std::string* why) const;

  const std::vector<ReadRec>& reads() const { return reads_; }
  // Dependency scope of a read: everything read earlier by the same
  // function or its DAG ancestors (optionally restricted to one cache).
  const Clock& scope_before(size_t read_index) const;
  const Clock& cache_scope_before(size_t read_index) const;

 private:
  struct Ctx {
    uint32_t comp = 0;
    uint64_t writes = 0;
    Clock read_clock;                         // joined covered-write clocks
    std::map<std::string, Clock> cache_read;  // per serving cache
    bool realized = false;
  };

  struct DagInfo {
    std::vector<std::pair<std::string, std::string>> edges;
    std::map<std::string, std::string> assignments;
  };

  uint32_t intern(const std::string& comp);
  Ctx& ensure_ctx(const std::string& execution, const std::string& fn,
                  size_t at_idx);
  std::vector<std::string> parents_of(const std::string& execution,
                                      const std::string& fn) const;

  std::map<std::string, uint32_t> comp_ids_;
  std::map<std::string, DagInfo> dags_;  // by execution
  std::map<std::string, Ctx> ctxs_;      // by execution + "/" + fn
  std::map<std::string, std::vector<WriteRec>> writes_;
  std::vector<ReadRec> reads_;
  std::vector<Clock> scope_pre_;        // per read, session scope
  std::vector<Clock> cache_scope_pre_;  // per read, same-cache scope
  size_t next_idx_ = 0;
};

struct AnomalyReport {
  // Cumulative counts: mk includes sk, dsc includes mk.
  uint64_t sk = 0;
  uint64_t mk = 0;
  uint64_t dsc = 0;
  uint64_t dsrr = 0;
  uint64_t mk_additional = 0;
  uint64_t dsc_additional = 0;
  std::vector<lattice::Json> evidence;  // capped

  lattice::Json to_json() const;
};

// levels: subset of {"sk","mk","dsc","dsrr"}; empty means all.
AnomalyReport check_anomalies(const std::vector<trace::Event>& events,
                              const std::set<std::string>& levels = {});

}  // namespace faasim::check

#endif  // FAASIM_CHECKER_HPP_
