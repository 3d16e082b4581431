#ifndef FAASIM_TESTS_ORACLE_HB_ORACLE_HPP_
#define FAASIM_TESTS_ORACLE_HB_ORACLE_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "faasim/lattice.hpp"
#include "faasim/trace.hpp"

// Brute-force happens-before oracle. Builds the explicit event graph
// (program order within a function, DAG ancestor order, write-observed-by
// -read edges) and answers every query by reachability, independently of
// the production checker's clock machinery. Quadratic; keep traces small.

namespace oracle {

namespace trace = faasim::trace;
namespace lattice = faasim::lattice;

struct AnomalySets {
  std::set<size_t> sk;   // flagged read trace indices
  std::set<size_t> mk;
  std::set<size_t> dsc;
  uint64_t dsrr = 0;
};

class HbOracle {
 public:
  explicit HbOracle(const std::vector<trace::Event>& events);

  size_t node_count() const { return nodes_.size(); }
  // Happens-before between graph nodes (indices into nodes()).
  bool hb(size_t a, size_t b) const { return reach_[a][b]; }

  AnomalySets check() const;

  bool cut_violation(
      const std::vector<std::pair<std::string, lattice::Version>>& contents,
      std::string* why = nullptr) const;

  struct Node {
    size_t trace_idx = 0;
    bool is_write = false;
    std::string key;
    lattice::Version version;
    std::string execution;
    std::string fn;
    std::string cache;
  };
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<size_t> covered(const std::string& key,
                              const lattice::Version& version) const;
  bool ancestor_fn(const std::string& execution, const std::string& from,
                   const std::string& to) const;

  std::vector<trace::Event> events_;
  std::vector<Node> nodes_;
  std::map<std::string, std::vector<size_t>> writes_by_key_;
  std::vector<std::vector<bool>> reach_;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>>
      dag_edges_;
  std::map<std::string, std::map<std::string, std::string>> assignments_;
};

// Count of repeatable-read violations at the value level: every read in
// a linear session must return the latest intra-session write value or
// the frozen first-read value.
uint64_t serial_rr_value_violations(const std::vector<trace::Event>& events);

}  // namespace oracle

#endif  // FAASIM_TESTS_ORACLE_HB_ORACLE_HPP_
