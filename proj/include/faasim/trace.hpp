#ifndef FAASIM_TRACE_HPP_
#define FAASIM_TRACE_HPP_

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "faasim/lattice.hpp"
#include "faasim/sim.hpp"

// Totally ordered event log of one simulation run. Records serialize as
// newline-delimited JSON with stable field ordering so identical runs
// produce identical bytes.

namespace faasim::trace {

enum class Kind { kRead, kWrite, kMessage, kSchedule, kMembership };

std::string kind_name(Kind k);

struct Event {
  sim::Time t = 0;
  uint64_t seq = 0;
  Kind kind = Kind::kMessage;

  // read / write
  std::string key;
  lattice::Version version;
  std::string executor;   // slot that issued the operation
  std::string cache;      // serving cache (read) or local cache (write)
  std::string execution;  // DAG execution id, empty for bare client ops
  std::string fn;
  std::string value;
  lattice::DependencySet deps;  // writes in causal modes

  // message
  std::string src;
  std::string dst;
  std::string msg_kind;

  // schedule
  std::string dag;
  std::map<std::string, std::string> assignments;             // fn -> slot
  std::vector<std::pair<std::string, std::string>> dag_edges;

  // membership
  std::string node;
  std::string state;
  uint64_t epoch = 0;

  lattice::Json to_json() const;
  static Event from_json(const lattice::Json& j);
};

class Log {
 public:
  explicit Log(sim::Kernel* kernel) : kernel_(kernel) {}

  void read(const std::string& key, const lattice::Version& version,
            const std::string& executor, const std::string& cache,
            const std::string& execution, const std::string& fn,
            const std::string& value);
  void write(const std::string& key, const lattice::Version& version,
             const std::string& executor, const std::string& cache,
             const std::string& execution, const std::string& fn,
             const std::string& value, const lattice::DependencySet& deps);
  void message(const std::string& src, const std::string& dst,
               const std::string& msg_kind);
  void schedule(const std::string& execution, const std::string& dag,
                const std::map<std::string, std::string>& assignments,
                const std::vector<std::pair<std::string, std::string>>& edges);
  void membership(const std::string& node, const std::string& state,
                  uint64_t epoch);

  const std::vector<Event>& events() const { return events_; }
  size_t size() const { return events_.size(); }

  void dump(std::ostream& out) const;
  std::string dump() const;
  static std::vector<Event> parse(std::istream& in);

 private:
  Event& append(Kind kind);

  sim::Kernel* kernel_;
  std::vector<Event> events_;
};

}  // namespace faasim::trace

#endif  // FAASIM_TRACE_HPP_
