#include "faasim/trace.hpp"

#include <ostream>
#include <sstream>
#include <stdexcept>

namespace faasim::trace {

using lattice::Json;

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::kRead: return "read";
    case Kind::kWrite: return "write";
    case Kind::kMessage: return "message";
    case Kind::kSchedule: return "schedule";
    case Kind::kMembership: return "membership";
  }
  return "message";
}

namespace {

Kind kind_from_name(const std::string& s) {
  if (s == "read") return Kind::kRead;
  if (s == "write") return Kind::kWrite;
  if (s == "message") return Kind::kMessage;
  if (s == "schedule") return Kind::kSchedule;
  if (s == "membership") return Kind::kMembership;
  throw std::invalid_argument("unknown trace event kind: " + s);
}

}  // namespace

Json Event::to_json() const {
  Json j;
  j["t"] = t;
  j["seq"] = seq;
  j["kind"] = kind_name(kind);
  switch (kind) {
    case Kind::kRead:
      j["key"] = key;
      j["version"] = version.to_json();
      j["executor"] = executor;
      j["cache"] = cache;
      j["execution"] = execution;
      j["fn"] = fn;
      j["value"] = value;
      break;
    case Kind::kWrite:
      j["key"] = key;
      j["version"] = version.to_json();
      j["executor"] = executor;
      j["cache"] = cache;
      j["execution"] = execution;
      j["fn"] = fn;
      j["value"] = value;
      j["deps"] = lattice::deps_to_json(deps);
      break;
    case Kind::kMessage:
      j["src"] = src;
      j["dst"] = dst;
      j["msg"] = msg_kind;
      break;
    case Kind::kSchedule: {
      j["execution"] = execution;
      j["dag"] = dag;
      Json a = Json::array();
      for (const auto& [fn_name, slot] : assignments) {
        a.push_back(Json::array({fn_name, slot}));
      }
      j["assignments"] = a;
      Json e = Json::array();
      for (const auto& [from, to] : dag_edges) {
        e.push_back(Json::array({from, to}));
      }
      j["edges"] = e;
      break;
    }
    case Kind::kMembership:
      j["node"] = node;
      j["state"] = state;
      j["epoch"] = epoch;
      break;
  }
  return j;
}

Event Event::from_json(const Json& j) {
  Event ev;
  ev.t = j.at("t").get<sim::Time>();
  ev.seq = j.at("seq").get<uint64_t>();
  ev.kind = kind_from_name(j.at("kind").get<std::string>());
  switch (ev.kind) {
    case Kind::kRead:
    case Kind::kWrite:
      ev.key = j.at("key").get<std::string>();
      ev.version = lattice::Version::from_json(j.at("version"));
      ev.executor = j.at("executor").get<std::string>();
      ev.cache = j.at("cache").get<std::string>();
      ev.execution = j.at("execution").get<std::string>();
      ev.fn = j.at("fn").get<std::string>();
      ev.value = j.at("value").get<std::string>();
      if (ev.kind == Kind::kWrite) {
        ev.deps = lattice::deps_from_json(j.at("deps"));
      }
      break;
    case Kind::kMessage:
      ev.src = j.at("src").get<std::string>();
      ev.dst = j.at("dst").get<std::string>();
      ev.msg_kind = j.at("msg").get<std::string>();
      break;
    case Kind::kSchedule:
      ev.execution = j.at("execution").get<std::string>();
      ev.dag = j.at("dag").get<std::string>();
      for (const auto& pair : j.at("assignments")) {
        ev.assignments[pair.at(0).get<std::string>()] =
            pair.at(1).get<std::string>();
      }
      for (const auto& pair : j.at("edges")) {
        ev.dag_edges.emplace_back(pair.at(0).get<std::string>(),
                                  pair.at(1).get<std::string>());
      }
      break;
    case Kind::kMembership:
      ev.node = j.at("node").get<std::string>();
      ev.state = j.at("state").get<std::string>();
      ev.epoch = j.at("epoch").get<uint64_t>();
      break;
  }
  return ev;
}

Event& Log::append(Kind kind) {
  Event ev;
  ev.t = kernel_->now();
  ev.seq = events_.size();
  ev.kind = kind;
  events_.push_back(std::move(ev));
  return events_.back();
}

void Log::read(const std::string& key, const lattice::Version& version,
               const std::string& executor, const std::string& cache,
               const std::string& execution, const std::string& fn,
               const std::string& value) {
  Event& ev = append(Kind::kRead);
  ev.key = key;
  ev.version = version;
  ev.executor = executor;
  ev.cache = cache;
  ev.execution = execution;
  ev.fn = fn;
  ev.value = value;
}

void Log::write(const std::string& key, const lattice::Version& version,
                const std::string& executor, const std::string& cache,
                const std::string& execution, const std::string& fn,
                const std::string& value, const lattice::DependencySet& deps) {
  Event& ev = append(Kind::kWrite);
  ev.key = key;
  ev.version = version;
  ev.executor = executor;
  ev.cache = cache;
  ev.execution = execution;
  ev.fn = fn;
  ev.value = value;
  ev.deps = deps;
}

void Log::message(const std::string& src, const std::string& dst,
                  const std::string& msg_kind) {
  Event& ev = append(Kind::kMessage);
  ev.src = src;
  ev.dst = dst;
  ev.msg_kind = msg_kind;
}

void Log::schedule(
    const std::string& execution, const std::string& dag,
    const std::map<std::string, std::string>& assignments,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  Event& ev = append(Kind::kSchedule);
  ev.execution = execution;
  ev.dag = dag;
  ev.assignments = assignments;
  ev.dag_edges = edges;
}

void Log::membership(const std::string& node, const std::string& state,
                     uint64_t epoch) {
  Event& ev = append(Kind::kMembership);
  ev.node = node;
  ev.state = state;
  ev.epoch = epoch;
}

void Log::dump(std::ostream& out) const {
  for (const Event& ev : events_) {
    out << ev.to_json().dump() << '\n';
  }
}

std::string Log::dump() const {
  std::ostringstream out;
  dump(out);
  return out.str();
}

std::vector<Event> Log::parse(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(Event::from_json(Json::parse(line)));
  }
  return events;
}

}  // namespace faasim::trace
