#include "faasim/report.hpp"

#include <filesystem>
#include <fstream>

namespace faasim::report {

Json Metrics::to_json() const {
  Json j;
  j["mode"] = mode;
  j["seed"] = seed;
  j["duration_us"] = duration_us;
  Json requests;
  requests["issued"] = requests_issued;
  requests["completed"] = requests_completed;
  requests["failed"] = requests_failed;
  requests["retries"] = retries;
  requests["gave_up"] = gave_up;
  j["requests"] = requests;
  Json latency;
  latency["p50_ms"] = latency_p50_ms;
  latency["p99_ms"] = latency_p99_ms;
  j["latency"] = latency;
  j["throughput_rps"] = throughput_rps;
  Json cache;
  cache["hits"] = cache_hits;
  cache["misses"] = cache_misses;
  cache["hit_rate"] = cache_hit_rate;
  cache["upstream_fetches"] = upstream_fetches;
  cache["max_update_buffer_depth"] = max_update_buffer_depth;
  j["cache"] = cache;
  Json kvs;
  kvs["keys"] = kvs_keys;
  kvs["index_entries"] = index_entries;
  kvs["index_bytes_median"] = index_bytes_median;
  kvs["index_bytes_p99"] = index_bytes_p99;
  j["kvs"] = kvs;
  Json sched;
  sched["assignments"] = assignments;
  sched["saturated_assignments"] = saturated_assignments;
  j["scheduler"] = sched;
  Json nodes = Json::array();
  for (const auto& [t, n] : node_series) nodes.push_back(Json::array({t, n}));
  j["node_series"] = nodes;
  Json tput = Json::array();
  for (const auto& [t, n] : throughput_series) {
    tput.push_back(Json::array({t, n}));
  }
  j["throughput_series"] = tput;
  return j;
}

bool emit_report(const std::string& dir, const std::string& trace_ndjson,
                 const Metrics& metrics, const check::AnomalyReport& anomalies,
                 std::string* error) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    if (error != nullptr) *error = "IoError: " + ec.message();
    return false;
  }
  auto write_file = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) {
      if (error != nullptr) *error = "IoError: cannot write " + name;
      return false;
    }
    out << body;
    return true;
  };
  if (!write_file("trace.ndjson", trace_ndjson)) return false;
  if (!write_file("metrics.json", metrics.to_json().dump(2) + "\n")) {
    return false;
  }
  if (!write_file("anomalies.json", anomalies.to_json().dump(2) + "\n")) {
    return false;
  }

  std::string csv = "t_us,live_nodes\n";
  for (const auto& [t, n] : metrics.node_series) {
    csv += std::to_string(t) + "," + std::to_string(n) + "\n";
  }
  csv += "\nt_us,completed_in_second\n";
  for (const auto& [t, n] : metrics.throughput_series) {
    csv += std::to_string(t) + "," + std::to_string(n) + "\n";
  }
  return write_file("series.csv", csv);
}

bool validate_schema(const Json& value, const Json& schema, std::string* why) {
  auto fail = [why](const std::string& msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  if (schema.contains("type")) {
    const std::string type = schema["type"].get<std::string>();
    if (type == "object" && !value.is_object()) return fail("expected object");
    if (type == "array" && !value.is_array()) return fail("expected array");
    if (type == "string" && !value.is_string()) return fail("expected string");
    if (type == "integer" && !value.is_number_integer()) {
      return fail("expected integer");
    }
    if (type == "number" && !value.is_number()) return fail("expected number");
    if (type == "boolean" && !value.is_boolean()) {
      return fail("expected boolean");
    }
  }
  if (schema.contains("required")) {
    for (const auto& name : schema["required"]) {
      if (!value.contains(name.get<std::string>())) {
        return fail("missing required field: " + name.get<std::string>());
      }
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (auto it = schema["properties"].begin();
         it != schema["properties"].end(); ++it) {
      if (!value.contains(it.key())) continue;
      std::string sub;
      if (!validate_schema(value[it.key()], *it, &sub)) {
        return fail(it.key() + ": " + sub);
      }
    }
  }
  if (schema.contains("items") && value.is_array()) {
    for (const auto& item : value) {
      std::string sub;
      if (!validate_schema(item, schema["items"], &sub)) {
        return fail("item: " + sub);
      }
    }
  }
  return true;
}

Json report_schema() {
  return Json::parse(R"({
    "type": "object",
    "required": ["mode", "seed", "duration_us", "requests", "latency",
                 "throughput_rps", "cache", "kvs", "scheduler",
                 "node_series", "throughput_series"],
    "properties": {
      "mode": {"type": "string"},
      "seed": {"type": "integer"},
      "duration_us": {"type": "integer"},
      "requests": {
        "type": "object",
        "required": ["issued", "completed", "failed", "retries", "gave_up"],
        "properties": {
          "issued": {"type": "integer"},
          "completed": {"type": "integer"},
          "failed": {"type": "integer"},
          "retries": {"type": "integer"},
          "gave_up": {"type": "integer"}
        }
      },
      "latency": {
        "type": "object",
        "required": ["p50_ms", "p99_ms"],
        "properties": {
          "p50_ms": {"type": "number"},
          "p99_ms": {"type": "number"}
        }
      },
      "throughput_rps": {"type": "number"},
      "cache": {
        "type": "object",
        "required": ["hits", "misses", "hit_rate", "upstream_fetches",
                     "max_update_buffer_depth"]
      },
      "kvs": {
        "type": "object",
        "required": ["keys", "index_entries", "index_bytes_median",
                     "index_bytes_p99"]
      },
      "scheduler": {
        "type": "object",
        "required": ["assignments", "saturated_assignments"]
      },
      "node_series": {"type": "array", "items": {"type": "array"}},
      "throughput_series": {"type": "array", "items": {"type": "array"}}
    }
  })");
}

}  // namespace faasim::report
