#ifndef FAASIM_REPORT_HPP_
#define FAASIM_REPORT_HPP_

#include <string>
#include <vector>

#include "faasim/checker.hpp"
#include "faasim/lattice.hpp"

namespace faasim::report {

using lattice::Json;

struct Metrics {
  std::string mode;
  uint64_t seed = 0;
  int64_t duration_us = 0;
  uint64_t requests_issued = 0;
  uint64_t requests_completed = 0;
  uint64_t requests_failed = 0;
  uint64_t retries = 0;
  uint64_t gave_up = 0;
  double latency_p50_ms = 0;
  double latency_p99_ms = 0;
  double throughput_rps = 0;
  uint64_t cache_hits = 0;
  uint64_t cache_misses = 0;
  double cache_hit_rate = 0;
  uint64_t upstream_fetches = 0;
  uint64_t max_update_buffer_depth = 0;
  uint64_t kvs_keys = 0;
  uint64_t index_entries = 0;
  uint64_t index_bytes_median = 0;
  uint64_t index_bytes_p99 = 0;
  uint64_t assignments = 0;
  uint64_t saturated_assignments = 0;
  std::vector<std::pair<int64_t, int>> node_series;  // (us, live nodes)
  std::vector<std::pair<int64_t, uint64_t>> throughput_series;  // per second

  Json to_json() const;
};

// Writes metrics.json, anomalies.json, trace.ndjson and series.csv under
// `dir`; returns false with `error` set on I/O failure.
bool emit_report(const std::string& dir, const std::string& trace_ndjson,
                 const Metrics& metrics, const check::AnomalyReport& anomalies,
                 std::string* error);

// Minimal structural JSON-schema check: type / properties / required /
// items. Enough to pin the report shape without a full validator.
bool validate_schema(const Json& value, const Json& schema, std::string* why);

// The schema the emitted metrics.json must satisfy.
Json report_schema();

}  // namespace faasim::report

#endif  // FAASIM_REPORT_HPP_
