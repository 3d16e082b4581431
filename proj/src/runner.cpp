#include "faasim/runner.hpp"

#include <algorithm>

namespace faasim::run {

using lattice::Json;

Json SimConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["mode"] = lattice::mode_name(mode);
  Json c;
  c["storage_nodes"] = cluster.storage_nodes;
  c["exec_nodes"] = cluster.exec_nodes;
  c["slots_per_node"] = cluster.slots_per_node;
  c["schedulers"] = cluster.schedulers;
  c["replication"] = cluster.replication;
  c["vnodes"] = cluster.vnodes;
  j["cluster"] = c;
  Json n;
  n["median_ms"] = cluster.latency.median_ms;
  n["sigma"] = cluster.latency.sigma;
  j["network"] = n;
  Json t;
  t["propagation_ms"] = cluster.propagation_tick / sim::kMillisecond;
  t["keyset_ms"] = cluster.cache.keyset_period / sim::kMillisecond;
  t["metrics_ms"] = cluster.metrics_period / sim::kMillisecond;
  t["refresh_ms"] = cluster.scheduler.refresh_period / sim::kMillisecond;
  t["policy_tick_ms"] = cluster.policy.policy_tick / sim::kMillisecond;
  t["spin_up_ms"] = cluster.policy.spin_up_delay / sim::kMillisecond;
  t["drain_window_ms"] = cluster.policy.drain_window / sim::kMillisecond;
  t["upstream_timeout_ms"] = cluster.cache.upstream_timeout / sim::kMillisecond;
  j["timers"] = t;
  Json p;
  p["scale_up_util"] = cluster.policy.scale_up_util;
  p["scale_down_util"] = cluster.policy.scale_down_util;
  p["step_fraction"] = cluster.policy.step_fraction;
  p["min_nodes"] = cluster.policy.min_nodes;
  p["max_nodes"] = cluster.policy.max_nodes;
  p["max_retries"] = cluster.policy.max_retries;
  p["dag_timeout_floor_ms"] = cluster.policy.dag_timeout_floor /
                              sim::kMillisecond;
  p["dag_timeout_factor"] = cluster.policy.dag_timeout_factor;
  p["aggregator"] = cluster.policy.aggregator;
  j["policy"] = p;
  Json cache;
  cache["capacity"] = cluster.cache.capacity;
  cache["strict_valid"] = cluster.cache.strict_valid;
  j["cache"] = cache;
  Json sched;
  sched["saturation"] = cluster.scheduler.saturation;
  sched["pins_per_function"] = cluster.scheduler.pins_per_function;
  j["scheduler"] = sched;
  j["workload"] = workload.to_json();
  Json fails = Json::array();
  for (const auto& f : failures) {
    fails.push_back(Json::array({f.node, f.at / sim::kMillisecond}));
  }
  j["failures"] = fails;
  j["time_limit_ms"] = time_limit / sim::kMillisecond;
  return j;
}

namespace {

template <typename T>
T field(const Json& j, const std::string& name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const std::exception& ex) {
    throw ConfigError("ConfigError at '" + name + "': " + ex.what());
  }
}

sim::Time ms_field(const Json& j, const std::string& name, sim::Time fallback) {
  if (!j.contains(name)) return fallback;
  double ms = field<double>(j, name, 0);
  if (ms < 0) throw ConfigError("ConfigError at '" + name + "': negative");
  return sim::from_ms(ms);
}

}  // namespace

SimConfig SimConfig::from_json(const Json& j) {
  SimConfig cfg;
  cfg.seed = field<uint64_t>(j, "seed", 1);
  if (j.contains("mode")) {
    try {
      cfg.mode = lattice::mode_from_name(j.at("mode").get<std::string>());
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("ConfigError at 'mode': ") + ex.what());
    }
  }
  cfg.cluster.seed = cfg.seed;
  cfg.cluster.mode = cfg.mode;
  if (j.contains("cluster")) {
    const Json& c = j.at("cluster");
    cfg.cluster.storage_nodes = field<int>(c, "storage_nodes", 2);
    cfg.cluster.exec_nodes = field<int>(c, "exec_nodes", 3);
    cfg.cluster.slots_per_node = field<int>(c, "slots_per_node", 3);
    cfg.cluster.schedulers = field<int>(c, "schedulers", 1);
    cfg.cluster.replication = field<int>(c, "replication", 2);
    cfg.cluster.vnodes = field<int>(c, "vnodes", 16);
    if (cfg.cluster.storage_nodes < 1) {
      throw ConfigError("ConfigError at 'cluster.storage_nodes': must be >=1");
    }
    if (cfg.cluster.exec_nodes < 1) {
      throw ConfigError("ConfigError at 'cluster.exec_nodes': must be >=1");
    }
  }
  if (j.contains("network")) {
    cfg.cluster.latency.median_ms =
        field<double>(j.at("network"), "median_ms", 1.0);
    cfg.cluster.latency.sigma = field<double>(j.at("network"), "sigma", 0.25);
  }
  if (j.contains("timers")) {
    const Json& t = j.at("timers");
    cfg.cluster.propagation_tick =
        ms_field(t, "propagation_ms", cfg.cluster.propagation_tick);
    cfg.cluster.cache.keyset_period =
        ms_field(t, "keyset_ms", cfg.cluster.cache.keyset_period);
    cfg.cluster.metrics_period =
        ms_field(t, "metrics_ms", cfg.cluster.metrics_period);
    cfg.cluster.scheduler.refresh_period =
        ms_field(t, "refresh_ms", cfg.cluster.scheduler.refresh_period);
    cfg.cluster.policy.policy_tick =
        ms_field(t, "policy_tick_ms", cfg.cluster.policy.policy_tick);
    cfg.cluster.policy.spin_up_delay =
        ms_field(t, "spin_up_ms", cfg.cluster.policy.spin_up_delay);
    cfg.cluster.policy.drain_window =
        ms_field(t, "drain_window_ms", cfg.cluster.policy.drain_window);
    cfg.cluster.cache.upstream_timeout =
        ms_field(t, "upstream_timeout_ms", cfg.cluster.cache.upstream_timeout);
  }
  if (j.contains("policy")) {
    const Json& p = j.at("policy");
    cfg.cluster.policy.scale_up_util = field<double>(p, "scale_up_util", 0.70);
    cfg.cluster.policy.scale_down_util =
        field<double>(p, "scale_down_util", 0.20);
    cfg.cluster.policy.step_fraction = field<double>(p, "step_fraction", 0.20);
    cfg.cluster.policy.min_nodes = field<int>(p, "min_nodes", 1);
    cfg.cluster.policy.max_nodes = field<int>(p, "max_nodes", 64);
    cfg.cluster.policy.max_retries = field<int>(p, "max_retries", 3);
    cfg.cluster.policy.dag_timeout_floor =
        ms_field(p, "dag_timeout_floor_ms", cfg.cluster.policy.dag_timeout_floor);
    cfg.cluster.policy.dag_timeout_factor =
        field<double>(p, "dag_timeout_factor", 4.0);
    cfg.cluster.policy.aggregator =
        field<std::string>(p, "aggregator", "mean");
    if (cfg.cluster.policy.scale_down_util >=
        cfg.cluster.policy.scale_up_util) {
      throw ConfigError(
          "ConfigError at 'policy': scale_down_util must be below "
          "scale_up_util");
    }
  }
  if (j.contains("cache")) {
    cfg.cluster.cache.capacity = field<size_t>(j.at("cache"), "capacity", 0);
    cfg.cluster.cache.strict_valid =
        field<bool>(j.at("cache"), "strict_valid", false);
  }
  if (j.contains("scheduler")) {
    cfg.cluster.scheduler.saturation =
        field<double>(j.at("scheduler"), "saturation", 0.70);
    cfg.cluster.scheduler.pins_per_function =
        field<int>(j.at("scheduler"), "pins_per_function", 1);
  }
  if (!j.contains("workload")) {
    throw ConfigError("ConfigError: missing 'workload'");
  }
  try {
    if (j.at("workload").is_string()) {
      cfg.workload = load::generate_workload(
          j.at("workload").get<std::string>(), cfg.seed);
    } else {
      cfg.workload = load::Workload::from_json(j.at("workload"));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("ConfigError at 'workload': ") + ex.what());
  }
  if (j.contains("failures")) {
    for (const auto& f : j.at("failures")) {
      FailureInjection inj;
      inj.node = f.at(0).get<std::string>();
      inj.at = sim::from_ms(f.at(1).get<double>());
      cfg.failures.push_back(inj);
    }
  }
  cfg.time_limit = ms_field(j, "time_limit_ms", cfg.time_limit);
  return cfg;
}

RunResult run(const SimConfig& config) {
  RunResult result;
  cluster::ClusterConfig cluster_cfg = config.cluster;
  cluster_cfg.seed = config.seed;
  cluster_cfg.mode = config.mode;
  cluster::Cluster cluster(cluster_cfg);
  sim::Kernel& kernel = cluster.kernel();

  // Install the workload, then attach clients.
  bool installed = false;
  load::install_workload(
      cluster, config.workload,
      [&](bool ok, std::string error) {
        result.install_ok = ok;
        result.install_error = std::move(error);
        if (!ok) return;
        installed = true;
        const load::Workload& w = config.workload;
        if (!w.phases.empty()) {
          int client_index = 0;
          for (const load::Phase& phase : w.phases) {
            for (int c = 0; c < phase.clients; ++c) {
              auto* client = cluster.add_client(
                  load::make_factory(w, config.seed, client_index,
                                     w.requests_per_client),
                  w.think, phase.from, phase.until);
              client->start();
              ++client_index;
            }
          }
        } else {
          for (int c = 0; c < w.clients; ++c) {
            auto* client = cluster.add_client(
                load::make_factory(w, config.seed, c, w.requests_per_client),
                w.think);
            client->start();
          }
        }
      });

  for (const FailureInjection& f : config.failures) {
    kernel.at(f.at, [&cluster, node = f.node]() { cluster.crash_node(node); });
  }

  // Quiescence poll: once every client is done and nothing is in flight,
  // stop the periodic ticks so the event queue drains.
  bool stopped = false;
  std::function<void()> poll = [&]() {
    if (stopped) return;
    if (installed && cluster.quiescent()) {
      stopped = true;
      for (auto& [id, node] : cluster.storage_nodes()) node->stop();
      for (auto& [addr, c] : cluster.caches()) c->stop();
      for (auto& [addr, s] : cluster.slots()) s->stop();
      for (size_t i = 0; i < cluster.scheduler_count(); ++i) {
        cluster.scheduler(i)->stop();
      }
      cluster.manager()->stop();
      return;
    }
    kernel.after(config.quiescence_poll, poll);
  };

  cluster.start();
  kernel.after(config.quiescence_poll, poll);
  kernel.run(config.time_limit);
  // Drain stragglers after the ticks stop.
  kernel.run(kernel.now() + 10 * sim::kSecond);

  // Assemble the reports.
  result.trace = cluster.log().dump();
  result.events = cluster.log().events();

  report::Metrics& m = result.metrics;
  m.mode = lattice::mode_name(config.mode);
  m.seed = config.seed;
  m.duration_us = kernel.now();
  std::vector<sim::Time> latencies;
  std::vector<sim::Time> completion_times;
  for (const auto& client : cluster.clients()) {
    m.requests_issued += client->issued();
    m.requests_completed += client->completed();
    m.requests_failed += client->failed();
    for (sim::Time l : client->latencies()) latencies.push_back(l);
  }
  std::sort(latencies.begin(), latencies.end());
  auto pct = [&latencies](double p) -> double {
    if (latencies.empty()) return 0;
    size_t idx = static_cast<size_t>(p * (latencies.size() - 1));
    return static_cast<double>(latencies[idx]) / sim::kMillisecond;
  };
  m.latency_p50_ms = pct(0.50);
  m.latency_p99_ms = pct(0.99);
  m.retries = cluster.manager()->retries();
  m.gave_up = cluster.manager()->gave_up();
  if (kernel.now() > 0) {
    m.throughput_rps = static_cast<double>(m.requests_completed) /
                       (static_cast<double>(kernel.now()) / sim::kSecond);
  }
  for (auto& [addr, c] : cluster.caches()) {
    m.cache_hits += c->stats().hits;
    m.cache_misses += c->stats().misses;
    m.upstream_fetches += c->stats().upstream_fetches;
    m.max_update_buffer_depth =
        std::max<uint64_t>(m.max_update_buffer_depth, c->stats().max_pending);
  }
  if (m.cache_hits + m.cache_misses > 0) {
    m.cache_hit_rate = static_cast<double>(m.cache_hits) /
                       static_cast<double>(m.cache_hits + m.cache_misses);
  }
  std::set<std::string> keys;
  std::vector<uint64_t> index_bytes;
  for (auto& [id, node] : cluster.storage_nodes()) {
    for (const auto& [key, capsule] : node->shard()) keys.insert(key);
    for (const auto& [key, caches] : node->index()) {
      ++m.index_entries;
      uint64_t bytes = 0;
      for (const auto& cache_addr : caches) bytes += cache_addr.size();
      index_bytes.push_back(bytes);
    }
  }
  m.kvs_keys = keys.size();
  std::sort(index_bytes.begin(), index_bytes.end());
  if (!index_bytes.empty()) {
    m.index_bytes_median = index_bytes[index_bytes.size() / 2];
    m.index_bytes_p99 =
        index_bytes[static_cast<size_t>(0.99 * (index_bytes.size() - 1))];
  }
  for (size_t i = 0; i < cluster.scheduler_count(); ++i) {
    m.assignments += cluster.scheduler(i)->stats().assignments;
    m.saturated_assignments +=
        cluster.scheduler(i)->stats().saturated_assignments;
  }
  for (const auto& [t, n] : cluster.manager()->node_series()) {
    m.node_series.emplace_back(t, n);
  }
  // Per-second completed-request series from client result times.
  std::map<int64_t, uint64_t> per_second;
  for (const trace::Event& ev : result.events) {
    if (ev.kind == trace::Kind::kMessage && ev.msg_kind == "result") {
      ++per_second[ev.t / sim::kSecond];
    }
  }
  for (const auto& [sec, n] : per_second) {
    m.throughput_series.emplace_back(sec * sim::kSecond, n);
  }

  result.anomalies = check::check_anomalies(result.events);
  return result;
}

}  // namespace faasim::run
