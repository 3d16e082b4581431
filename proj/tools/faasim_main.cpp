#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "faasim/gossip.hpp"
#include "faasim/runner.hpp"

namespace {

using faasim::lattice::Json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            const std::string& mode, const std::string& out_dir) {
  Json j = Json::parse(read_file(config_path));
  if (const char* env_seed = std::getenv("FAASIM_SEED")) {
    j["seed"] = std::stoull(env_seed);
  }
  if (seed) j["seed"] = *seed;
  if (!mode.empty()) j["mode"] = mode;

  std::string dir = out_dir;
  if (const char* env_out = std::getenv("FAASIM_OUT"); env_out && dir.empty()) {
    dir = env_out;
  }
  if (dir.empty()) dir = "out";

  faasim::run::SimConfig config = faasim::run::SimConfig::from_json(j);
  faasim::run::RunResult result = faasim::run::run(config);
  if (!result.install_ok) {
    std::cerr << "workload install failed: " << result.install_error << "\n";
    return 1;
  }
  std::string error;
  if (!faasim::report::emit_report(dir, result.trace, result.metrics,
                                   result.anomalies, &error)) {
    std::cerr << error << "\n";
    return 1;
  }
  Json summary;
  summary["out"] = dir;
  summary["events"] = result.events.size();
  summary["requests"] = result.metrics.requests_completed;
  summary["anomalies"] = result.anomalies.to_json()["counts"];
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_check(const std::string& trace_path, const std::string& levels_csv) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open " << trace_path << "\n";
    return 1;
  }
  std::vector<faasim::trace::Event> events = faasim::trace::Log::parse(in);
  std::set<std::string> levels;
  std::stringstream ss(levels_csv);
  std::string level;
  while (std::getline(ss, level, ',')) {
    if (!level.empty()) levels.insert(level);
  }
  try {
    faasim::check::AnomalyReport report =
        faasim::check::check_anomalies(events, levels);
    std::cout << report.to_json().dump(2) << "\n";
  } catch (const faasim::check::MalformedTrace& ex) {
    std::cerr << "MalformedTrace: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_gen(const std::string& kind, uint64_t seed, const std::string& out) {
  faasim::load::Workload w = faasim::load::generate_workload(kind, seed);
  std::string body = w.to_json().dump(2) + "\n";
  if (out.empty()) {
    std::cout << body;
  } else {
    std::ofstream f(out, std::ios::binary);
    f << body;
  }
  return 0;
}

int cmd_gossip(int actors, uint64_t seed) {
  faasim::gossip::GossipConfig cfg;
  cfg.actors = actors;
  cfg.seed = seed;
  faasim::gossip::GossipReport report = faasim::gossip::run_gossip(cfg);
  Json j;
  j["converged"] = report.converged;
  j["rounds"] = report.rounds;
  j["sim_time_ms"] = report.sim_time / faasim::sim::kMillisecond;
  j["true_mean"] = report.true_mean;
  j["max_rel_error"] = report.max_rel_error;
  j["max_mass_drift"] = report.max_mass_drift;
  std::cout << j.dump(2) << "\n";
  return report.converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for a stateful FaaS runtime"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode;
  std::string out_dir;
  std::optional<uint64_t> seed_opt;
  uint64_t seed = 1;
  auto* run_cmd = app.add_subcommand("run", "Run a simulation");
  run_cmd->add_option("--config", config_path, "Config JSON file")
      ->required();
  run_cmd->add_option("--seed", seed_opt, "Seed override");
  run_cmd->add_option("--mode", mode, "Consistency mode: lww|dsrr|sk|mk|dsc");
  run_cmd->add_option("--out", out_dir, "Output directory");

  std::string trace_path;
  std::string levels = "sk,mk,dsc,dsrr";
  auto* check_cmd = app.add_subcommand("check", "Check a trace for anomalies");
  check_cmd->add_option("--trace", trace_path, "NDJSON trace file")
      ->required();
  check_cmd->add_option("--levels", levels, "Comma-separated levels");

  std::string kind;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a workload spec");
  gen_cmd->add_option("--kind", kind, "Workload kind")->required();
  gen_cmd->add_option("--seed", seed, "Seed");
  gen_cmd->add_option("--out", gen_out, "Output file (default stdout)");

  int actors = 10;
  auto* gossip_cmd = app.add_subcommand("gossip", "Run the gossip benchmark");
  gossip_cmd->add_option("--actors", actors, "Actor count");
  gossip_cmd->add_option("--seed", seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, seed_opt, mode, out_dir);
    if (check_cmd->parsed()) return cmd_check(trace_path, levels);
    if (gen_cmd->parsed()) return cmd_gen(kind, seed, gen_out);
    if (gossip_cmd->parsed()) return cmd_gossip(actors, seed);
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << "\n";
    return 1;
  }
  return 0;
}
