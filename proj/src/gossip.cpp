#include "faasim/gossip.hpp"

#include <cmath>

namespace faasim::gossip {

using exec::Json;

namespace {

struct Actor {
  std::shared_ptr<exec::InvocationCtx> ctx;
  double value = 0;
};

}  // namespace

GossipReport run_gossip(const GossipConfig& cfg) {
  cluster::ClusterConfig cluster_cfg;
  cluster_cfg.seed = cfg.seed;
  cluster_cfg.mode = lattice::Mode::kLww;
  cluster_cfg.storage_nodes = 1;
  cluster_cfg.exec_nodes = std::max(1, (cfg.actors + 2) / 3);
  cluster::Cluster cluster(cluster_cfg);
  cluster.start();

  sim::Rng rng(sim::derive_seed(cfg.seed, "gossip"));
  std::vector<Actor> actors(cfg.actors);
  std::vector<std::string> slot_addrs;
  for (const auto& [addr, slot] : cluster.slots()) slot_addrs.push_back(addr);

  double initial_sum = 0;
  for (int i = 0; i < cfg.actors; ++i) {
    exec::Slot* slot = cluster.slot(slot_addrs[i % slot_addrs.size()]);
    actors[i].ctx = slot->spawn_actor("gossip");
    actors[i].value = i < static_cast<int>(cfg.initial_values.size())
                          ? cfg.initial_values[i]
                          : rng.unit() * 100.0;
    initial_sum += actors[i].value;
    // Advertise the invocation id under a well-known key so peers can
    // address this actor.
    lattice::Capsule id_capsule = lattice::encapsulate(
        actors[i].ctx->id(), lattice::Mode::kLww, "gossip", i + 1, {});
    slot->kvs().put("_sys/actor/" + std::to_string(i), id_capsule, nullptr);
  }

  GossipReport report;
  report.true_mean = initial_sum / cfg.actors;

  // Exchange: the responder moves to the pair average and replies with
  // the mass delta the initiator must give up. Each completed exchange
  // transfers exactly (v_sent - avg), so the global sum is invariant no
  // matter how exchanges interleave.
  auto in_flight = std::make_shared<int>(0);
  for (int i = 0; i < cfg.actors; ++i) {
    actors[i].ctx->set_on_message([&actors, in_flight, i](exec::Message msg) {
      Actor& actor = actors[i];
      const std::string kind = msg.body.at("kind").get<std::string>();
      if (kind == "avg_req") {
        double theirs = msg.body.at("v").get<double>();
        double avg = (actor.value + theirs) / 2.0;
        actor.value = avg;
        Json reply;
        reply["kind"] = "avg_resp";
        reply["delta"] = theirs - avg;
        actor.ctx->send(msg.body.at("from_id").get<std::string>(), reply);
        return;
      }
      actor.value -= msg.body.at("delta").get<double>();
      --*in_flight;
    });
  }

  sim::Kernel& kernel = cluster.kernel();
  int round = 0;
  bool converged = false;
  double max_drift = 0;
  double initial_abs = std::abs(initial_sum) > 0 ? std::abs(initial_sum) : 1.0;

  std::function<void()> tick = [&]() {
    // Check the previous round once all its exchanges have settled.
    if (*in_flight == 0 && round > 0) {
      double sum = 0;
      for (const Actor& actor : actors) sum += actor.value;
      report.round_sums.emplace_back(round, sum);
      max_drift = std::max(max_drift,
                           std::abs(sum - initial_sum) / initial_abs);
      double worst = 0;
      for (const Actor& actor : actors) {
        worst = std::max(worst, std::abs(actor.value - report.true_mean) /
                                    std::abs(report.true_mean));
      }
      report.max_rel_error = worst;
      if (worst <= cfg.target_error) {
        converged = true;
        return;
      }
    }
    if (round >= cfg.max_rounds) return;
    ++round;
    for (int i = 0; i < cfg.actors; ++i) {
      int peer = static_cast<int>(rng.index(cfg.actors - 1));
      if (peer >= i) ++peer;
      ++*in_flight;
      Json body;
      body["kind"] = "avg_req";
      body["v"] = actors[i].value;
      body["from_id"] = actors[i].ctx->id();
      actors[i].ctx->send(actors[peer].ctx->id(), body);
    }
    kernel.after(cfg.round_interval, tick);
  };
  kernel.after(cfg.round_interval, tick);
  kernel.run(120 * sim::kSecond);

  report.converged = converged;
  report.rounds = round;
  report.sim_time = kernel.now();
  report.max_mass_drift = max_drift;
  for (const Actor& actor : actors) report.final_values.push_back(actor.value);
  return report;
}

}  // namespace faasim::gossip
