#ifndef FAASIM_GOSSIP_HPP_
#define FAASIM_GOSSIP_HPP_

#include <string>
#include <vector>

#include "faasim/cluster.hpp"

// Push-based random pairwise averaging over the executor messaging API.
// Each round, every idle actor picks a random peer and the pair swaps to
// their average; the global sum is invariant across completed exchanges.

namespace faasim::gossip {

struct GossipConfig {
  int actors = 10;
  uint64_t seed = 1;
  double target_error = 0.05;  // relative to the true mean
  int max_rounds = 400;
  sim::Time round_interval = 10 * sim::kMillisecond;
  std::vector<double> initial_values;  // empty = seeded uniform [0, 100)
};

struct GossipReport {
  bool converged = false;
  int rounds = 0;
  sim::Time sim_time = 0;
  double true_mean = 0;
  double max_rel_error = 0;  // at the end of the run
  // Mass drift per quiet round, relative to the initial sum.
  double max_mass_drift = 0;
  std::vector<double> final_values;
  std::vector<std::pair<int, double>> round_sums;  // quiet rounds only
};

GossipReport run_gossip(const GossipConfig& cfg);

}  // namespace faasim::gossip

#endif  // FAASIM_GOSSIP_HPP_
