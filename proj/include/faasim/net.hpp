#ifndef FAASIM_NET_HPP_
#define FAASIM_NET_HPP_

#include <functional>
#include <map>
#include <string>

#include "faasim/sim.hpp"
#include "faasim/trace.hpp"

namespace faasim::net {

// Liveness registry for every addressable process in the simulation.
class Directory {
 public:
  void add(const std::string& addr) { alive_[addr] = true; }
  void set_alive(const std::string& addr, bool alive) { alive_[addr] = alive; }
  bool alive(const std::string& addr) const {
    auto it = alive_.find(addr);
    return it != alive_.end() && it->second;
  }

 private:
  std::map<std::string, bool> alive_;
};

struct LatencyModel {
  double median_ms = 1.0;
  double sigma = 0.25;
};

// Simulated message fabric. Latency is sampled per message from a
// lognormal distribution; messages to dead destinations are dropped at
// delivery time. Every send records a trace message event.
class Network {
 public:
  Network(sim::Kernel* kernel, Directory* dir, trace::Log* log,
          LatencyModel latency)
      : kernel_(kernel), dir_(dir), log_(log), latency_(latency) {}

  sim::Time sample_latency() {
    double ms = kernel_->rng().lognormal(latency_.median_ms, latency_.sigma);
    sim::Time t = sim::from_ms(ms);
    return t < 1 ? 1 : t;
  }

  void send(const std::string& src, const std::string& dst,
            const std::string& kind, std::function<void()> deliver) {
    log_->message(src, dst, kind);
    kernel_->after(sample_latency(), [this, dst, fn = std::move(deliver)]() {
      if (dir_->alive(dst)) fn();
    });
  }

  Directory& directory() { return *dir_; }
  trace::Log& log() { return *log_; }
  sim::Kernel& kernel() { return *kernel_; }

 private:
  sim::Kernel* kernel_;
  Directory* dir_;
  trace::Log* log_;
  LatencyModel latency_;
};

}  // namespace faasim::net

#endif  // FAASIM_NET_HPP_
