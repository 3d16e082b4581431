#ifndef FAASIM_SIM_HPP_
#define FAASIM_SIM_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <vector>

// Single-threaded discrete-event kernel. All components are event
// handlers; determinism comes from the (time, sequence) event order and
// one seeded generator consumed in event order.

namespace faasim::sim {

using Time = int64_t;  // simulated microseconds

constexpr Time kMillisecond = 1000;
constexpr Time kSecond = 1000 * kMillisecond;

inline Time from_ms(double ms) {
  return static_cast<Time>(std::llround(ms * kMillisecond));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    // Rejection sampling keeps the draw unbiased.
    uint64_t limit = std::numeric_limits<uint64_t>::max() -
                     std::numeric_limits<uint64_t>::max() % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  size_t index(size_t n) { return static_cast<size_t>(below(n)); }

  // Uniform in [0, 1).
  double unit() {
    return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  // Box-Muller without spare caching so the draw count stays predictable.
  double normal() {
    double u1 = unit();
    double u2 = unit();
    while (u1 <= 0.0) u1 = unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double lognormal(double median, double sigma) {
    return median * std::exp(sigma * normal());
  }

  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

// Splits a root seed into independent named streams.
uint64_t derive_seed(uint64_t seed, const std::string& stream);

class Kernel {
 public:
  explicit Kernel(uint64_t seed) : rng_(derive_seed(seed, "kernel")) {}

  Time now() const { return now_; }
  Rng& rng() { return rng_; }

  void at(Time t, std::function<void()> fn) {
    queue_.push(Event{t < now_ ? now_ : t, next_seq_++, std::move(fn)});
  }

  void after(Time delay, std::function<void()> fn) {
    at(now_ + delay, std::move(fn));
  }

  bool step() {
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
    return true;
  }

  // Runs until the queue drains or the time limit passes. Returns the
  // number of events processed. Time only advances to `until` when work
  // remains beyond it; a drained queue leaves `now` at the last event.
  uint64_t run(Time until = -1) {
    uint64_t n = 0;
    while (!queue_.empty()) {
      if (until >= 0 && queue_.top().t > until) {
        now_ = until;
        break;
      }
      step();
      ++n;
    }
    return n;
  }

  bool idle() const { return queue_.empty(); }

 private:
  struct Event {
    Time t;
    uint64_t seq;
    std::function<void()> fn;

    bool operator>(const Event& o) const {
      return t != o.t ? t > o.t : seq > o.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  Time now_ = 0;
  uint64_t next_seq_ = 0;
  Rng rng_;
};

}  // namespace faasim::sim

#endif  // FAASIM_SIM_HPP_
