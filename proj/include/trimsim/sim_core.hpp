#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>
#include <algorithm>

namespace trimsim {

// Simulated time in integer picoseconds. Interfaces speak nanoseconds; the
// finer internal unit keeps 64 B serialization at 100 Gb/s (5.12 ns) exact.
using SimTime = std::int64_t;

// Link and meter rates in bits per second.
using BitsPerSecond = std::int64_t;

inline constexpr SimTime kPicosPerNano = 1'000;
inline constexpr SimTime kPicosPerMicro = 1'000'000;
inline constexpr SimTime kPicosPerSecond = 1'000'000'000'000;

constexpr SimTime nanoseconds(std::int64_t v) { return v * kPicosPerNano; }
constexpr SimTime microseconds(std::int64_t v) { return v * kPicosPerMicro; }
constexpr BitsPerSecond gbps(std::int64_t v) { return v * 1'000'000'000; }

constexpr double to_ns(SimTime t) { return static_cast<double>(t) / kPicosPerNano; }
constexpr double to_us(SimTime t) { return static_cast<double>(t) / kPicosPerMicro; }

// Rounds a (possibly fractional) nanosecond value to the nearest picosecond.
inline SimTime from_ns(double v) {
  return static_cast<SimTime>(v * kPicosPerNano + (v >= 0 ? 0.5 : -0.5));
}

// Wire time of `bytes` at `rate`, rounded up to the next picosecond.
inline SimTime serialization_time(std::int64_t bytes, BitsPerSecond rate) {
  if (rate <= 0) {
    throw std::invalid_argument("serialization_time: link rate must be positive");
  }
  if (bytes <= 0) {
    throw std::invalid_argument("serialization_time: byte count must be positive");
  }
  const auto bit_picos = static_cast<__int128>(bytes) * 8 * kPicosPerSecond;
  return static_cast<SimTime>((bit_picos + rate - 1) / rate);
}

// Rate-based serializer. Packets never overlap on the wire.
struct Link {
  BitsPerSecond rate = gbps(100);
  SimTime latency = 0;
  SimTime busy_until = 0;

  Link() = default;
  Link(BitsPerSecond r, SimTime lat) : rate(r), latency(lat) {
    if (r <= 0) throw std::invalid_argument("Link: zero or negative rate");
  }

  // Returns the time the last bit leaves the transmitter.
  SimTime serialize(std::int64_t bytes, SimTime now) {
    const SimTime start = std::max(now, busy_until);
    busy_until = start + serialization_time(bytes, rate);
    return busy_until;
  }

  bool idle_at(SimTime now) const { return busy_until <= now; }
};

// Single-threaded discrete-event engine. Events with equal fire times run in
// the order they were scheduled.
class Simulator {
 public:
  using Action = std::function<void()>;

  struct Event {
    SimTime fire_time;
    std::uint64_t sequence;
    Action action;
  };

  SimTime now() const { return now_; }
  std::uint64_t executed() const { return executed_; }
  std::size_t pending() const { return heap_.size(); }
  bool empty() const { return heap_.empty(); }

  void schedule_at(SimTime t, Action action) {
    if (t < now_) {
      throw std::logic_error("Simulator: event scheduled in the past (t=" + std::to_string(t) +
                             "ps, now=" + std::to_string(now_) + "ps)");
    }
    heap_.push_back(Event{t, next_sequence_++, std::move(action)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
  }

  void schedule_in(SimTime delay, Action action) { schedule_at(now_ + delay, std::move(action)); }

  // Executes the earliest event. Returns false when nothing is pending.
  bool step() {
    if (heap_.empty()) return false;
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    now_ = ev.fire_time;
    ++executed_;
    ev.action();
    return true;
  }

  void run_until(SimTime t) {
    if (t < now_) throw std::logic_error("Simulator::run_until: target time is in the past");
    while (!heap_.empty() && heap_.front().fire_time <= t) step();
    now_ = t;
  }

  void run() {
    while (step()) {
    }
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.sequence > b.sequence;
    }
  };

  std::vector<Event> heap_;
  SimTime now_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t executed_ = 0;
};

}  // namespace trimsim
