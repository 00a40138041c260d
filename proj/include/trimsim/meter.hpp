#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string_view>

#include "trimsim/sim_core.hpp"

namespace trimsim {

enum class Color : std::uint8_t { Green = 0, Yellow = 1, Red = 2 };

constexpr bool operator<(Color a, Color b) {
  return static_cast<std::uint8_t>(a) < static_cast<std::uint8_t>(b);
}

constexpr std::string_view to_string(Color c) {
  switch (c) {
    case Color::Green: return "GREEN";
    case Color::Yellow: return "YELLOW";
    case Color::Red: return "RED";
  }
  return "?";
}

inline constexpr std::int64_t kDefaultMeterBurst = 3000;
inline constexpr std::int64_t kMaxMeterBurst = 1'000'000;

// Color-blind two-rate three-color marker (RFC 2698). Buckets start full and
// refill lazily on execute().
//
// Token state is kept in bit-picoseconds (bytes * 8 * 1e12) so that refill by
// rate * elapsed is exact for every rate and time step.
class TrTcmMeter {
 public:
  TrTcmMeter(BitsPerSecond cir, BitsPerSecond pir, std::int64_t cbs, std::int64_t pbs)
      : cir_(cir), pir_(pir), cbs_(cbs), pbs_(pbs) {
    if (cir <= 0 || pir <= 0) throw std::invalid_argument("TrTcmMeter: rates must be positive");
    if (cir > pir) throw std::invalid_argument("TrTcmMeter: cir must not exceed pir");
    if (cbs <= 0 || pbs <= 0 || cbs > kMaxMeterBurst || pbs > kMaxMeterBurst) {
      throw std::invalid_argument("TrTcmMeter: burst sizes must be in (0, 1e6] bytes");
    }
    c_tokens_ = scaled(cbs_);
    p_tokens_ = scaled(pbs_);
  }

  Color execute(SimTime now, std::int64_t pkt_bytes) {
    if (now < last_update_) throw std::logic_error("TrTcmMeter: time went backwards");
    const SimTime elapsed = now - last_update_;
    last_update_ = now;
    c_tokens_ = refill(c_tokens_, cir_, elapsed, scaled(cbs_));
    p_tokens_ = refill(p_tokens_, pir_, elapsed, scaled(pbs_));

    const std::int64_t need = scaled(pkt_bytes);
    if (p_tokens_ < need) return Color::Red;
    p_tokens_ -= need;
    if (c_tokens_ < need) return Color::Yellow;
    c_tokens_ -= need;
    return Color::Green;
  }

  BitsPerSecond cir() const { return cir_; }
  BitsPerSecond pir() const { return pir_; }
  std::int64_t cbs() const { return cbs_; }
  std::int64_t pbs() const { return pbs_; }
  SimTime last_update() const { return last_update_; }
  double c_tokens_bytes() const { return static_cast<double>(c_tokens_) / (8.0 * kPicosPerSecond); }
  double p_tokens_bytes() const { return static_cast<double>(p_tokens_) / (8.0 * kPicosPerSecond); }

 private:
  static std::int64_t scaled(std::int64_t bytes) { return bytes * 8 * kPicosPerSecond; }

  static std::int64_t refill(std::int64_t tokens, BitsPerSecond rate, SimTime elapsed,
                             std::int64_t cap) {
    const __int128 filled = static_cast<__int128>(tokens) + static_cast<__int128>(rate) * elapsed;
    return static_cast<std::int64_t>(std::min<__int128>(filled, cap));
  }

  BitsPerSecond cir_;
  BitsPerSecond pir_;
  std::int64_t cbs_;
  std::int64_t pbs_;
  std::int64_t c_tokens_ = 0;
  std::int64_t p_tokens_ = 0;
  SimTime last_update_ = 0;
};

inline TrTcmMeter single_rate_meter(BitsPerSecond rate, std::int64_t burst = kDefaultMeterBurst) {
  if (rate <= 0) throw std::invalid_argument("single_rate_meter: rate must be positive");
  return TrTcmMeter(rate, rate, burst, burst);
}

}  // namespace trimsim
