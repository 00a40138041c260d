#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "trimsim/meter.hpp"
#include "trimsim/packet.hpp"
#include "trimsim/sim_core.hpp"

namespace trimsim {

enum class TrimMode : std::uint8_t { Optimistic, Halftimistic, Pessimistic };

// FULL: pessimistic for T0, halftimistic until T1.
// PESSI_ONLY: pessimistic for T0, then straight back to optimistic.
// TRIM_ALL: trim every packet for T0, then optimistic.
// TRIM_N: each signal adds trim_n pending trims served in pessimistic mode.
// NONE: meters only, signals ignored.
enum class PolicyVariant : std::uint8_t { Full, PessiOnly, TrimAll, TrimN, None };

enum class SignalFanout : std::uint8_t { AllPipes, OriginPipe };

enum class TrimVerdict : std::uint8_t { Forward, Trim };

constexpr std::string_view to_string(TrimMode m) {
  switch (m) {
    case TrimMode::Optimistic: return "OPTIMISTIC";
    case TrimMode::Halftimistic: return "HALFTIMISTIC";
    case TrimMode::Pessimistic: return "PESSIMISTIC";
  }
  return "?";
}

constexpr std::string_view to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::Full: return "full";
    case PolicyVariant::PessiOnly: return "pessi_only";
    case PolicyVariant::TrimAll: return "trim_all";
    case PolicyVariant::TrimN: return "trim_n";
    case PolicyVariant::None: return "none";
  }
  return "?";
}

constexpr std::string_view to_string(SignalFanout f) {
  return f == SignalFanout::AllPipes ? "all_pipes" : "origin_pipe";
}

struct PolicyConfig {
  SimTime t0 = microseconds(6);
  SimTime t1 = microseconds(24);
  PolicyVariant variant = PolicyVariant::Full;
  SignalFanout signal_fanout = SignalFanout::AllPipes;
  std::int32_t trim_n = 12;

  void validate() const {
    if (t0 < 0 || t1 < 0) throw std::invalid_argument("PolicyConfig: negative hold time");
    if (t0 > t1) throw std::invalid_argument("PolicyConfig: T0 must not exceed T1");
    if (variant == PolicyVariant::TrimN && trim_n < 1) {
      throw std::invalid_argument("PolicyConfig: trim_n must be >= 1");
    }
  }
};

// Per (pipeline, egress port) control-loop registers.
struct PortTrimState {
  SimTime t0_reg = 0;
  SimTime t1_reg = 0;
  std::int64_t pending_trims = 0;

  void on_congestion_signal(SimTime now, const PolicyConfig& cfg) {
    switch (cfg.variant) {
      case PolicyVariant::None:
        return;
      case PolicyVariant::TrimN:
        pending_trims += cfg.trim_n;
        return;
      default:
        t0_reg = now + cfg.t0;
        t1_reg = now + cfg.t1;
        return;
    }
  }

  // Register-driven mode per the ingress pseudo-code; expired registers are
  // cleared. A zero register is idle.
  TrimMode classify(SimTime now) {
    if (t0_reg != 0 && now <= t0_reg) return TrimMode::Pessimistic;
    if (t1_reg != 0 && now <= t1_reg) return TrimMode::Halftimistic;
    t0_reg = 0;
    t1_reg = 0;
    return TrimMode::Optimistic;
  }

  // Mode under the configured variant.
  TrimMode mode(SimTime now, const PolicyConfig& cfg) {
    switch (cfg.variant) {
      case PolicyVariant::Full:
        return classify(now);
      case PolicyVariant::PessiOnly:
      case PolicyVariant::TrimAll:
        if (t0_reg != 0 && now <= t0_reg) return TrimMode::Pessimistic;
        t0_reg = 0;
        t1_reg = 0;
        return TrimMode::Optimistic;
      case PolicyVariant::TrimN:
        return pending_trims > 0 ? TrimMode::Pessimistic : TrimMode::Optimistic;
      case PolicyVariant::None:
        return TrimMode::Optimistic;
    }
    return TrimMode::Optimistic;
  }

  void on_trimmed(const PolicyConfig& cfg) {
    if (cfg.variant == PolicyVariant::TrimN && pending_trims > 0) --pending_trims;
  }
};

// ndp.p4 form: one single-rate meter per mode, trim on RED.
constexpr TrimVerdict decide_three_meter(TrimMode mode, Color opti, Color half, Color pessi) {
  Color c = opti;
  if (mode == TrimMode::Pessimistic) c = pessi;
  else if (mode == TrimMode::Halftimistic) c = half;
  return c == Color::Red ? TrimVerdict::Trim : TrimVerdict::Forward;
}

// switch.p4 form: opti has pir=line, cir=line/2; pessi has cir=pir=line/4.
constexpr TrimVerdict decide_two_meter(TrimMode mode, Color opti, Color pessi) {
  switch (mode) {
    case TrimMode::Pessimistic:
      return pessi != Color::Green ? TrimVerdict::Trim : TrimVerdict::Forward;
    case TrimMode::Halftimistic:
      return opti != Color::Green ? TrimVerdict::Trim : TrimVerdict::Forward;
    case TrimMode::Optimistic:
      return opti == Color::Red ? TrimVerdict::Trim : TrimVerdict::Forward;
  }
  return TrimVerdict::Forward;
}

constexpr BitsPerSecond mode_target_rate(TrimMode mode, BitsPerSecond line_rate) {
  switch (mode) {
    case TrimMode::Optimistic: return line_rate;
    case TrimMode::Halftimistic: return line_rate / 2;
    case TrimMode::Pessimistic: return line_rate / 4;
  }
  return line_rate;
}

inline std::vector<std::int32_t> fanout_targets(const CongestionSignal& signal,
                                                const PolicyConfig& cfg, std::int32_t n_pipes) {
  if (cfg.signal_fanout == SignalFanout::OriginPipe) return {signal.origin_pipe};
  std::vector<std::int32_t> pipes(static_cast<std::size_t>(n_pipes));
  for (std::int32_t i = 0; i < n_pipes; ++i) pipes[static_cast<std::size_t>(i)] = i;
  return pipes;
}

}  // namespace trimsim
