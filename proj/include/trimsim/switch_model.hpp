#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trimsim/meter.hpp"
#include "trimsim/packet.hpp"
#include "trimsim/sim_core.hpp"
#include "trimsim/trim_policy.hpp"

namespace trimsim {

// IDEAL: output-queued trimming at enqueue.
// MIRROR_ON_DROP: header of an overflowing packet is mirrored through the
//   pipe's DoD port and recirculated into the header queue.
// TOFINO_DOD: fixed line-rate ingress meters, whole-packet deflect-on-drop.
// TOFINO_FULL: TOFINO_DOD plus the congestion-signal control loop.
// TOFINO2: ingress reads the egress queue length with a pipeline lag.
enum class SwitchVariant : std::uint8_t { Ideal, MirrorOnDrop, TofinoDod, TofinoFull, Tofino2 };

// ndp.p4 uses three single-rate meters; switch.p4 uses two trTCMs.
enum class MeterLayout : std::uint8_t { ThreeMeter, TwoMeter };

// BACKLOG: a drained DoD packet raises a signal only if it had to wait behind
//   another packet in the DoD queue.
// EVERY_DEFLECTION: every drained DoD packet raises a signal.
enum class SignalTrigger : std::uint8_t { Backlog, EveryDeflection };

enum class EgressScheduling : std::uint8_t { StrictPriority, WeightedBytes };

enum class EnqueueResult : std::uint8_t { Enqueued, Deflected, Trimmed, HeaderDropped };

// Order in which same-instant DATA arrivals at one egress port are admitted.
// ROTATE cycles the starting packet; RANDOM shuffles with a seeded generator.
enum class TieBreak : std::uint8_t { Rotate, Random };

constexpr std::string_view to_string(SwitchVariant v) {
  switch (v) {
    case SwitchVariant::Ideal: return "ideal";
    case SwitchVariant::MirrorOnDrop: return "mod";
    case SwitchVariant::TofinoDod: return "tofino_dod";
    case SwitchVariant::TofinoFull: return "tofino_full";
    case SwitchVariant::Tofino2: return "tofino2";
  }
  return "?";
}

constexpr std::string_view to_string(TieBreak t) { return t == TieBreak::Rotate ? "rotate" : "random"; }

constexpr bool is_tofino(SwitchVariant v) {
  return v == SwitchVariant::TofinoDod || v == SwitchVariant::TofinoFull ||
         v == SwitchVariant::Tofino2;
}

struct SwitchConfig {
  std::int32_t n_ports = 64;
  std::int32_t n_pipes = 4;
  std::int32_t ports_per_pipe = 16;
  BitsPerSecond line_rate = gbps(100);
  std::int32_t data_queue_cap = 10;
  std::int32_t header_queue_cap = 100;
  std::int32_t dod_queue_cap = 16384;
  SimTime recirc_latency = microseconds(1);
  std::int32_t signal_hops = 1;
  SwitchVariant variant = SwitchVariant::TofinoFull;
  EgressScheduling scheduling = EgressScheduling::StrictPriority;
  double header_data_weight = 10.0;
  std::int32_t mtu = kDefaultMtu;
  std::int32_t header_size = kDefaultHeaderSize;
  std::int64_t meter_burst = kDefaultMeterBurst;
  MeterLayout meter_layout = MeterLayout::ThreeMeter;
  SignalTrigger signal_trigger = SignalTrigger::Backlog;
  std::int32_t tofino2_lag_packets = 4;
  TieBreak tie_break = TieBreak::Rotate;
  std::uint64_t seed = 1;
  PolicyConfig policy{};

  SimTime signal_latency() const { return recirc_latency * signal_hops; }

  // Ingress pipeline processing slot: a pipe admits one packet per
  // MTU-time / ports_per_pipe.
  SimTime pipe_slot() const { return serialization_time(mtu, line_rate) / ports_per_pipe; }

  void validate() const {
    if (n_pipes < 1 || ports_per_pipe < 1 || n_pipes * ports_per_pipe != n_ports) {
      throw std::invalid_argument("SwitchConfig: n_pipes * ports_per_pipe must equal n_ports");
    }
    if (line_rate <= 0) throw std::invalid_argument("SwitchConfig: line_rate must be positive");
    if (data_queue_cap < 1) throw std::invalid_argument("SwitchConfig: data_queue_cap must be >= 1");
    if (header_queue_cap < 0 || dod_queue_cap < 1) {
      throw std::invalid_argument("SwitchConfig: invalid header or DoD queue capacity");
    }
    if (recirc_latency < 0) throw std::invalid_argument("SwitchConfig: negative recirc_latency");
    if (signal_hops != 1 && signal_hops != 2) {
      throw std::invalid_argument("SwitchConfig: signal_hops must be 1 or 2");
    }
    if (header_data_weight <= 0) {
      throw std::invalid_argument("SwitchConfig: header_data_weight must be positive");
    }
    if (mtu <= header_size || header_size <= 0) {
      throw std::invalid_argument("SwitchConfig: need 0 < header_size < mtu");
    }
    if (tofino2_lag_packets < 0) throw std::invalid_argument("SwitchConfig: negative tofino2 lag");
    policy.validate();
  }
};

struct SwitchCounters {
  std::int64_t ingress_trims = 0;
  std::int64_t dod_trims = 0;
  std::int64_t ideal_trims = 0;
  std::int64_t mod_trims = 0;
  std::int64_t dod_dropped = 0;
  std::int64_t header_dropped = 0;
  std::int64_t deflected = 0;
  std::int64_t signals = 0;
  std::int64_t tofino2_onset_slip = 0;
  std::vector<std::int64_t> max_dod_queue;
  std::vector<std::int64_t> max_data_queue;
  std::vector<std::int64_t> max_header_queue;

  std::int64_t total_trims() const { return ingress_trims + dod_trims + ideal_trims + mod_trims; }
  std::int64_t max_dod() const {
    return max_dod_queue.empty() ? 0 : *std::max_element(max_dod_queue.begin(), max_dod_queue.end());
  }
};

enum class QueueKind : std::uint8_t { Data, Dod };

struct ModeTransition {
  SimTime time = 0;
  std::int32_t pipe = 0;
  std::int32_t port = 0;
  TrimMode mode = TrimMode::Optimistic;
};

struct SwitchHooks {
  // Last bit of `pkt` left egress port pkt.egress_port.
  std::function<void(const Packet&, SimTime)> deliver;
  std::function<void(const CongestionSignal&)> signal_emitted;
  // Optional; called on every data/DoD queue length change.
  std::function<void(SimTime, QueueKind, std::int32_t, std::int64_t)> queue_sample;
};

// Reconstructs exact mode transitions of one (pipe, port) from signal times,
// independent of when packets happen to poll the registers.
class ModeTracer {
 public:
  void on_signal(SimTime now, SimTime t0, SimTime t1, PolicyVariant variant,
                 std::vector<ModeTransition>& out, std::int32_t pipe, std::int32_t port) {
    bool pessimistic_now = false;
    if (active_) {
      flush_expired(now, variant, out, pipe, port);
      pessimistic_now = now <= t0_;
    }
    if (!pessimistic_now) out.push_back({now, pipe, port, TrimMode::Pessimistic});
    active_ = true;
    t0_ = t0;
    t1_ = t1;
  }

  void finish(SimTime end, PolicyVariant variant, std::vector<ModeTransition>& out,
              std::int32_t pipe, std::int32_t port) {
    if (active_) flush_expired(end, variant, out, pipe, port);
    active_ = false;
  }

 private:
  void flush_expired(SimTime now, PolicyVariant variant, std::vector<ModeTransition>& out,
                     std::int32_t pipe, std::int32_t port) {
    if (variant == PolicyVariant::Full) {
      if (t0_ < now) out.push_back({t0_, pipe, port, TrimMode::Halftimistic});
      if (t1_ < now) {
        out.push_back({t1_, pipe, port, TrimMode::Optimistic});
        active_ = false;
      }
    } else if (t0_ < now) {
      out.push_back({t0_, pipe, port, TrimMode::Optimistic});
      active_ = false;
    }
  }

  bool active_ = false;
  SimTime t0_ = 0;
  SimTime t1_ = 0;
};

// Offered-load analysis of a set of line-rate senders for the meter + DoD
// design. mapping[i] is the egress port of the sender on ingress port i.
struct WorstCaseAnalysis {
  double offered_bps = 0;
  double ingress_forwarded_bps = 0;
  double egress_served_bps = 0;
  double deflected_bps = 0;
  double recirc_capacity_bps = 0;
  double oversubscription = 0;
  std::vector<double> per_pipe_deflected_bps;
  double max_pipe_oversubscription = 0;
};

inline WorstCaseAnalysis worst_case_check(const SwitchConfig& cfg,
                                          std::span<const std::int32_t> mapping) {
  cfg.validate();
  if (static_cast<std::int64_t>(mapping.size()) > cfg.n_ports) {
    throw std::invalid_argument("worst_case_check: more senders than ports");
  }
  const auto line = static_cast<double>(cfg.line_rate);
  const auto n_pipes = static_cast<std::size_t>(cfg.n_pipes);
  const auto n_ports = static_cast<std::size_t>(cfg.n_ports);

  // offered[pipe][port]
  std::vector<std::vector<double>> offered(n_pipes, std::vector<double>(n_ports, 0.0));
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto port = mapping[i];
    if (port < 0 || port >= cfg.n_ports) throw std::invalid_argument("worst_case_check: bad port");
    offered[i / static_cast<std::size_t>(cfg.ports_per_pipe)][static_cast<std::size_t>(port)] += line;
  }

  WorstCaseAnalysis a;
  a.per_pipe_deflected_bps.assign(n_pipes, 0.0);
  a.recirc_capacity_bps = line * static_cast<double>(n_pipes);
  for (std::size_t port = 0; port < n_ports; ++port) {
    double forwarded = 0;
    for (std::size_t pipe = 0; pipe < n_pipes; ++pipe) {
      a.offered_bps += offered[pipe][port];
      forwarded += std::min(offered[pipe][port], line);
    }
    a.ingress_forwarded_bps += forwarded;
    const double served = std::min(forwarded, line);
    a.egress_served_bps += served;
    const double excess = forwarded - served;
    a.deflected_bps += excess;
    if (forwarded > 0) {
      for (std::size_t pipe = 0; pipe < n_pipes; ++pipe) {
        a.per_pipe_deflected_bps[pipe] += excess * std::min(offered[pipe][port], line) / forwarded;
      }
    }
  }
  a.oversubscription = a.deflected_bps / a.recirc_capacity_bps;
  for (double d : a.per_pipe_deflected_bps) {
    a.max_pipe_oversubscription = std::max(a.max_pipe_oversubscription, d / line);
  }
  return a;
}

// Byte-based deficit round robin between the header queue (index 0) and the
// data queue (index 1).
class HeaderDataDrr {
 public:
  HeaderDataDrr(std::int64_t header_quantum, std::int64_t data_quantum)
      : quantum_{header_quantum, data_quantum} {}

  // Returns 0 or 1 for the queue to serve next; -1 if both are empty.
  template <typename FrontSize>
  int select(bool header_empty, bool data_empty, FrontSize&& front_size) {
    if (header_empty && data_empty) return -1;
    const bool empty[2] = {header_empty, data_empty};
    for (;;) {
      if (empty[current_]) {
        deficit_[current_] = 0;
        current_ ^= 1;
        fresh_ = true;
        continue;
      }
      if (fresh_) {
        deficit_[current_] += quantum_[current_];
        fresh_ = false;
      }
      const std::int64_t size = front_size(current_);
      if (size <= deficit_[current_]) {
        deficit_[current_] -= size;
        return current_;
      }
      current_ ^= 1;
      fresh_ = true;
    }
  }

 private:
  std::int64_t quantum_[2];
  std::int64_t deficit_[2] = {0, 0};
  int current_ = 0;
  bool fresh_ = true;
};

class Switch {
 public:
  Switch(Simulator& sim, SwitchConfig cfg, SwitchHooks hooks)
      : sim_(sim), cfg_(std::move(cfg)), hooks_(std::move(hooks)) {
    cfg_.validate();
    if (cfg_.variant == SwitchVariant::TofinoDod) cfg_.policy.variant = PolicyVariant::None;
    const auto n_ports = static_cast<std::size_t>(cfg_.n_ports);
    const auto n_pipes = static_cast<std::size_t>(cfg_.n_pipes);

    ports_.reserve(n_ports);
    const auto header_quantum = static_cast<std::int64_t>(cfg_.header_data_weight * cfg_.mtu);
    for (std::size_t i = 0; i < n_ports; ++i) {
      ports_.emplace_back(Link(cfg_.line_rate, 0), HeaderDataDrr(header_quantum, cfg_.mtu));
    }
    dods_.resize(n_pipes);
    for (auto& d : dods_) d.link = Link(cfg_.line_rate, 0);

    const BitsPerSecond line = cfg_.line_rate;
    pipes_.resize(n_pipes);
    for (auto& p : pipes_) {
      p.state.resize(n_ports);
      p.tracer.resize(n_ports);
      p.first_trim.assign(n_ports, std::numeric_limits<SimTime>::max());
      for (std::size_t port = 0; port < n_ports; ++port) {
        if (cfg_.meter_layout == MeterLayout::ThreeMeter) {
          p.opti.push_back(single_rate_meter(line, cfg_.meter_burst));
          p.half.push_back(single_rate_meter(line / 2, cfg_.meter_burst));
        } else {
          p.opti.push_back(TrTcmMeter(line / 2, line, cfg_.meter_burst, cfg_.meter_burst));
        }
        p.pessi.push_back(single_rate_meter(line / 4, cfg_.meter_burst));
      }
    }
    counters_.max_dod_queue.assign(n_pipes, 0);
    counters_.max_data_queue.assign(n_ports, 0);
    counters_.max_header_queue.assign(n_ports, 0);
  }

  Switch(const Switch&) = delete;
  Switch& operator=(const Switch&) = delete;

  const SwitchConfig& config() const { return cfg_; }
  const SwitchCounters& counters() const { return counters_; }
  const std::vector<ModeTransition>& mode_transitions() const { return transitions_; }
  std::int32_t pipe_of_port(std::int32_t port) const { return port / cfg_.ports_per_pipe; }

  std::int64_t data_occupancy(std::int32_t port) const {
    const auto& p = ports_[static_cast<std::size_t>(port)];
    return static_cast<std::int64_t>(p.data_q.size()) + (p.busy && p.serving_data ? 1 : 0);
  }
  std::int64_t header_occupancy(std::int32_t port) const {
    const auto& p = ports_[static_cast<std::size_t>(port)];
    return static_cast<std::int64_t>(p.header_q.size()) + (p.busy && !p.serving_data ? 1 : 0);
  }
  std::int64_t dod_occupancy(std::int32_t pipe) const {
    return static_cast<std::int64_t>(dods_[static_cast<std::size_t>(pipe)].q.size());
  }
  TrimMode port_mode(std::int32_t pipe, std::int32_t port, SimTime now) {
    return pipe_state(pipe, port).mode(now, cfg_.policy);
  }
  PortTrimState& pipe_state(std::int32_t pipe, std::int32_t port) {
    return pipes_[static_cast<std::size_t>(pipe)].state[static_cast<std::size_t>(port)];
  }

  // A packet fully received on an ingress port of pkt.ingress_pipe.
  void ingress_receive(Packet pkt) {
    const SimTime now = sim_.now();
    pkt.ingress_time = now;
    check_port(pkt.egress_port);
    switch (cfg_.variant) {
      case SwitchVariant::Ideal:
      case SwitchVariant::MirrorOnDrop:
        tm_arrive(std::move(pkt));
        return;
      case SwitchVariant::TofinoDod:
      case SwitchVariant::TofinoFull:
        if (pkt.kind == PacketKind::Data) {
          meter_ingress(std::move(pkt), now);
        } else {
          tm_arrive(std::move(pkt));
        }
        return;
      case SwitchVariant::Tofino2:
        tofino2_ingress(std::move(pkt), now);
        return;
    }
  }

  // Admission to an egress port. Exposed for direct tests.
  EnqueueResult enqueue_egress(Packet pkt) {
    const SimTime now = sim_.now();
    const auto port_idx = pkt.egress_port;
    auto& port = ports_[static_cast<std::size_t>(port_idx)];

    if (pkt.kind != PacketKind::Data) return enqueue_header(std::move(pkt));

    if (data_occupancy(port_idx) < cfg_.data_queue_cap) {
      port.data_q.push_back(std::move(pkt));
      note_data_queue(port_idx, now);
      try_transmit(port_idx);
      return EnqueueResult::Enqueued;
    }

    switch (cfg_.variant) {
      case SwitchVariant::Ideal: {
        ++counters_.ideal_trims;
        auto r = enqueue_header(trim(pkt, TrimOrigin::Ideal, cfg_.header_size));
        return r == EnqueueResult::HeaderDropped ? r : EnqueueResult::Trimmed;
      }
      case SwitchVariant::MirrorOnDrop: {
        ++counters_.mod_trims;
        dod_arrive(pkt.ingress_pipe, trim(pkt, TrimOrigin::Mod, cfg_.header_size));
        return EnqueueResult::Trimmed;
      }
      default:
        ++counters_.deflected;
        if (cfg_.variant == SwitchVariant::Tofino2 &&
            pkt.ingress_time < pipes_[static_cast<std::size_t>(pkt.ingress_pipe)]
                                   .first_trim[static_cast<std::size_t>(port_idx)]) {
          ++counters_.tofino2_onset_slip;
        }
        dod_arrive(pkt.ingress_pipe, std::move(pkt));
        return EnqueueResult::Deflected;
    }
  }

  // Delivers a congestion signal for `port` to ingress pipeline `pipe`.
  void apply_signal(std::int32_t pipe, std::int32_t port) {
    const SimTime now = sim_.now();
    auto& pl = pipes_[static_cast<std::size_t>(pipe)];
    auto& st = pl.state[static_cast<std::size_t>(port)];
    const auto variant = cfg_.policy.variant;
    if (variant == PolicyVariant::None) return;
    if (variant == PolicyVariant::TrimN) {
      if (st.pending_trims == 0) transitions_.push_back({now, pipe, port, TrimMode::Pessimistic});
      st.on_congestion_signal(now, cfg_.policy);
      return;
    }
    st.on_congestion_signal(now, cfg_.policy);
    pl.tracer[static_cast<std::size_t>(port)].on_signal(now, st.t0_reg, st.t1_reg, variant,
                                                        transitions_, pipe, port);
  }

  // Closes open mode episodes at `end` and sorts the transition log.
  void finish(SimTime end) {
    for (std::size_t pipe = 0; pipe < pipes_.size(); ++pipe) {
      for (std::size_t port = 0; port < pipes_[pipe].tracer.size(); ++port) {
        pipes_[pipe].tracer[port].finish(end, cfg_.policy.variant, transitions_,
                                         static_cast<std::int32_t>(pipe),
                                         static_cast<std::int32_t>(port));
      }
    }
    std::stable_sort(transitions_.begin(), transitions_.end(),
                     [](const ModeTransition& a, const ModeTransition& b) {
                       if (a.time != b.time) return a.time < b.time;
                       if (a.pipe != b.pipe) return a.pipe < b.pipe;
                       return a.port < b.port;
                     });
  }

 private:
  struct EgressPort {
    EgressPort(Link l, HeaderDataDrr d) : link(l), drr(d) {}
    std::deque<Packet> data_q;
    std::deque<Packet> header_q;
    bool busy = false;
    bool serving_data = false;
    Link link;
    HeaderDataDrr drr;
    std::vector<Packet> arrivals;
    bool flush_scheduled = false;
    std::uint64_t rr = 0;
  };

  struct DodEntry {
    Packet pkt;
    bool waited = false;
  };

  struct DodPort {
    std::deque<DodEntry> q;  // front is on the wire while busy
    bool busy = false;
    Link link;
  };

  struct Pipeline {
    std::vector<TrTcmMeter> opti;
    std::vector<TrTcmMeter> half;
    std::vector<TrTcmMeter> pessi;
    std::vector<PortTrimState> state;
    std::vector<ModeTracer> tracer;
    std::vector<SimTime> first_trim;
    SimTime next_slot = 0;
  };

  void check_port(std::int32_t port) const {
    if (port < 0 || port >= cfg_.n_ports) {
      throw std::out_of_range("Switch: egress port " + std::to_string(port) + " out of range");
    }
  }

  void meter_ingress(Packet pkt, SimTime now) {
    auto& pl = pipes_[static_cast<std::size_t>(pkt.ingress_pipe)];
    const auto port = static_cast<std::size_t>(pkt.egress_port);
    auto& st = pl.state[port];
    const TrimMode mode = st.mode(now, cfg_.policy);

    TrimVerdict verdict;
    if (cfg_.meter_layout == MeterLayout::ThreeMeter) {
      const Color o = pl.opti[port].execute(now, pkt.size);
      const Color h = pl.half[port].execute(now, pkt.size);
      const Color p = pl.pessi[port].execute(now, pkt.size);
      verdict = decide_three_meter(mode, o, h, p);
    } else {
      const Color o = pl.opti[port].execute(now, pkt.size);
      const Color p = pl.pessi[port].execute(now, pkt.size);
      verdict = decide_two_meter(mode, o, p);
    }
    if (cfg_.policy.variant == PolicyVariant::TrimAll && mode == TrimMode::Pessimistic) {
      verdict = TrimVerdict::Trim;
    }

    if (verdict == TrimVerdict::Trim) {
      ++counters_.ingress_trims;
      const bool was_pending = st.pending_trims > 0;
      st.on_trimmed(cfg_.policy);
      if (was_pending && st.pending_trims == 0) {
        transitions_.push_back({now, pkt.ingress_pipe, pkt.egress_port, TrimMode::Optimistic});
      }
      tm_arrive(trim(pkt, TrimOrigin::Ingress, cfg_.header_size));
    } else {
      tm_arrive(std::move(pkt));
    }
  }

  void tofino2_ingress(Packet pkt, SimTime now) {
    auto& pl = pipes_[static_cast<std::size_t>(pkt.ingress_pipe)];
    const SimTime slot = cfg_.pipe_slot();
    const SimTime decide_at = std::max(now, pl.next_slot);
    pl.next_slot = decide_at + slot;
    sim_.schedule_at(decide_at, [this, pkt, slot]() mutable {
      const SimTime t = sim_.now();
      pkt.ingress_time = t;
      const SimTime lag = slot * cfg_.tofino2_lag_packets;
      if (pkt.kind == PacketKind::Data && data_occupancy(pkt.egress_port) >= cfg_.data_queue_cap) {
        ++counters_.ingress_trims;
        auto& first = pipes_[static_cast<std::size_t>(pkt.ingress_pipe)]
                          .first_trim[static_cast<std::size_t>(pkt.egress_port)];
        first = std::min(first, t);
        pkt = trim(pkt, TrimOrigin::Ingress, cfg_.header_size);
      }
      sim_.schedule_in(lag, [this, pkt]() mutable { tm_arrive(std::move(pkt)); });
    });
  }

  // Traffic-manager arrival. Same-instant arrivals for a port are admitted
  // in an order that rotates across calls, so no ingress port always wins
  // the last free buffer slot.
  void tm_arrive(Packet pkt) {
    auto& port = ports_[static_cast<std::size_t>(pkt.egress_port)];
    const auto idx = pkt.egress_port;
    port.arrivals.push_back(std::move(pkt));
    if (!port.flush_scheduled) {
      port.flush_scheduled = true;
      sim_.schedule_in(0, [this, idx]() { flush_arrivals(idx); });
    }
  }

  void flush_arrivals(std::int32_t idx) {
    auto& port = ports_[static_cast<std::size_t>(idx)];
    port.flush_scheduled = false;
    std::vector<Packet> batch;
    batch.swap(port.arrivals);
    if (batch.size() > 1) {
      std::stable_partition(batch.begin(), batch.end(),
                            [](const Packet& p) { return p.kind != PacketKind::Data; });
      const auto first_data = std::find_if(batch.begin(), batch.end(), [](const Packet& p) {
        return p.kind == PacketKind::Data;
      });
      const auto n_data = static_cast<std::uint64_t>(std::distance(first_data, batch.end()));
      if (n_data > 1 && cfg_.tie_break == TieBreak::Random) {
        std::shuffle(first_data, batch.end(), rng_);
      } else if (n_data > 1) {
        std::rotate(first_data, first_data + static_cast<std::ptrdiff_t>(port.rr % n_data),
                    batch.end());
        ++port.rr;
      }
    }
    for (auto& p : batch) enqueue_egress(std::move(p));
  }

  EnqueueResult enqueue_header(Packet pkt) {
    const auto idx = pkt.egress_port;
    auto& port = ports_[static_cast<std::size_t>(idx)];
    if (header_occupancy(idx) >= cfg_.header_queue_cap) {
      ++counters_.header_dropped;
      return EnqueueResult::HeaderDropped;
    }
    port.header_q.push_back(std::move(pkt));
    auto& mx = counters_.max_header_queue[static_cast<std::size_t>(idx)];
    mx = std::max(mx, header_occupancy(idx));
    try_transmit(idx);
    return EnqueueResult::Enqueued;
  }

  void try_transmit(std::int32_t idx) {
    auto& port = ports_[static_cast<std::size_t>(idx)];
    if (port.busy) return;
    int which = -1;
    if (cfg_.scheduling == EgressScheduling::StrictPriority) {
      if (!port.header_q.empty()) which = 0;
      else if (!port.data_q.empty()) which = 1;
    } else {
      which = port.drr.select(port.header_q.empty(), port.data_q.empty(), [&port](int q) {
        return static_cast<std::int64_t>(q == 0 ? port.header_q.front().size
                                                : port.data_q.front().size);
      });
    }
    if (which < 0) return;

    auto& q = which == 0 ? port.header_q : port.data_q;
    Packet pkt = std::move(q.front());
    q.pop_front();
    port.busy = true;
    port.serving_data = which == 1;
    const SimTime now = sim_.now();
    const SimTime done = port.link.serialize(pkt.size, now);
    sim_.schedule_at(done, [this, idx, pkt = std::move(pkt)]() {
      auto& p = ports_[static_cast<std::size_t>(idx)];
      const bool was_data = p.serving_data;
      p.busy = false;
      if (was_data) note_data_queue(idx, sim_.now());
      if (hooks_.deliver) hooks_.deliver(pkt, sim_.now());
      try_transmit(idx);
    });
  }

  void note_data_queue(std::int32_t idx, SimTime now) {
    const auto occ = data_occupancy(idx);
    auto& mx = counters_.max_data_queue[static_cast<std::size_t>(idx)];
    mx = std::max(mx, occ);
    if (hooks_.queue_sample) hooks_.queue_sample(now, QueueKind::Data, idx, occ);
  }

  void dod_arrive(std::int32_t pipe, Packet pkt) {
    auto& dod = dods_[static_cast<std::size_t>(pipe)];
    if (static_cast<std::int64_t>(dod.q.size()) >= cfg_.dod_queue_cap) {
      ++counters_.dod_dropped;
      return;
    }
    dod.q.push_back(DodEntry{std::move(pkt), dod.busy});
    const auto occ = static_cast<std::int64_t>(dod.q.size());
    auto& mx = counters_.max_dod_queue[static_cast<std::size_t>(pipe)];
    mx = std::max(mx, occ);
    if (hooks_.queue_sample) hooks_.queue_sample(sim_.now(), QueueKind::Dod, pipe, occ);
    if (!dod.busy) dod_start(pipe);
  }

  void dod_start(std::int32_t pipe) {
    auto& dod = dods_[static_cast<std::size_t>(pipe)];
    dod.busy = true;
    const SimTime done = dod.link.serialize(dod.q.front().pkt.size, sim_.now());
    sim_.schedule_at(done, [this, pipe]() { dod_drain(pipe); });
  }

  // The packet at the head of the DoD port finished serializing.
  void dod_drain(std::int32_t pipe) {
    auto& dod = dods_[static_cast<std::size_t>(pipe)];
    DodEntry entry = std::move(dod.q.front());
    dod.q.pop_front();
    dod.busy = false;
    const SimTime now = sim_.now();
    if (hooks_.queue_sample) {
      hooks_.queue_sample(now, QueueKind::Dod, pipe, static_cast<std::int64_t>(dod.q.size()));
    }

    Packet header;
    if (entry.pkt.kind == PacketKind::Data) {
      ++counters_.dod_trims;
      header = trim(entry.pkt, TrimOrigin::Dod, cfg_.header_size);
    } else {
      header = std::move(entry.pkt);
    }
    const auto port = header.egress_port;
    sim_.schedule_in(cfg_.recirc_latency, [this, header]() mutable { enqueue_header(std::move(header)); });

    if (cfg_.variant == SwitchVariant::TofinoFull &&
        (cfg_.signal_trigger == SignalTrigger::EveryDeflection || entry.waited)) {
      emit_signal(CongestionSignal{port, pipe, now});
    }
    if (!dod.q.empty()) dod_start(pipe);
  }

  void emit_signal(const CongestionSignal& s) {
    ++counters_.signals;
    if (hooks_.signal_emitted) hooks_.signal_emitted(s);
    for (const auto target : fanout_targets(s, cfg_.policy, cfg_.n_pipes)) {
      sim_.schedule_in(cfg_.signal_latency(),
                       [this, target, port = s.egress_port]() { apply_signal(target, port); });
    }
  }

  Simulator& sim_;
  SwitchConfig cfg_;
  SwitchHooks hooks_;
  std::vector<EgressPort> ports_;
  std::vector<DodPort> dods_;
  std::vector<Pipeline> pipes_;
  SwitchCounters counters_;
  std::vector<ModeTransition> transitions_;
  std::mt19937_64 rng_{cfg_.seed};
};

}  // namespace trimsim
