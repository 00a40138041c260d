#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trimsim/packet.hpp"
#include "trimsim/sim_core.hpp"

namespace trimsim {

struct HostConfig {
  BitsPerSecond link_rate = gbps(100);
  // One-way propagation delay of a host <-> switch link.
  SimTime link_latency = nanoseconds(500);
  // PULLs travel an uncongested reverse path with this fixed delay.
  SimTime reverse_latency = microseconds(1);
  std::int32_t mtu = kDefaultMtu;
  std::int32_t control_size = kControlSize;

  void validate() const {
    if (link_rate <= 0) throw std::invalid_argument("HostConfig: link_rate must be positive");
    if (link_latency < 0 || reverse_latency < 0) {
      throw std::invalid_argument("HostConfig: negative latency");
    }
  }
};

inline constexpr std::int64_t kUnboundedFlow = std::numeric_limits<std::int64_t>::max() / 4;

// NDP sender: an unsolicited initial window at line rate, then one packet per
// PULL, retransmissions first.
class Sender {
 public:
  using Emit = std::function<void(Packet)>;

  Sender(Simulator& sim, Flow flow, HostConfig host, std::int32_t ingress_pipe,
         std::int32_t egress_port, Emit to_switch)
      : sim_(sim),
        flow_(flow),
        host_(host),
        link_(host.link_rate, host.link_latency),
        ingress_pipe_(ingress_pipe),
        egress_port_(egress_port),
        to_switch_(std::move(to_switch)) {
    flow_.validate();
  }

  void start() {
    if (started_) throw std::logic_error("Sender: flow already started");
    started_ = true;
    for (std::int64_t i = 0; i < flow_.initial_window; ++i) send_next();
  }

  void on_pull(const Packet& pull) {
    if (stopped_) return;
    if (pull.seqno >= 0) rtx_queue_.push_back(pull.seqno);
    send_next();
  }

  // No transmissions after this point; packets already on the wire proceed.
  void stop() { stopped_ = true; }

  const Flow& flow() const { return flow_; }
  std::int64_t sent_data() const { return sent_data_; }
  std::int64_t rtx_count() const { return rtx_count_; }
  std::int64_t next_seq() const { return next_seq_; }
  SimTime last_departure() const { return link_.busy_until; }

 private:
  void send_next() {
    std::int64_t seq;
    bool rtx = false;
    if (!rtx_queue_.empty()) {
      seq = rtx_queue_.front();
      rtx_queue_.pop_front();
      rtx = true;
    } else if (next_seq_ < flow_.total_packets) {
      seq = next_seq_++;
    } else {
      return;
    }
    Packet p;
    p.flow_id = flow_.flow_id;
    p.seqno = seq;
    p.size = host_.mtu;
    p.kind = PacketKind::Data;
    p.src_host = flow_.src_host;
    p.dst_host = flow_.dst_host;
    p.ingress_pipe = ingress_pipe_;
    p.egress_port = egress_port_;
    p.retransmission = rtx;
    p.send_time = std::max(sim_.now(), link_.busy_until);
    const SimTime arrive = link_.serialize(p.size, sim_.now()) + link_.latency;
    ++sent_data_;
    if (rtx) ++rtx_count_;
    sim_.schedule_at(arrive, [this, p]() { to_switch_(p); });
  }

  Simulator& sim_;
  Flow flow_;
  HostConfig host_;
  Link link_;
  std::int32_t ingress_pipe_;
  std::int32_t egress_port_;
  Emit to_switch_;
  std::deque<std::int64_t> rtx_queue_;
  std::int64_t next_seq_ = 0;
  std::int64_t sent_data_ = 0;
  std::int64_t rtx_count_ = 0;
  bool started_ = false;
  bool stopped_ = false;
};

// All receivers behind one switch output port. They share a single pull
// pacer that emits one PULL per MTU serialization time, round-robin across
// flows holding credits.
class ReceiverPort {
 public:
  using EmitPull = std::function<void(Packet)>;

  struct FlowState {
    std::int64_t total_packets = 0;
    std::vector<bool> received;
    std::int64_t unique_packets = 0;
    std::int64_t bytes_in_window = 0;
    std::int64_t headers = 0;
    std::int64_t duplicates = 0;
    std::int64_t credits = 0;
    std::deque<std::int64_t> nacks;
    SimTime first_arrival = -1;
    SimTime completion = -1;
  };

  ReceiverPort(Simulator& sim, std::int32_t port, SimTime pull_interval, SimTime window_end,
               EmitPull emit)
      : sim_(sim),
        port_(port),
        pull_interval_(pull_interval),
        window_end_(window_end),
        emit_(std::move(emit)) {
    if (pull_interval <= 0) throw std::invalid_argument("ReceiverPort: pull interval must be positive");
  }

  void add_flow(std::int32_t flow_id, std::int64_t total_packets) {
    flows_[flow_id].total_packets = total_packets;
  }

  void on_receive(const Packet& pkt) {
    if (pkt.kind != PacketKind::Data && pkt.kind != PacketKind::TrimmedHeader) {
      throw std::logic_error("ReceiverPort: unexpected packet kind");
    }
    auto it = flows_.find(pkt.flow_id);
    if (it == flows_.end()) throw std::logic_error("ReceiverPort: packet for unknown flow");
    FlowState& f = it->second;
    const SimTime now = sim_.now();
    if (f.first_arrival < 0) f.first_arrival = now;

    const auto seq = static_cast<std::size_t>(pkt.seqno);
    if (pkt.kind == PacketKind::Data) {
      if (seq >= f.received.size()) f.received.resize(seq + 1024, false);
      if (f.received[seq]) {
        ++f.duplicates;
        return;
      }
      f.received[seq] = true;
      ++f.unique_packets;
      if (now <= window_end_) f.bytes_in_window += pkt.size;
      if (f.unique_packets == f.total_packets) f.completion = now;
    } else {
      ++f.headers;
      f.nacks.push_back(pkt.seqno);
    }
    add_credit(pkt.flow_id, f);
  }

  void stop() { stopped_ = true; }

  std::int32_t port() const { return port_; }
  const std::unordered_map<std::int32_t, FlowState>& flows() const { return flows_; }
  std::int64_t pulls_sent() const { return pulls_sent_; }
  const std::vector<std::pair<SimTime, std::int32_t>>& pull_log() const { return pull_log_; }
  void keep_pull_log(bool on) { log_pulls_ = on; }

 private:
  void add_credit(std::int32_t flow_id, FlowState& f) {
    if (f.credits++ == 0) rr_.push_back(flow_id);
    if (!scheduled_) {
      scheduled_ = true;
      sim_.schedule_at(std::max(sim_.now(), next_allowed_), [this]() { pacer_tick(); });
    }
  }

  void pacer_tick() {
    scheduled_ = false;
    if (stopped_ || rr_.empty()) return;
    const SimTime now = sim_.now();
    const std::int32_t flow_id = rr_.front();
    rr_.pop_front();
    FlowState& f = flows_[flow_id];
    --f.credits;
    Packet pull;
    pull.flow_id = flow_id;
    pull.kind = PacketKind::Pull;
    pull.size = kControlSize;
    pull.egress_port = port_;
    pull.send_time = now;
    pull.seqno = -1;
    if (!f.nacks.empty()) {
      pull.seqno = f.nacks.front();
      f.nacks.pop_front();
    }
    if (f.credits > 0) rr_.push_back(flow_id);
    ++pulls_sent_;
    if (log_pulls_) pull_log_.emplace_back(now, flow_id);
    emit_(pull);
    next_allowed_ = now + pull_interval_;
    if (!rr_.empty()) {
      scheduled_ = true;
      sim_.schedule_at(next_allowed_, [this]() { pacer_tick(); });
    }
  }

  Simulator& sim_;
  std::int32_t port_;
  SimTime pull_interval_;
  SimTime window_end_;
  EmitPull emit_;
  std::unordered_map<std::int32_t, FlowState> flows_;
  std::deque<std::int32_t> rr_;
  SimTime next_allowed_ = 0;
  bool scheduled_ = false;
  bool stopped_ = false;
  std::int64_t pulls_sent_ = 0;
  bool log_pulls_ = false;
  std::vector<std::pair<SimTime, std::int32_t>> pull_log_;
};

}  // namespace trimsim
