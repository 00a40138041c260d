#pragma once

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string_view>

#include "trimsim/sim_core.hpp"

namespace trimsim {

inline constexpr std::int32_t kDefaultMtu = 1500;
inline constexpr std::int32_t kDefaultHeaderSize = 64;
inline constexpr std::int32_t kControlSize = 64;

enum class PacketKind : std::uint8_t { Data, TrimmedHeader, Pull, Update, Notify };

// Where a trimmed header was produced.
enum class TrimOrigin : std::uint8_t { None, Ingress, Dod, Ideal, Mod };

constexpr std::string_view to_string(PacketKind k) {
  switch (k) {
    case PacketKind::Data: return "DATA";
    case PacketKind::TrimmedHeader: return "TRIMMED_HEADER";
    case PacketKind::Pull: return "PULL";
    case PacketKind::Update: return "UPDATE";
    case PacketKind::Notify: return "NOTIFY";
  }
  return "?";
}

constexpr std::string_view to_string(TrimOrigin o) {
  switch (o) {
    case TrimOrigin::None: return "NONE";
    case TrimOrigin::Ingress: return "INGRESS";
    case TrimOrigin::Dod: return "DOD";
    case TrimOrigin::Ideal: return "IDEAL";
    case TrimOrigin::Mod: return "MOD";
  }
  return "?";
}

struct Packet {
  std::int32_t flow_id = 0;
  // For PULL packets a non-negative seqno names a sequence to retransmit.
  std::int64_t seqno = 0;
  std::int32_t size = kDefaultMtu;
  PacketKind kind = PacketKind::Data;
  std::int32_t src_host = 0;
  std::int32_t dst_host = 0;
  std::int32_t ingress_pipe = 0;
  std::int32_t egress_port = 0;
  TrimOrigin trim_origin = TrimOrigin::None;
  SimTime send_time = 0;
  SimTime ingress_time = 0;
  bool retransmission = false;
};

// Cuts the payload, keeping every identity field. Only DATA can be trimmed.
inline Packet trim(const Packet& p, TrimOrigin origin, std::int32_t header_size = kDefaultHeaderSize) {
  if (p.kind != PacketKind::Data) {
    throw std::logic_error("trim: only DATA packets can be trimmed");
  }
  if (origin == TrimOrigin::None) {
    throw std::logic_error("trim: a trimmed header needs an origin");
  }
  Packet h = p;
  h.kind = PacketKind::TrimmedHeader;
  h.size = header_size;
  h.trim_origin = origin;
  return h;
}

struct Flow {
  std::int32_t flow_id = 0;
  std::int32_t src_host = 0;
  std::int32_t dst_host = 0;
  std::int64_t total_packets = 0;
  std::int64_t initial_window = 1;

  void validate() const {
    if (initial_window < 1) throw std::invalid_argument("Flow: initial_window must be >= 1");
    if (total_packets < initial_window) {
      throw std::invalid_argument("Flow: total_packets must be >= initial_window");
    }
  }
};

// Congestion notification raised when a deflected packet drains from a DoD
// port. UPDATE and NOTIFY hops are folded into the delivery delay.
struct CongestionSignal {
  std::int32_t egress_port = 0;
  std::int32_t origin_pipe = 0;
  SimTime emit_time = 0;
};

// One row of the delivered-packet trace.
struct TraceRecord {
  SimTime time = 0;
  std::int32_t flow_id = 0;
  std::int64_t seqno = 0;
  PacketKind kind = PacketKind::Data;
  TrimOrigin trim_origin = TrimOrigin::None;
  std::int32_t egress_port = 0;
};

// Nanoseconds with picosecond resolution, e.g. "5.120".
inline void write_ns(std::ostream& os, SimTime t) {
  const SimTime whole = t / kPicosPerNano;
  const SimTime frac = t % kPicosPerNano;
  os << whole << '.' << std::setw(3) << std::setfill('0') << frac << std::setfill(' ');
}

inline void write_trace_header(std::ostream& os) {
  os << "time_ns,flow_id,seqno,kind,trim_origin,egress_port\n";
}

inline void write_trace_row(std::ostream& os, const TraceRecord& r) {
  write_ns(os, r.time);
  os << ',' << r.flow_id << ',' << r.seqno << ',' << to_string(r.kind) << ','
     << to_string(r.trim_origin) << ',' << r.egress_port << '\n';
}

}  // namespace trimsim
