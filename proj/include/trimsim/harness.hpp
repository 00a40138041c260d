#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trimsim/ndp.hpp"
#include "trimsim/packet.hpp"
#include "trimsim/sim_core.hpp"
#include "trimsim/switch_model.hpp"
#include "trimsim/trim_policy.hpp"

namespace trimsim {

struct Scenario {
  std::string name = "incast";
  std::int32_t n_senders = 64;
  // mapping[i] is the egress port of sender i. Empty means i % n_receivers.
  std::vector<std::int32_t> mapping;
  std::int32_t n_receivers = 16;
  // sender_ports[i] is the ingress port of sender i. Empty means port i.
  std::vector<std::int32_t> sender_ports;
  SwitchConfig sw{};
  HostConfig host{};
  SimTime duration = microseconds(500);
  std::int64_t initial_window = 1000;
  // Packets per flow; 0 means the flow never runs out of data.
  std::int64_t flow_packets = 0;
  std::uint64_t seed = 1;
  // Each sender starts at a uniform random offset in [0, start_jitter].
  SimTime start_jitter = 0;
  bool record_trace = false;
  bool record_queues = true;

  std::int32_t egress_of(std::int32_t i) const {
    return mapping.empty() ? i % n_receivers : mapping[static_cast<std::size_t>(i)];
  }
  std::int32_t ingress_of(std::int32_t i) const {
    return sender_ports.empty() ? i : sender_ports[static_cast<std::size_t>(i)];
  }

  void validate() const {
    sw.validate();
    host.validate();
    if (n_senders < 1 || n_senders > sw.n_ports) {
      throw std::invalid_argument("Scenario: n_senders must be in [1, n_ports]");
    }
    if (mapping.empty() && (n_receivers < 1 || n_receivers > sw.n_ports)) {
      throw std::invalid_argument("Scenario: n_receivers must be in [1, n_ports]");
    }
    if (!mapping.empty() && static_cast<std::int32_t>(mapping.size()) != n_senders) {
      throw std::invalid_argument("Scenario: mapping needs one entry per sender");
    }
    if (!sender_ports.empty() && static_cast<std::int32_t>(sender_ports.size()) != n_senders) {
      throw std::invalid_argument("Scenario: sender_ports needs one entry per sender");
    }
    std::set<std::int32_t> used;
    for (std::int32_t i = 0; i < n_senders; ++i) {
      const auto e = egress_of(i);
      const auto in = ingress_of(i);
      if (e < 0 || e >= sw.n_ports || in < 0 || in >= sw.n_ports) {
        throw std::invalid_argument("Scenario: port out of range for sender " + std::to_string(i));
      }
      if (!used.insert(in).second) {
        throw std::invalid_argument("Scenario: two senders share ingress port " + std::to_string(in));
      }
    }
    if (duration <= 0) throw std::invalid_argument("Scenario: duration must be positive");
    if (initial_window < 1) throw std::invalid_argument("Scenario: initial_window must be >= 1");
    if (flow_packets != 0 && flow_packets < initial_window) {
      throw std::invalid_argument("Scenario: flow_packets must be 0 or >= initial_window");
    }
    if (start_jitter < 0) throw std::invalid_argument("Scenario: negative start_jitter");
  }
};

inline Scenario build_incast(std::int32_t n_senders, std::int32_t n_receivers) {
  if (n_senders < 1 || n_senders > 64) {
    throw std::invalid_argument("build_incast: n_senders must be in [1, 64]");
  }
  if (n_receivers < 1 || n_receivers > 64) {
    throw std::invalid_argument("build_incast: n_receivers must be in [1, 64]");
  }
  Scenario s;
  s.name = "incast_" + std::to_string(n_senders) + "_to_" + std::to_string(n_receivers);
  s.n_senders = n_senders;
  s.n_receivers = n_receivers;
  return s;
}

struct FlowRecord {
  std::int32_t flow_id = 0;
  std::int32_t ingress_port = 0;
  std::int32_t egress_port = 0;
  std::int64_t bytes = 0;  // unique DATA bytes delivered within the run window
  SimTime start = 0;
  SimTime end = 0;
  double goodput_gbps = 0;
  std::int64_t rtx_count = 0;
  std::int64_t sent_packets = 0;
  std::int64_t unique_packets = 0;
  std::int64_t duplicates = 0;
  bool completed = false;
};

struct QueueSample {
  SimTime time = 0;
  QueueKind kind = QueueKind::Data;
  std::int32_t index = 0;
  std::int64_t depth = 0;
};

struct MetricStore {
  std::string scenario;
  SwitchVariant variant = SwitchVariant::TofinoFull;
  PolicyVariant policy = PolicyVariant::Full;
  SimTime duration = 0;
  SwitchCounters counters;
  std::int64_t sent = 0;
  std::int64_t delivered_full = 0;
  std::int64_t delivered_header = 0;
  std::int64_t duplicates = 0;
  std::vector<SimTime> header_arrivals;
  std::vector<FlowRecord> flows;
  std::vector<ModeTransition> modes;
  std::vector<QueueSample> queues;
  std::vector<CongestionSignal> signals;
  std::vector<TraceRecord> trace;

  std::int64_t trims() const { return counters.total_trims(); }

  bool conserved() const {
    return sent == delivered_full + delivered_header + counters.dod_dropped + counters.header_dropped;
  }

  double mean_goodput_gbps() const {
    if (flows.empty()) return 0;
    double sum = 0;
    for (const auto& f : flows) sum += f.goodput_gbps;
    return sum / static_cast<double>(flows.size());
  }
  double min_goodput_gbps() const {
    double v = flows.empty() ? 0 : flows.front().goodput_gbps;
    for (const auto& f : flows) v = std::min(v, f.goodput_gbps);
    return v;
  }
  double max_goodput_gbps() const {
    double v = 0;
    for (const auto& f : flows) v = std::max(v, f.goodput_gbps);
    return v;
  }

  std::set<std::int32_t> signaled_ports() const {
    std::set<std::int32_t> out;
    for (const auto& s : signals) out.insert(s.egress_port);
    return out;
  }
};

// Runs one scenario to the end of its window, then stops the senders and
// pacers and lets the network drain so every packet is accounted for.
// Throws std::logic_error if packet conservation does not hold.
inline MetricStore run_scenario(const Scenario& s) {
  s.validate();
  Simulator sim;
  MetricStore m;
  m.scenario = s.name;
  m.variant = s.sw.variant;
  m.policy = s.sw.variant == SwitchVariant::TofinoDod ? PolicyVariant::None : s.sw.policy.variant;
  m.duration = s.duration;

  std::vector<std::unique_ptr<ReceiverPort>> receivers(static_cast<std::size_t>(s.sw.n_ports));
  std::vector<std::unique_ptr<Sender>> senders;
  const SimTime pull_interval = serialization_time(s.sw.mtu, s.sw.line_rate);

  SwitchHooks hooks;
  hooks.deliver = [&](const Packet& pkt, SimTime) {
    auto* rx = receivers[static_cast<std::size_t>(pkt.egress_port)].get();
    sim.schedule_in(s.host.link_latency, [&m, &s, &sim, rx, pkt]() {
      if (pkt.kind == PacketKind::Data) {
        ++m.delivered_full;
      } else {
        ++m.delivered_header;
        m.header_arrivals.push_back(sim.now());
      }
      if (s.record_trace) {
        m.trace.push_back({sim.now(), pkt.flow_id, pkt.seqno, pkt.kind, pkt.trim_origin, pkt.egress_port});
      }
      rx->on_receive(pkt);
    });
  };
  hooks.signal_emitted = [&m](const CongestionSignal& sig) { m.signals.push_back(sig); };
  if (s.record_queues) {
    hooks.queue_sample = [&m](SimTime t, QueueKind k, std::int32_t idx, std::int64_t depth) {
      m.queues.push_back({t, k, idx, depth});
    };
  }
  SwitchConfig swcfg = s.sw;
  swcfg.seed = s.seed;
  Switch sw(sim, swcfg, hooks);

  std::mt19937_64 rng(s.seed);
  std::uniform_int_distribution<SimTime> jitter(0, s.start_jitter);
  const std::int64_t total = s.flow_packets == 0 ? kUnboundedFlow : s.flow_packets;
  std::vector<SimTime> starts;

  for (std::int32_t i = 0; i < s.n_senders; ++i) {
    const auto egress = s.egress_of(i);
    const auto ingress = s.ingress_of(i);
    auto& rx = receivers[static_cast<std::size_t>(egress)];
    if (!rx) {
      rx = std::make_unique<ReceiverPort>(sim, egress, pull_interval, s.duration, [&, egress](Packet pull) {
        auto* tx = senders[static_cast<std::size_t>(pull.flow_id)].get();
        sim.schedule_in(s.host.reverse_latency, [tx, pull]() { tx->on_pull(pull); });
      });
    }
    rx->add_flow(i, total);
    Flow f{i, ingress, egress, total, s.initial_window};
    senders.push_back(std::make_unique<Sender>(sim, f, s.host, ingress / s.sw.ports_per_pipe, egress,
                                               [&sw](Packet p) { sw.ingress_receive(std::move(p)); }));
    const SimTime start = s.start_jitter > 0 ? jitter(rng) : 0;
    starts.push_back(start);
    sim.schedule_at(start, [tx = senders.back().get()]() { tx->start(); });
  }

  sim.run_until(s.duration);
  for (auto& tx : senders) tx->stop();
  for (auto& rx : receivers) {
    if (rx) rx->stop();
  }
  sim.run();
  sw.finish(s.duration);

  m.counters = sw.counters();
  m.modes = sw.mode_transitions();
  for (std::int32_t i = 0; i < s.n_senders; ++i) {
    const auto& tx = *senders[static_cast<std::size_t>(i)];
    const auto& st = receivers[static_cast<std::size_t>(s.egress_of(i))]->flows().at(i);
    FlowRecord r;
    r.flow_id = i;
    r.ingress_port = s.ingress_of(i);
    r.egress_port = s.egress_of(i);
    r.bytes = st.bytes_in_window;
    r.start = starts[static_cast<std::size_t>(i)];
    r.completed = st.completion >= 0;
    r.end = r.completed ? std::min(st.completion, s.duration) : s.duration;
    const SimTime span = r.end - r.start;
    r.goodput_gbps = span > 0 ? static_cast<double>(r.bytes) * 8.0 * 1e3 / static_cast<double>(span) : 0.0;
    r.rtx_count = tx.rtx_count();
    r.sent_packets = tx.sent_data();
    r.unique_packets = st.unique_packets;
    r.duplicates = st.duplicates;
    m.sent += tx.sent_data();
    m.duplicates += st.duplicates;
    m.flows.push_back(r);
  }
  std::sort(m.header_arrivals.begin(), m.header_arrivals.end());

  if (!m.conserved()) {
    throw std::logic_error("run_scenario: packet conservation violated in " + s.name + " (sent=" +
                           std::to_string(m.sent) + ", full=" + std::to_string(m.delivered_full) +
                           ", headers=" + std::to_string(m.delivered_header) + ", dod_dropped=" +
                           std::to_string(m.counters.dod_dropped) + ", header_dropped=" +
                           std::to_string(m.counters.header_dropped) + ")");
  }
  return m;
}

struct CdfPoint {
  SimTime value = 0;
  double fraction = 0;
};

// Step CDF: one point per sample, in sorted order.
inline std::vector<CdfPoint> cdf(std::vector<SimTime> values) {
  std::sort(values.begin(), values.end());
  std::vector<CdfPoint> out;
  out.reserve(values.size());
  const auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

// Median of a sorted sample; 0 for an empty sample.
inline double median(const std::vector<SimTime>& sorted) {
  if (sorted.empty()) return 0;
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
  return (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
}

struct TrimExcess {
  double value = 0;
  // Set when the baseline has no trims: value is then the absolute count.
  bool is_absolute = false;
};

inline TrimExcess trim_excess(std::int64_t trims, std::int64_t baseline) {
  if (baseline == 0) return {static_cast<double>(trims), trims != 0};
  return {static_cast<double>(trims - baseline) / static_cast<double>(baseline), false};
}

inline TrimExcess trim_excess(const MetricStore& run, const MetricStore& ideal) {
  return trim_excess(run.trims(), ideal.trims());
}

enum class SweepAxis : std::uint8_t { NSenders, ResponseDuration, Variant };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::NSenders: return "n_senders";
    case SweepAxis::ResponseDuration: return "response_duration";
    case SweepAxis::Variant: return "variant";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "n_senders") return SweepAxis::NSenders;
  if (name == "response_duration") return SweepAxis::ResponseDuration;
  if (name == "variant") return SweepAxis::Variant;
  throw std::invalid_argument("unknown sweep axis '" + std::string(name) +
                              "' (expected n_senders, response_duration or variant)");
}

inline std::optional<SwitchVariant> parse_switch_variant(std::string_view s) {
  for (auto v : {SwitchVariant::Ideal, SwitchVariant::MirrorOnDrop, SwitchVariant::TofinoDod,
                 SwitchVariant::TofinoFull, SwitchVariant::Tofino2}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline std::optional<PolicyVariant> parse_policy_variant(std::string_view s) {
  for (auto v : {PolicyVariant::Full, PolicyVariant::PessiOnly, PolicyVariant::TrimAll,
                 PolicyVariant::TrimN, PolicyVariant::None}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

// Sets the congestion response duration: T0 = d and, for FULL, T1 = 4 d.
// A zero duration disables the response.
inline void set_response_duration(PolicyConfig& p, SimTime d) {
  if (d == 0) {
    p.variant = PolicyVariant::None;
    p.t0 = 0;
    p.t1 = 0;
    return;
  }
  p.t0 = d;
  p.t1 = p.variant == PolicyVariant::Full ? 4 * d : d;
}

struct SweepPoint {
  std::string label;
  double value = 0;
  Scenario scenario;
};

inline std::vector<std::string> default_sweep_values(SweepAxis axis) {
  std::vector<std::string> v;
  switch (axis) {
    case SweepAxis::NSenders:
      for (int i = 1; i <= 64; ++i) v.push_back(std::to_string(i));
      break;
    case SweepAxis::ResponseDuration:
      for (int i = 0; i <= 30; ++i) v.push_back(std::to_string(i));
      break;
    case SweepAxis::Variant:
      v = {"full", "pessi_only", "trim_all"};
      break;
  }
  return v;
}

// Response durations are given in microseconds.
inline std::vector<SweepPoint> sweep_points(SweepAxis axis, const Scenario& base,
                                            const std::vector<std::string>& values) {
  std::vector<SweepPoint> out;
  for (const auto& text : values) {
    SweepPoint p{text, 0, base};
    switch (axis) {
      case SweepAxis::NSenders: {
        const int n = std::stoi(text);
        p.value = n;
        p.scenario.n_senders = n;
        p.scenario.mapping.clear();
        p.scenario.sender_ports.clear();
        break;
      }
      case SweepAxis::ResponseDuration: {
        const double us = std::stod(text);
        if (us < 0) throw std::invalid_argument("sweep: negative response duration");
        p.value = us;
        set_response_duration(p.scenario.sw.policy, from_ns(us * 1000.0));
        break;
      }
      case SweepAxis::Variant: {
        p.value = static_cast<double>(out.size());
        if (auto pv = parse_policy_variant(text)) {
          const SimTime d = base.sw.policy.t0;
          p.scenario.sw.policy.variant = *pv;
          if (*pv != PolicyVariant::None && *pv != PolicyVariant::TrimN) {
            set_response_duration(p.scenario.sw.policy, d);
          }
        } else if (auto sv = parse_switch_variant(text)) {
          p.scenario.sw.variant = *sv;
        } else {
          throw std::invalid_argument("sweep: unknown variant '" + text + "'");
        }
        break;
      }
    }
    p.scenario.name = base.name + "/" + std::string(to_string(axis)) + "=" + text;
    out.push_back(std::move(p));
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct RunSummary {
  std::int64_t sent = 0;
  std::int64_t trims = 0;
  std::int64_t ingress_trims = 0;
  std::int64_t dod_trims = 0;
  std::int64_t ideal_trims = 0;
  std::int64_t mod_trims = 0;
  std::int64_t dod_dropped = 0;
  std::int64_t header_dropped = 0;
  std::int64_t signals = 0;
  std::int64_t max_dod_queue = 0;
  double goodput_mean_gbps = 0;
  double goodput_min_gbps = 0;
  double goodput_max_gbps = 0;
};

inline RunSummary summarize(const MetricStore& m) {
  RunSummary r;
  r.sent = m.sent;
  r.trims = m.trims();
  r.ingress_trims = m.counters.ingress_trims;
  r.dod_trims = m.counters.dod_trims;
  r.ideal_trims = m.counters.ideal_trims;
  r.mod_trims = m.counters.mod_trims;
  r.dod_dropped = m.counters.dod_dropped;
  r.header_dropped = m.counters.header_dropped;
  r.signals = m.counters.signals;
  r.max_dod_queue = m.counters.max_dod();
  r.goodput_mean_gbps = m.mean_goodput_gbps();
  r.goodput_min_gbps = m.min_goodput_gbps();
  r.goodput_max_gbps = m.max_goodput_gbps();
  return r;
}

struct SweepRow {
  SweepAxis axis = SweepAxis::NSenders;
  std::string label;
  double value = 0;
  SwitchVariant variant = SwitchVariant::TofinoFull;
  PolicyVariant policy = PolicyVariant::Full;
  std::int32_t n_senders = 0;
  SimTime t0 = 0;
  SimTime t1 = 0;
  RunSummary run;
  RunSummary ideal;
  TrimExcess excess;
};

// One run per axis point plus an IDEAL baseline per distinct workload.
// Queue time series and traces are not kept.
inline std::vector<SweepRow> sweep(SweepAxis axis, const Scenario& base,
                                   const std::vector<std::string>& values,
                                   unsigned workers = std::thread::hardware_concurrency()) {
  auto points = sweep_points(axis, base, values);
  std::vector<Scenario> jobs;
  std::vector<std::size_t> baseline_of(points.size());
  std::map<std::int32_t, std::size_t> baseline_by_senders;
  for (auto& p : points) {
    p.scenario.record_queues = false;
    p.scenario.record_trace = false;
    p.scenario.validate();
    jobs.push_back(p.scenario);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& sc = points[i].scenario;
    // Everything except the senders, the switch variant and the policy is
    // shared by the points of one sweep, so the sender count keys the IDEAL run.
    auto it = baseline_by_senders.find(sc.n_senders);
    if (it == baseline_by_senders.end()) {
      Scenario ideal = sc;
      ideal.sw.variant = SwitchVariant::Ideal;
      ideal.name = sc.name + "/ideal";
      it = baseline_by_senders.emplace(sc.n_senders, jobs.size()).first;
      jobs.push_back(ideal);
    }
    baseline_of[i] = it->second;
  }

  std::vector<RunSummary> results(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) { results[i] = summarize(run_scenario(jobs[i])); });

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& sc = points[i].scenario;
    SweepRow r;
    r.axis = axis;
    r.label = points[i].label;
    r.value = points[i].value;
    r.variant = sc.sw.variant;
    r.policy = sc.sw.variant == SwitchVariant::TofinoDod ? PolicyVariant::None : sc.sw.policy.variant;
    r.n_senders = sc.n_senders;
    r.t0 = sc.sw.policy.t0;
    r.t1 = sc.sw.policy.t1;
    r.run = results[i];
    r.ideal = results[baseline_of[i]];
    r.excess = trim_excess(r.run.trims, r.ideal.trims);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace trimsim
