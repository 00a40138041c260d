#pragma once

#include <fstream>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trimsim/harness.hpp"

namespace trimsim {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void reject_unknown(const json& obj, std::string_view where,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

inline void read_time_ns(const json& obj, const char* key, SimTime& out, std::string_view where) {
  if (!obj.contains(key)) return;
  double v = 0;
  read(obj, key, v, where);
  out = from_ns(v);
}

inline void read_time_us(const json& obj, const char* key, SimTime& out, std::string_view where) {
  if (!obj.contains(key)) return;
  double v = 0;
  read(obj, key, v, where);
  out = from_ns(v * 1000.0);
}

inline void read_rate_gbps(const json& obj, const char* key, BitsPerSecond& out, std::string_view where) {
  if (!obj.contains(key)) return;
  double v = 0;
  read(obj, key, v, where);
  out = static_cast<BitsPerSecond>(v * 1e9 + 0.5);
}

template <typename E, std::size_t N>
E read_enum(const json& obj, const char* key, E current, const E (&options)[N], std::string_view where) {
  if (!obj.contains(key)) return current;
  std::string text;
  read(obj, key, text, where);
  std::string names;
  for (auto o : options) {
    if (to_string(o) == text) return o;
    names += (names.empty() ? "" : ", ") + std::string(to_string(o));
  }
  throw ConfigError(std::string(where) + "." + key + ": '" + text + "' is not one of " + names);
}

}  // namespace detail

constexpr std::string_view to_string(MeterLayout m) {
  return m == MeterLayout::ThreeMeter ? "three_meter" : "two_meter";
}
constexpr std::string_view to_string(SignalTrigger t) {
  return t == SignalTrigger::Backlog ? "backlog" : "every_deflection";
}
constexpr std::string_view to_string(EgressScheduling e) {
  return e == EgressScheduling::StrictPriority ? "strict_priority" : "weighted";
}

inline PolicyConfig policy_from_json(const json& j, PolicyConfig p = {}) {
  constexpr std::string_view where = "policy";
  detail::reject_unknown(j, where, {"variant", "t0_us", "t1_us", "signal_fanout", "trim_n"});
  constexpr PolicyVariant variants[] = {PolicyVariant::Full, PolicyVariant::PessiOnly, PolicyVariant::TrimAll,
                                        PolicyVariant::TrimN, PolicyVariant::None};
  constexpr SignalFanout fanouts[] = {SignalFanout::AllPipes, SignalFanout::OriginPipe};
  p.variant = detail::read_enum(j, "variant", p.variant, variants, where);
  p.signal_fanout = detail::read_enum(j, "signal_fanout", p.signal_fanout, fanouts, where);
  detail::read_time_us(j, "t0_us", p.t0, where);
  detail::read_time_us(j, "t1_us", p.t1, where);
  detail::read(j, "trim_n", p.trim_n, where);
  return p;
}

inline SwitchConfig switch_from_json(const json& j, SwitchConfig c = {}) {
  constexpr std::string_view where = "switch";
  detail::reject_unknown(j, where,
                         {"variant", "n_ports", "n_pipes", "ports_per_pipe", "line_rate_gbps",
                          "data_queue_cap", "header_queue_cap", "dod_queue_cap", "recirc_latency_ns",
                          "signal_hops", "scheduling", "header_data_weight", "mtu", "header_size",
                          "meter_burst", "meter_layout", "signal_trigger", "tofino2_lag_packets", "tie_break"});
  constexpr SwitchVariant variants[] = {SwitchVariant::Ideal, SwitchVariant::MirrorOnDrop,
                                        SwitchVariant::TofinoDod, SwitchVariant::TofinoFull,
                                        SwitchVariant::Tofino2};
  constexpr EgressScheduling schedulings[] = {EgressScheduling::StrictPriority, EgressScheduling::WeightedBytes};
  constexpr MeterLayout layouts[] = {MeterLayout::ThreeMeter, MeterLayout::TwoMeter};
  constexpr SignalTrigger triggers[] = {SignalTrigger::Backlog, SignalTrigger::EveryDeflection};
  c.variant = detail::read_enum(j, "variant", c.variant, variants, where);
  c.scheduling = detail::read_enum(j, "scheduling", c.scheduling, schedulings, where);
  c.meter_layout = detail::read_enum(j, "meter_layout", c.meter_layout, layouts, where);
  c.signal_trigger = detail::read_enum(j, "signal_trigger", c.signal_trigger, triggers, where);
  constexpr TieBreak tie_breaks[] = {TieBreak::Rotate, TieBreak::Random};
  c.tie_break = detail::read_enum(j, "tie_break", c.tie_break, tie_breaks, where);
  detail::read(j, "n_ports", c.n_ports, where);
  detail::read(j, "n_pipes", c.n_pipes, where);
  detail::read(j, "ports_per_pipe", c.ports_per_pipe, where);
  detail::read_rate_gbps(j, "line_rate_gbps", c.line_rate, where);
  detail::read(j, "data_queue_cap", c.data_queue_cap, where);
  detail::read(j, "header_queue_cap", c.header_queue_cap, where);
  detail::read(j, "dod_queue_cap", c.dod_queue_cap, where);
  detail::read_time_ns(j, "recirc_latency_ns", c.recirc_latency, where);
  detail::read(j, "signal_hops", c.signal_hops, where);
  detail::read(j, "header_data_weight", c.header_data_weight, where);
  detail::read(j, "mtu", c.mtu, where);
  detail::read(j, "header_size", c.header_size, where);
  detail::read(j, "meter_burst", c.meter_burst, where);
  detail::read(j, "tofino2_lag_packets", c.tofino2_lag_packets, where);
  return c;
}

inline HostConfig host_from_json(const json& j, HostConfig h = {}) {
  constexpr std::string_view where = "host";
  detail::reject_unknown(j, where, {"link_rate_gbps", "link_latency_ns", "reverse_latency_ns"});
  detail::read_rate_gbps(j, "link_rate_gbps", h.link_rate, where);
  detail::read_time_ns(j, "link_latency_ns", h.link_latency, where);
  detail::read_time_ns(j, "reverse_latency_ns", h.reverse_latency, where);
  return h;
}

struct RunConfig {
  Scenario scenario;
  // Axis values for `trimsim sweep`; empty means the axis default.
  std::vector<std::string> sweep_values;
};

inline RunConfig config_from_json(const json& j) {
  constexpr std::string_view where = "config";
  detail::reject_unknown(j, where,
                         {"name", "n_senders", "n_receivers", "mapping", "sender_ports", "duration_us",
                          "initial_window", "flow_packets", "seed", "start_jitter_ns", "record_trace",
                          "record_queues", "switch", "policy", "host", "sweep_values"});
  RunConfig rc;
  Scenario& s = rc.scenario;
  detail::read(j, "name", s.name, where);
  detail::read(j, "n_senders", s.n_senders, where);
  detail::read(j, "n_receivers", s.n_receivers, where);
  detail::read(j, "mapping", s.mapping, where);
  detail::read(j, "sender_ports", s.sender_ports, where);
  detail::read_time_us(j, "duration_us", s.duration, where);
  detail::read(j, "initial_window", s.initial_window, where);
  detail::read(j, "flow_packets", s.flow_packets, where);
  detail::read(j, "seed", s.seed, where);
  detail::read_time_ns(j, "start_jitter_ns", s.start_jitter, where);
  detail::read(j, "record_trace", s.record_trace, where);
  detail::read(j, "record_queues", s.record_queues, where);
  if (j.contains("switch")) s.sw = switch_from_json(j.at("switch"));
  if (j.contains("policy")) s.sw.policy = policy_from_json(j.at("policy"));
  if (j.contains("host")) s.host = host_from_json(j.at("host"));
  if (j.contains("sweep_values")) {
    const auto& v = j.at("sweep_values");
    if (!v.is_array()) throw ConfigError("config.sweep_values: expected an array");
    for (const auto& e : v) {
      if (e.is_string()) rc.sweep_values.push_back(e.get<std::string>());
      else if (e.is_number_integer()) rc.sweep_values.push_back(std::to_string(e.get<std::int64_t>()));
      else if (e.is_number()) rc.sweep_values.push_back(json(e.get<double>()).dump());
      else throw ConfigError("config.sweep_values: entries must be numbers or strings");
    }
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const Scenario& s) {
  const auto& c = s.sw;
  const auto& p = c.policy;
  json j;
  j["name"] = s.name;
  j["n_senders"] = s.n_senders;
  j["n_receivers"] = s.n_receivers;
  if (!s.mapping.empty()) j["mapping"] = s.mapping;
  if (!s.sender_ports.empty()) j["sender_ports"] = s.sender_ports;
  j["duration_us"] = to_us(s.duration);
  j["initial_window"] = s.initial_window;
  j["flow_packets"] = s.flow_packets;
  j["seed"] = s.seed;
  j["start_jitter_ns"] = to_ns(s.start_jitter);
  j["record_trace"] = s.record_trace;
  j["record_queues"] = s.record_queues;
  j["switch"] = {{"variant", to_string(c.variant)},
                 {"n_ports", c.n_ports},
                 {"n_pipes", c.n_pipes},
                 {"ports_per_pipe", c.ports_per_pipe},
                 {"line_rate_gbps", static_cast<double>(c.line_rate) / 1e9},
                 {"data_queue_cap", c.data_queue_cap},
                 {"header_queue_cap", c.header_queue_cap},
                 {"dod_queue_cap", c.dod_queue_cap},
                 {"recirc_latency_ns", to_ns(c.recirc_latency)},
                 {"signal_hops", c.signal_hops},
                 {"scheduling", to_string(c.scheduling)},
                 {"header_data_weight", c.header_data_weight},
                 {"mtu", c.mtu},
                 {"header_size", c.header_size},
                 {"meter_burst", c.meter_burst},
                 {"meter_layout", to_string(c.meter_layout)},
                 {"signal_trigger", to_string(c.signal_trigger)},
                 {"tofino2_lag_packets", c.tofino2_lag_packets},
                 {"tie_break", to_string(c.tie_break)}};
  j["policy"] = {{"variant", to_string(p.variant)},
                 {"t0_us", to_us(p.t0)},
                 {"t1_us", to_us(p.t1)},
                 {"signal_fanout", to_string(p.signal_fanout)},
                 {"trim_n", p.trim_n}};
  j["host"] = {{"link_rate_gbps", static_cast<double>(s.host.link_rate) / 1e9},
               {"link_latency_ns", to_ns(s.host.link_latency)},
               {"reverse_latency_ns", to_ns(s.host.reverse_latency)}};
  return j;
}

}  // namespace trimsim
