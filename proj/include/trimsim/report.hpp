#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trimsim/config.hpp"
#include "trimsim/harness.hpp"

namespace trimsim {

inline json counters_json(const MetricStore& m) {
  const auto& c = m.counters;
  json j;
  j["scenario"] = m.scenario;
  j["variant"] = to_string(m.variant);
  j["policy"] = to_string(m.policy);
  j["duration_us"] = to_us(m.duration);
  j["ingress_trims"] = c.ingress_trims;
  j["dod_trims"] = c.dod_trims;
  j["ideal_trims"] = c.ideal_trims;
  j["mod_trims"] = c.mod_trims;
  j["total_trims"] = c.total_trims();
  j["dod_dropped"] = c.dod_dropped;
  j["header_dropped"] = c.header_dropped;
  j["deflected"] = c.deflected;
  j["signals"] = c.signals;
  j["tofino2_onset_slip"] = c.tofino2_onset_slip;
  j["max_dod_queue"] = c.max_dod_queue;
  j["max_data_queue"] = c.max_data_queue;
  j["max_header_queue"] = c.max_header_queue;
  j["sent"] = m.sent;
  j["delivered_full"] = m.delivered_full;
  j["delivered_header"] = m.delivered_header;
  j["duplicates"] = m.duplicates;
  j["conserved"] = m.conserved();
  j["goodput_mean_gbps"] = m.mean_goodput_gbps();
  j["goodput_min_gbps"] = m.min_goodput_gbps();
  j["goodput_max_gbps"] = m.max_goodput_gbps();
  return j;
}

inline void write_header_cdf(std::ostream& os, const MetricStore& m) {
  os << "time_ns,cdf\n";
  for (const auto& p : cdf(m.header_arrivals)) {
    write_ns(os, p.value);
    os << ',' << std::setprecision(9) << p.fraction << '\n';
  }
}

inline void write_flows(std::ostream& os, const MetricStore& m) {
  os << "flow_id,bytes,start_ns,end_ns,goodput_gbps,rtx_count\n";
  for (const auto& f : m.flows) {
    os << f.flow_id << ',' << f.bytes << ',';
    write_ns(os, f.start);
    os << ',';
    write_ns(os, f.end);
    os << ',' << std::fixed << std::setprecision(4) << f.goodput_gbps << std::defaultfloat << ','
       << f.rtx_count << '\n';
  }
}

inline void write_modes(std::ostream& os, const MetricStore& m) {
  os << "time_ns,pipe,port,mode\n";
  for (const auto& t : m.modes) {
    write_ns(os, t.time);
    os << ',' << t.pipe << ',' << t.port << ',' << to_string(t.mode) << '\n';
  }
}

inline void write_queues(std::ostream& os, const MetricStore& m) {
  os << "time_ns,queue,index,depth\n";
  for (const auto& q : m.queues) {
    write_ns(os, q.time);
    os << ',' << (q.kind == QueueKind::Dod ? "dod" : "data") << ',' << q.index << ',' << q.depth << '\n';
  }
}

inline void write_signals(std::ostream& os, const MetricStore& m) {
  os << "time_ns,egress_port,origin_pipe\n";
  for (const auto& s : m.signals) {
    write_ns(os, s.emit_time);
    os << ',' << s.egress_port << ',' << s.origin_pipe << '\n';
  }
}

inline void write_trace(std::ostream& os, const MetricStore& m) {
  write_trace_header(os);
  for (const auto& r : m.trace) write_trace_row(os, r);
}

inline void write_sweep(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "axis,value,label,variant,policy,n_senders,t0_us,t1_us,goodput_mean_gbps,goodput_min_gbps,"
        "goodput_max_gbps,trims,ingress_trims,dod_trims,ideal_trims,mod_trims,dod_dropped,"
        "header_dropped,signals,max_dod_queue,ideal_goodput_mean_gbps,ideal_trims_baseline,"
        "excess_trims,excess_is_absolute\n";
  for (const auto& r : rows) {
    os << to_string(r.axis) << ',' << r.value << ',' << r.label << ',' << to_string(r.variant) << ','
       << to_string(r.policy) << ',' << r.n_senders << ',' << to_us(r.t0) << ',' << to_us(r.t1) << ','
       << r.run.goodput_mean_gbps << ',' << r.run.goodput_min_gbps << ',' << r.run.goodput_max_gbps << ','
       << r.run.trims << ',' << r.run.ingress_trims << ',' << r.run.dod_trims << ','
       << r.run.ideal_trims << ',' << r.run.mod_trims << ',' << r.run.dod_dropped << ','
       << r.run.header_dropped << ',' << r.run.signals << ',' << r.run.max_dod_queue << ','
       << r.ideal.goodput_mean_gbps << ',' << r.ideal.trims << ',' << r.excess.value << ','
       << (r.excess.is_absolute ? 1 : 0) << '\n';
  }
}

namespace detail {

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  w(out);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline void write_run(const std::filesystem::path& dir, const Scenario& s, const MetricStore& m) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "scenario.json", [&](std::ostream& os) { os << to_json(s).dump(2) << '\n'; });
  detail::write_file(dir / "counters.json", [&](std::ostream& os) { os << counters_json(m).dump(2) << '\n'; });
  detail::write_file(dir / "header_cdf.csv", [&](std::ostream& os) { write_header_cdf(os, m); });
  detail::write_file(dir / "flows.csv", [&](std::ostream& os) { write_flows(os, m); });
  detail::write_file(dir / "modes.csv", [&](std::ostream& os) { write_modes(os, m); });
  detail::write_file(dir / "queues.csv", [&](std::ostream& os) { write_queues(os, m); });
  detail::write_file(dir / "signals.csv", [&](std::ostream& os) { write_signals(os, m); });
  if (s.record_trace) {
    detail::write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace(os, m); });
  }
}

inline void write_sweep_dir(const std::filesystem::path& dir, const Scenario& base,
                            const std::vector<SweepRow>& rows) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "scenario.json", [&](std::ostream& os) { os << to_json(base).dump(2) << '\n'; });
  detail::write_file(dir / "sweep.csv", [&](std::ostream& os) { write_sweep(os, rows); });
}

// Side-by-side table of the numeric scalars of two counters.json files.
// Trim excess treats `b` as the baseline.
inline void compare_runs(std::ostream& os, const std::filesystem::path& a, const std::filesystem::path& b) {
  auto load = [](const std::filesystem::path& dir) {
    std::ifstream in(dir / "counters.json");
    if (!in) throw std::runtime_error("no counters.json in '" + dir.string() + "'");
    return json::parse(in);
  };
  const json ja = load(a);
  const json jb = load(b);
  os << std::left << std::setw(22) << "metric" << std::right << std::setw(16) << "a" << std::setw(16) << "b"
     << std::setw(16) << "b - a" << '\n';
  for (const auto& [key, va] : ja.items()) {
    if (!va.is_number() || !jb.contains(key) || !jb.at(key).is_number()) continue;
    const double x = va.get<double>();
    const double y = jb.at(key).get<double>();
    os << std::left << std::setw(22) << key << std::right << std::setw(16) << x << std::setw(16) << y
       << std::setw(16) << (y - x) << '\n';
  }
  if (ja.contains("total_trims") && jb.contains("total_trims")) {
    const auto e = trim_excess(ja["total_trims"].get<std::int64_t>(), jb["total_trims"].get<std::int64_t>());
    os << "trim excess of a over b: ";
    if (e.is_absolute) {
      os << e.value << " trims (b has none)\n";
    } else {
      os << std::fixed << std::setprecision(2) << e.value * 100.0 << std::defaultfloat << "%\n";
    }
  }
}

}  // namespace trimsim
