// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every run is full scale: 64 ports, 500 us window.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"

using namespace trimsim;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::cout << "[criterion " << n << "] " << (ok ? "PASS" : "FAIL") << ": " << detail << std::endl;
  if (!ok) ++failures;
}

void guarded(int n, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(n, false, std::string("exception: ") + e.what());
  }
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

Scenario incast(std::int32_t senders, std::int32_t receivers, SwitchVariant v) {
  auto s = build_incast(senders, receivers);
  s.sw.variant = v;
  s.record_queues = false;
  return s;
}

// 64:1 needs a header queue deep enough for the whole blast; see README.
Scenario blast_64_to_1(SwitchVariant v) {
  auto s = incast(64, 1, v);
  s.sw.header_queue_cap = 65536;
  return s;
}

Scenario trim_split() {
  auto s = incast(4, 1, SwitchVariant::TofinoFull);
  s.name = "trim_split_4_to_1";
  s.mapping = {0, 0, 0, 0};
  s.sender_ports = {0, 16, 32, 48};
  s.flow_packets = 5000;
  s.duration = microseconds(3000);
  s.sw.signal_trigger = SignalTrigger::EveryDeflection;
  return s;
}

std::vector<std::string> range_us(int lo, int hi) {
  std::vector<std::string> v;
  for (int d = lo; d <= hi; ++d) v.push_back(std::to_string(d));
  return v;
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

std::vector<SweepRow> duration_sweep(std::int32_t senders, PolicyVariant p, SignalFanout f,
                                     const std::vector<std::string>& values) {
  auto base = incast(senders, 16, SwitchVariant::TofinoFull);
  base.sw.policy.variant = p;
  base.sw.policy.signal_fanout = f;
  return sweep(SweepAxis::ResponseDuration, base, values, workers());
}

}  // namespace

int main() {
  std::cout << "trimsim acceptance gate" << std::endl;

  // Shared runs: the sender sweep feeds criteria 1 and 5 to 8.
  std::vector<SweepRow> sender_rows;
  try {
    std::vector<std::string> n;
    for (int i = 1; i <= 64; ++i) n.push_back(std::to_string(i));
    sender_rows = sweep(SweepAxis::NSenders, incast(64, 16, SwitchVariant::TofinoFull), n, workers());
  } catch (const std::exception& e) {
    std::cout << "sender sweep failed: " << e.what() << std::endl;
  }
  auto row_for = [&](int n) -> const SweepRow& { return sender_rows.at(static_cast<std::size_t>(n - 1)); };

  MetricStore ideal_64_1;
  MetricStore mod_64_1;

  guarded(1, [&] {
    std::vector<Scenario> scenarios;
    for (auto v : {SwitchVariant::Ideal, SwitchVariant::TofinoFull}) {
      scenarios.push_back(blast_64_to_1(v));
      scenarios.push_back(incast(64, 4, v));
      scenarios.push_back(incast(64, 8, v));
      scenarios.push_back(incast(32, 16, v));
      auto ts = trim_split();
      ts.sw.variant = v;
      scenarios.push_back(ts);
    }
    std::vector<MetricStore> runs(scenarios.size());
    parallel_for(scenarios.size(), workers(), [&](std::size_t i) { runs[i] = run_scenario(scenarios[i]); });
    ideal_64_1 = runs[0];

    bool ok = sender_rows.size() == 64;
    std::string bad;
    std::int64_t sent = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& m = runs[i];
      sent += m.sent;
      const bool good = m.conserved() && m.counters.dod_dropped == 0 && m.counters.header_dropped == 0;
      if (!good && bad.empty()) {
        bad = scenarios[i].name + "/" + std::string(to_string(scenarios[i].sw.variant)) +
              " dod_dropped=" + std::to_string(m.counters.dod_dropped) +
              " header_dropped=" + std::to_string(m.counters.header_dropped);
      }
      ok = ok && good;
    }
    // Sweep runs throw on any conservation violation; drops are checked here.
    for (const auto& r : sender_rows) {
      for (const auto* s : {&r.run, &r.ideal}) {
        sent += s->sent;
        if (s->dod_dropped != 0 || s->header_dropped != 0) {
          ok = false;
          if (bad.empty()) bad = "sender sweep n=" + std::to_string(r.n_senders);
        }
      }
    }
    report(1, ok,
           std::to_string(runs.size() + 2 * sender_rows.size()) + " runs, " + std::to_string(sent) +
               " packets, all conserved with zero DoD and header drops" + (bad.empty() ? "" : "; first failure " + bad));
  });

  guarded(2, [&] {
    mod_64_1 = run_scenario(blast_64_to_1(SwitchVariant::MirrorOnDrop));
    if (ideal_64_1.header_arrivals.empty()) ideal_64_1 = run_scenario(blast_64_to_1(SwitchVariant::Ideal));
    const double shift = (median(mod_64_1.header_arrivals) - median(ideal_64_1.header_arrivals)) / 1e6;
    auto quantile = [](const std::vector<SimTime>& v, double q) {
      return static_cast<double>(v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))]);
    };
    const double q25 = (quantile(mod_64_1.header_arrivals, 0.25) - quantile(ideal_64_1.header_arrivals, 0.25)) / 1e6;
    const double q75 = (quantile(mod_64_1.header_arrivals, 0.75) - quantile(ideal_64_1.header_arrivals, 0.75)) / 1e6;
    report(2, shift >= 0.8 && shift <= 1.3,
           "median header-arrival shift " + fmt(shift) + " us (need [0.8, 1.3]); p25 shift " + fmt(q25) +
               " us, p75 shift " + fmt(q75) + " us; " + std::to_string(mod_64_1.header_arrivals.size()) +
               " MoD headers vs " + std::to_string(ideal_64_1.header_arrivals.size()) + " IDEAL");
  });

  guarded(3, [&] {
    const auto m = run_scenario(incast(64, 16, SwitchVariant::TofinoDod));
    const auto q = m.counters.max_dod();
    report(3, q >= 10'000 && q >= 11'200 && q <= 16'800,
           "TOFINO_DOD 16x4:1 max DoD queue " + std::to_string(q) + " packets (need >= 10000 and in [11200, 16800])");
  });

  guarded(4, [&] {
    const auto m = run_scenario(incast(64, 16, SwitchVariant::TofinoFull));
    const auto q = m.counters.max_dod();
    report(4, q <= 250, "TOFINO_FULL 16x4:1 max DoD queue " + std::to_string(q) + " packets (need <= 250)");
  });

  guarded(5, [&] {
    if (sender_rows.size() != 64) throw std::runtime_error("sender sweep incomplete");
    double worst = 0;
    int worst_n = 0;
    double sum = 0;
    int counted = 0;
    bool ok = true;
    std::string zero_base;
    for (const auto& r : sender_rows) {
      if (r.excess.is_absolute) {
        ok = false;
        zero_base += " n=" + std::to_string(r.n_senders) + ":" + std::to_string(r.run.trims);
        continue;
      }
      if (r.ideal.trims == 0) continue;
      sum += r.excess.value;
      ++counted;
      if (r.excess.value > worst) {
        worst = r.excess.value;
        worst_n = r.n_senders;
      }
    }
    const double mean = counted ? sum / counted : 0.0;
    ok = ok && worst <= 0.15 && mean <= 0.10;
    report(5, ok,
           "max per-point excess " + fmt(100 * worst) + "% at n=" + std::to_string(worst_n) +
               " (need <= 15%), mean " + fmt(100 * mean) + "% over " + std::to_string(counted) +
               " trimming points (need <= 10%)" +
               (zero_base.empty() ? "" : "; trims where IDEAL has none:" + zero_base));
  });

  guarded(6, [&] {
    if (sender_rows.size() != 64) throw std::runtime_error("sender sweep incomplete");
    double worst = 0;
    int worst_n = 0;
    for (const auto& r : sender_rows) {
      const double gap = std::abs(r.run.goodput_mean_gbps - r.ideal.goodput_mean_gbps) / r.ideal.goodput_mean_gbps;
      if (gap > worst) {
        worst = gap;
        worst_n = r.n_senders;
      }
    }
    report(6, worst <= 0.10,
           "largest TOFINO_FULL vs IDEAL mean-goodput gap " + fmt(100 * worst) + "% at n=" + std::to_string(worst_n) +
               " (need <= 10% at every point)");
  });

  guarded(7, [&] {
    std::vector<MetricStore> m(3);
    parallel_for(3, workers(), [&](std::size_t i) {
      m[i] = run_scenario(incast(static_cast<std::int32_t>(16 + i), 16, SwitchVariant::TofinoFull));
    });
    const auto ports = m[2].signaled_ports();
    const bool ok = m[0].trims() == 0 && m[1].trims() > 0 && m[1].counters.signals == 0 &&
                    ports == std::set<std::int32_t>{0, 1};
    std::string list;
    for (auto p : ports) list += (list.empty() ? "" : ",") + std::to_string(p);
    report(7, ok,
           "16 senders: " + std::to_string(m[0].trims()) + " trims; 17: " + std::to_string(m[1].trims()) +
               " trims, " + std::to_string(m[1].counters.signals) + " signals; 18: signals on ports {" + list +
               "} (0-indexed; need {0,1})");
  });

  guarded(8, [&] {
    if (sender_rows.size() != 64) throw std::runtime_error("sender sweep incomplete");
    const auto& r = row_for(64).run;
    SwitchConfig sw;
    const double payload = static_cast<double>(sw.mtu - sw.header_size) / static_cast<double>(sw.mtu);
    const double fair = 25.0 * payload;
    const double lo = r.goodput_min_gbps * payload;
    const double hi = r.goodput_max_gbps * payload;
    const double spread = (hi - lo) / lo;
    const bool ok = spread <= 0.06 && std::abs(lo - fair) / fair <= 0.10 && std::abs(hi - fair) / fair <= 0.10;
    report(8, ok,
           "64-sender payload goodput " + fmt(lo) + ".." + fmt(hi) + " Gb/s (spread " + fmt(100 * spread) +
               "%, need <= 6%); fair share net of headers " + fmt(fair) + " Gb/s, need each within 10%");
  });

  guarded(9, [&] {
    const std::vector<std::string> values = {"0.5", "1", "1.5", "2", "2.5", "3", "4", "5", "6", "8", "10",
                                             "12", "14", "16", "18", "20", "22", "24", "26", "28", "30"};
    const auto rows = duration_sweep(64, PolicyVariant::Full, SignalFanout::AllPipes, values);
    bool short_ok = true;
    bool long_ok = true;
    std::string short_detail;
    std::string long_detail;
    std::vector<double> d;
    std::vector<double> e;
    for (const auto& r : rows) {
      const double ex = r.excess.is_absolute ? 0.0 : r.excess.value;
      if (r.value < 3) {
        const bool ok = r.run.max_dod_queue > 1000 && ex > 0.30;
        short_ok = short_ok && ok;
        short_detail += " " + r.label + "us:" + std::to_string(r.run.max_dod_queue) + "/" + fmt(100 * ex, 1) + "%";
      } else {
        const bool ok = r.run.max_dod_queue <= 500;
        long_ok = long_ok && ok;
        if (!ok) long_detail += " " + r.label + "us:" + std::to_string(r.run.max_dod_queue);
      }
      if (r.value > 6) {
        d.push_back(r.value);
        e.push_back(ex);
      }
    }
    const double rho = spearman(d, e);
    report(9, short_ok && long_ok && rho > 0.5,
           "d<3us max DoD/excess:" + short_detail + " (need >1000 and >30%); d in [3,30] max DoD <= 500: " +
               (long_ok ? "yes" : "no," + long_detail) + "; Spearman rho of excess vs d>6us " + fmt(rho) +
               " (need > 0.5)");
  });

  guarded(10, [&] {
    const auto values = range_us(1, 30);
    const auto pessi = duration_sweep(32, PolicyVariant::PessiOnly, SignalFanout::AllPipes, values);
    const auto full = duration_sweep(32, PolicyVariant::Full, SignalFanout::AllPipes, values);
    const auto trim_all = duration_sweep(32, PolicyVariant::TrimAll, SignalFanout::AllPipes, values);
    auto best_stable = [](const std::vector<SweepRow>& rows) {
      double best = 0;
      for (const auto& r : rows) {
        if (r.run.max_dod_queue <= 1000) best = std::max(best, r.run.goodput_mean_gbps);
      }
      return best;
    };
    auto first_stable = [](const std::vector<SweepRow>& rows) -> const SweepRow* {
      for (const auto& r : rows) {
        if (r.run.max_dod_queue <= 1000) return &r;
      }
      return nullptr;
    };
    bool pessi_unstable = true;
    for (const auto& r : pessi) {
      if (r.value <= 14) pessi_unstable = pessi_unstable && r.run.max_dod_queue > 1000;
    }
    const double gp = best_stable(pessi);
    const double gf = best_stable(full);
    const SweepRow* ta = first_stable(trim_all);
    const double ta_d = ta ? ta->value : -1;
    const double ta_ex = ta ? ta->excess.value : 0;
    const bool ok = pessi_unstable && std::abs(gp - 42) <= 4.2 && std::abs(gf - 46) <= 4.6 && ta && ta_d >= 12 &&
                    std::abs(100 * ta_ex - 80) <= 20;
    report(10, ok,
           std::string("PESSI_ONLY unstable for all d<=14us: ") + (pessi_unstable ? "yes" : "no") +
               "; best stable goodput PESSI_ONLY " + fmt(gp) + " Gb/s (need 42+-10%), FULL " + fmt(gf) +
               " Gb/s (need 46+-10%); TRIM_ALL first stable at " + fmt(ta_d, 0) + " us (need >= 12) with excess " +
               fmt(100 * ta_ex, 1) + "% (need 80+-20 pts)");
  });

  guarded(11, [&] {
    const auto values = range_us(1, 30);
    bool ok = true;
    std::string detail;
    for (std::int32_t n : {32, 64}) {
      const auto origin = duration_sweep(n, PolicyVariant::Full, SignalFanout::OriginPipe, values);
      const auto all = duration_sweep(n, PolicyVariant::Full, SignalFanout::AllPipes, values);
      double min_stable = -1;
      for (const auto& r : origin) {
        if (r.run.max_dod_queue <= 500) {
          min_stable = r.value;
          break;
        }
      }
      // Stability must hold from the first stable duration onwards.
      for (const auto& r : origin) {
        if (min_stable >= 0 && r.value >= min_stable && r.run.max_dod_queue > 500) ok = false;
      }
      double least_extra = 1e9;
      for (std::size_t i = 0; i < origin.size(); ++i) {
        if (origin[i].value < 9) continue;
        const double extra = static_cast<double>(origin[i].run.trims) / static_cast<double>(all[i].run.trims) - 1.0;
        least_extra = std::min(least_extra, extra);
      }
      ok = ok && min_stable >= 9 && least_extra >= 0.08;
      detail += (detail.empty() ? "" : "; ") + std::to_string(n) + " senders: ORIGIN_PIPE stable from " +
                fmt(min_stable, 0) + " us (need >= 9), min extra trims vs ALL_PIPES for d>=9us " +
                fmt(100 * least_extra, 1) + "% (need >= 8%)";
    }
    report(11, ok, detail);
  });

  guarded(12, [&] {
    const auto m = run_scenario(trim_split());
    const auto ingress = m.counters.ingress_trims;
    const auto dod = m.counters.dod_trims;
    const double ratio = dod ? static_cast<double>(ingress) / static_cast<double>(dod) : 0.0;
    report(12, dod > 0 && ratio >= 15 && ratio <= 25,
           "ingress:DoD trims " + std::to_string(ingress) + ":" + std::to_string(dod) + " = " + fmt(ratio) +
               ":1 over " + std::to_string(m.sent) + " packets (need [15, 25])");
  });

  guarded(13, [&] {
    int cases = 0;
    const std::vector<std::pair<std::string, oracle::Check>> checks = {
        {"meter fluid oracle", oracle::meter_fluid_conformance(1)},
        {"meter long-run rate", oracle::meter_long_run_rate()},
        {"two-meter table", oracle::two_meter_table_exhaustive(&cases)},
        {"state-machine decay", oracle::state_machine_decay(1)},
        {"CDF vs sort", oracle::cdf_matches_sort_oracle(1)},
        {"event ordering", oracle::event_ordering(1)},
    };
    bool ok = cases == 27;
    std::string detail;
    for (const auto& [name, c] : checks) {
      ok = ok && c.ok;
      detail += (detail.empty() ? "" : ", ") + name + (c.ok ? " ok" : " FAILED (" + c.detail + ")");
    }
    report(13, ok, detail + "; " + std::to_string(cases) + " table cases");
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
