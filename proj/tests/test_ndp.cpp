#include <gtest/gtest.h>

#include <map>
#include <random>
#include <vector>

#include "trimsim/ndp.hpp"

using namespace trimsim;

namespace {

struct SenderRig {
  Simulator sim;
  std::vector<std::pair<SimTime, Packet>> arrivals;
  Sender tx;

  SenderRig(std::int64_t total, std::int64_t iw, HostConfig host = {})
      : tx(sim, Flow{0, 0, 1, total, iw}, host, 2, 9,
           [this](Packet p) { arrivals.emplace_back(sim.now(), p); }) {}
};

Packet data(std::int32_t flow, std::int64_t seq) {
  Packet p;
  p.flow_id = flow;
  p.seqno = seq;
  return p;
}

Packet pull(std::int64_t seq = -1) {
  Packet p;
  p.kind = PacketKind::Pull;
  p.seqno = seq;
  return p;
}

}  // namespace

TEST(Sender, InitialWindowLeavesAtLineRate) {
  SenderRig r(1000, 1000);
  r.tx.start();
  r.sim.run();
  ASSERT_EQ(r.arrivals.size(), 1000u);
  for (std::size_t k = 0; k < r.arrivals.size(); ++k) {
    ASSERT_EQ(r.arrivals[k].first, static_cast<SimTime>(k + 1) * 120'000 + nanoseconds(500));
    ASSERT_EQ(r.arrivals[k].second.seqno, static_cast<std::int64_t>(k));
  }
  EXPECT_EQ(r.tx.last_departure(), microseconds(120));
  EXPECT_EQ(r.arrivals[0].second.ingress_pipe, 2);
  EXPECT_EQ(r.arrivals[0].second.egress_port, 9);
}

TEST(Sender, InitialWindowAtQuarterRate) {
  HostConfig h;
  h.link_rate = gbps(25);
  SenderRig r(1000, 1000, h);
  r.tx.start();
  r.sim.run();
  EXPECT_EQ(r.tx.last_departure(), microseconds(480));
}

TEST(Sender, RetransmissionsGoFirst) {
  SenderRig r(10, 2);
  r.tx.start();
  r.sim.run();
  r.tx.on_pull(pull(1));
  r.tx.on_pull(pull());
  r.sim.run();
  ASSERT_EQ(r.arrivals.size(), 4u);
  EXPECT_EQ(r.arrivals[2].second.seqno, 1);
  EXPECT_TRUE(r.arrivals[2].second.retransmission);
  EXPECT_EQ(r.arrivals[3].second.seqno, 2);
  EXPECT_FALSE(r.arrivals[3].second.retransmission);
  EXPECT_EQ(r.tx.rtx_count(), 1);
  EXPECT_EQ(r.tx.sent_data(), 4);
}

TEST(Sender, FinishesAndStops) {
  SenderRig r(3, 2);
  r.tx.start();
  r.tx.on_pull(pull());
  r.tx.on_pull(pull());
  r.sim.run();
  EXPECT_EQ(r.tx.sent_data(), 3);
  r.tx.on_pull(pull(0));
  r.tx.stop();
  r.tx.on_pull(pull(1));
  r.sim.run();
  EXPECT_EQ(r.tx.sent_data(), 4);
  EXPECT_THROW(r.tx.start(), std::logic_error);
}

TEST(ReceiverPort, OnePullPerMtuTimeRoundRobin) {
  Simulator sim;
  std::vector<std::pair<SimTime, Packet>> pulls;
  ReceiverPort rx(sim, 0, 120'000, microseconds(1000), [&](Packet p) { pulls.emplace_back(sim.now(), p); });
  for (int f = 0; f < 4; ++f) rx.add_flow(f, 100);
  for (int f = 0; f < 4; ++f) rx.on_receive(data(f, 0));
  rx.on_receive(data(0, 1));
  sim.run();
  ASSERT_EQ(pulls.size(), 5u);
  const std::int32_t order[] = {0, 1, 2, 3, 0};
  for (std::size_t i = 0; i < pulls.size(); ++i) {
    EXPECT_EQ(pulls[i].first, static_cast<SimTime>(i) * 120'000);
    EXPECT_EQ(pulls[i].second.flow_id, order[i]);
    EXPECT_EQ(pulls[i].second.kind, PacketKind::Pull);
    EXPECT_EQ(pulls[i].second.seqno, -1);
  }
}

TEST(ReceiverPort, HeaderTriggersRetransmitPull) {
  Simulator sim;
  std::vector<Packet> pulls;
  ReceiverPort rx(sim, 0, 120'000, microseconds(1000), [&](Packet p) { pulls.push_back(p); });
  rx.add_flow(0, 10);
  rx.on_receive(trim(data(0, 7), TrimOrigin::Dod));
  sim.run();
  ASSERT_EQ(pulls.size(), 1u);
  EXPECT_EQ(pulls[0].seqno, 7);
  EXPECT_EQ(rx.flows().at(0).headers, 1);
}

TEST(ReceiverPort, DuplicatesEarnNothing) {
  Simulator sim;
  int pulls = 0;
  ReceiverPort rx(sim, 0, 120'000, microseconds(1000), [&](Packet) { ++pulls; });
  rx.add_flow(0, 10);
  rx.on_receive(data(0, 3));
  rx.on_receive(data(0, 3));
  sim.run();
  EXPECT_EQ(pulls, 1);
  EXPECT_EQ(rx.flows().at(0).duplicates, 1);
  EXPECT_EQ(rx.flows().at(0).unique_packets, 1);
}

TEST(ReceiverPort, CompletionAndWindowBytes) {
  Simulator sim;
  ReceiverPort rx(sim, 0, 120'000, 1000, [](Packet) {});
  rx.add_flow(0, 2);
  sim.schedule_at(1000, [&]() { rx.on_receive(data(0, 1)); });
  sim.schedule_at(1001, [&]() { rx.on_receive(data(0, 0)); });
  sim.run();
  const auto& f = rx.flows().at(0);
  EXPECT_EQ(f.completion, 1001);
  EXPECT_EQ(f.bytes_in_window, 1500);
}

TEST(ReceiverPort, StopSilencesPacer) {
  Simulator sim;
  int pulls = 0;
  ReceiverPort rx(sim, 0, 120'000, microseconds(1000), [&](Packet) { ++pulls; });
  rx.add_flow(0, 10);
  rx.on_receive(data(0, 0));
  rx.on_receive(data(0, 1));
  sim.run_until(0);
  rx.stop();
  sim.run();
  EXPECT_EQ(pulls, 1);
}

TEST(ReceiverPort, RejectsUnexpectedInput) {
  Simulator sim;
  ReceiverPort rx(sim, 0, 120'000, 1, [](Packet) {});
  EXPECT_THROW(rx.on_receive(data(5, 0)), std::logic_error);
  rx.add_flow(5, 1);
  EXPECT_THROW(rx.on_receive(pull()), std::logic_error);
  EXPECT_THROW(ReceiverPort(sim, 0, 0, 1, [](Packet) {}), std::invalid_argument);
}

// Random arrival patterns: pulls never exceed one per interval, and among
// flows that stay backlogged the pull counts never differ by more than one.
TEST(ReceiverPort, PacingAndFairnessUnderRandomArrivals) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Simulator sim;
    const int n_flows = static_cast<int>(std::uniform_int_distribution<int>(1, 16)(rng));
    const SimTime interval = std::uniform_int_distribution<SimTime>(1'000, 200'000)(rng);
    ReceiverPort rx(sim, 0, interval, microseconds(10'000), [](Packet) {});
    rx.keep_pull_log(true);
    std::vector<std::int64_t> seq(static_cast<std::size_t>(n_flows), 0);
    for (int f = 0; f < n_flows; ++f) rx.add_flow(f, kUnboundedFlow);
    // Every flow gets far more credits than the horizon can serve.
    const int per_flow = 200;
    std::uniform_int_distribution<SimTime> when(0, interval * 10);
    for (int f = 0; f < n_flows; ++f) {
      for (int k = 0; k < per_flow; ++k) {
        sim.schedule_at(when(rng), [&rx, &seq, f]() { rx.on_receive(data(f, seq[static_cast<std::size_t>(f)]++)); });
      }
    }
    sim.run_until(interval * 10 + 1);
    const auto& log = rx.pull_log();
    for (std::size_t i = 1; i < log.size(); ++i) {
      ASSERT_GE(log[i].first - log[i - 1].first, interval);
    }
    // After the last arrival every flow is backlogged, so from there the
    // service is strict round robin.
    sim.run_until(interval * 10 + interval * n_flows * 20);
    std::map<std::int32_t, int> tail;
    const std::size_t from = log.size() - static_cast<std::size_t>(n_flows) * 10;
    for (std::size_t i = from; i < log.size(); ++i) ++tail[log[i].second];
    ASSERT_EQ(static_cast<int>(tail.size()), n_flows);
    for (const auto& [flow, count] : tail) ASSERT_EQ(count, 10) << "flow " << flow;
  }
}
