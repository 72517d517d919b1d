#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "oranlab/e2_agent.hpp"

using namespace oranlab;
using namespace oranlab::agent;
using namespace std::chrono_literals;
using transport::Bytes;

namespace {

// The RIC end of one agent session, driven by hand.
struct FakeRic {
  transport::StreamPtr stream;
  e2::FrameReader reader;

  std::vector<e2::Frame> frames() {
    Bytes in;
    stream->read_some(in);
    reader.feed(in);
    std::vector<e2::Frame> out;
    while (auto f = reader.next()) out.push_back(*f);
    return out;
  }
  void send(const e2::Frame& f) { stream->write(e2::encode_frame(f)); }
};

// Hands out the agent end of fresh in-memory streams, keeping the RIC ends.
struct Dialer {
  std::vector<transport::StreamPtr> peers;
  bool refuse = false;
  std::shared_ptr<Bytes> record;

  Connector connector() {
    return [this]() -> transport::StreamPtr {
      if (refuse) return nullptr;
      auto [a, b] = transport::make_stream_pair();
      peers.push_back(std::move(b));
      if (record) return std::make_unique<transport::RecordingStream>(std::move(a), record);
      return std::move(a);
    };
  }
};

mac::SimConfig three_ues() {
  mac::SimConfig cfg;
  for (UeId id = 1; id <= 3; ++id) cfg.ues.push_back({id, 200, {{0.0, 100.0}}});
  return cfg;
}

// Brings an agent to the established state and returns the RIC end.
FakeRic establish(E2Termination& term, Dialer& dialer, Micros now = Micros{0}) {
  term.poll(now);
  FakeRic ric{std::move(dialer.peers.back()), {}};
  auto fs = ric.frames();
  EXPECT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs.at(0).type, e2::MsgType::kSetupRequest);
  ric.send(e2::make_setup_response(fs.at(0).txid, e2::Cause::kOk));
  term.poll(now);
  EXPECT_EQ(term.state(), SessionState::kEstablished);
  return ric;
}

e2::Frame single(FakeRic& ric) {
  auto fs = ric.frames();
  EXPECT_EQ(fs.size(), 1u);
  return fs.empty() ? e2::Frame{} : fs.front();
}

}  // namespace

TEST(Boundary, EncodeDecode) {
  const BoundaryMsg m{Direction::kAckStatus, {0}};
  EXPECT_EQ(encode_boundary(m), (Bytes{0x03, 0x00}));
  EXPECT_EQ(decode_boundary(encode_boundary(m)), m);
  EXPECT_THROW(decode_boundary(Bytes{}), e2::CodecError);
  EXPECT_THROW(decode_boundary(Bytes{0x09, 1}), e2::CodecError);
  EXPECT_THROW(decode_boundary(Bytes{0x03, 0, 0}), e2::CodecError);
}

TEST(Setup, BackoffWhileRicUnreachable) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  dialer.refuse = true;
  E2Termination term({}, dialer.connector(), *up);
  term.poll(0ms);
  EXPECT_EQ(term.counters().connect_attempts, 1u);
  EXPECT_EQ(term.next_attempt(), Micros(500ms));
  term.poll(499ms);
  EXPECT_EQ(term.counters().connect_attempts, 1u);
  term.poll(500ms);
  EXPECT_EQ(term.counters().connect_attempts, 2u);
  EXPECT_EQ(term.next_attempt(), Micros(1500ms));
  term.poll(1500ms);
  EXPECT_EQ(term.counters().connect_attempts, 3u);
  EXPECT_EQ(term.state(), SessionState::kDisconnected);

  dialer.refuse = false;
  term.poll(term.next_attempt());
  EXPECT_EQ(term.state(), SessionState::kAwaitingSetup);
}

TEST(Setup, BackoffIsCapped) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  dialer.refuse = true;
  E2Termination term({}, dialer.connector(), *up);
  Micros t{0};
  for (int i = 0; i < 12; ++i) {
    term.poll(t);
    const Micros next = term.next_attempt();
    EXPECT_LE(next - t, Micros(8000ms));
    t = next;
  }
}

TEST(Setup, RejectedSetupIsRetriedAfterBackoff) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  AgentConfig cfg;
  cfg.gnb_id = 7;
  E2Termination term(cfg, dialer.connector(), *up);
  term.poll(0ms);
  FakeRic ric{std::move(dialer.peers.back()), {}};
  const auto req = single(ric);
  EXPECT_EQ(req.gnb_id(), 7u);
  ric.send(e2::make_setup_response(req.txid, e2::Cause::kReject));
  term.poll(10ms);
  EXPECT_EQ(term.counters().setup_rejections, 1u);
  EXPECT_EQ(term.state(), SessionState::kAwaitingSetup);
  term.poll(509ms);
  EXPECT_TRUE(ric.frames().empty());
  term.poll(510ms);
  const auto again = single(ric);
  EXPECT_EQ(again.type, e2::MsgType::kSetupRequest);
  ric.send(e2::make_setup_response(again.txid, e2::Cause::kOk));
  term.poll(511ms);
  EXPECT_EQ(term.state(), SessionState::kEstablished);
  EXPECT_EQ(term.counters().sessions_established, 1u);
}

TEST(Setup, StreamLossTriggersReconnect) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  ric.stream->close();
  term.poll(50ms);
  // Reconnects immediately on the next poll.
  term.poll(50ms);
  EXPECT_EQ(term.state(), SessionState::kAwaitingSetup);
  EXPECT_EQ(dialer.peers.size(), 2u);
}

TEST(Subscription, PeriodFloorFunctionAndDuplicates) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);

  ric.send(e2::make_subscription_request(10, 1, 1, 5));
  term.poll(1ms);
  auto r = single(ric);
  EXPECT_EQ(r.type, e2::MsgType::kSubscriptionResponse);
  EXPECT_EQ(r.txid, 10);
  EXPECT_EQ(r.cause(), e2::Cause::kReject);

  ric.send(e2::make_subscription_request(11, 1, 9, 100));
  term.poll(1ms);
  EXPECT_EQ(single(ric).cause(), e2::Cause::kUnknownFunction);

  ric.send(e2::make_subscription_request(12, 1, 1, 100));
  term.poll(1ms);
  r = single(ric);
  EXPECT_EQ(r.cause(), e2::Cause::kOk);
  const auto first = r.u32(e2::Tag::kSubscriptionId);

  ric.send(e2::make_subscription_request(13, 1, 1, 100));
  term.poll(1ms);
  r = single(ric);
  EXPECT_EQ(r.cause(), e2::Cause::kOk);
  EXPECT_NE(r.u32(e2::Tag::kSubscriptionId), first);
  EXPECT_EQ(term.subscription_count(), 2u);
}

TEST(Control, MalformedPayloadIsRejectedWithCause3) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  ric.send(e2::make_control_request(21, 1, Bytes{0x02, 0x00}));
  term.poll(1ms);
  const auto ack = single(ric);
  EXPECT_EQ(ack.type, e2::MsgType::kControlAck);
  EXPECT_EQ(ack.txid, 21);
  EXPECT_EQ(ack.cause(), e2::Cause::kMalformed);
  EXPECT_FALSE(down->receive().has_value());
}

TEST(Control, MalformedFrameGetsErrorCause3) {
  auto [up, down] = transport::make_datagram_pair();
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  ric.stream->write(Bytes{0, 0, 0, 3, 0x42, 0, 1});
  term.poll(1ms);
  const auto err = single(ric);
  EXPECT_EQ(err.type, e2::MsgType::kError);
  EXPECT_EQ(err.cause(), e2::Cause::kMalformed);
  EXPECT_EQ(term.counters().malformed_frames, 1u);
  EXPECT_EQ(term.state(), SessionState::kEstablished);
}

TEST(Control, CommandReachesSimulatorAndIsAcked) {
  mac::Simulator sim(three_ues());
  auto [up, down] = transport::make_datagram_pair();
  SmTask sm(sim, *down);
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);

  const SpsCommand cmd{{{1, 20u}, {2, std::nullopt}}};
  ric.send(e2::make_control_request(30, 1, e2::encode_sm_payload(cmd)));
  term.poll(1ms);
  sm.poll();
  term.poll(1ms);
  const auto ack = single(ric);
  EXPECT_EQ(ack.type, e2::MsgType::kControlAck);
  EXPECT_EQ(ack.txid, 30);
  EXPECT_EQ(ack.cause(), e2::Cause::kOk);
  EXPECT_EQ(sm.commands_applied(), 1u);
  EXPECT_EQ(sim.step_tti().find(1)->prbs, 20);
}

TEST(Control, DroppedDownlinkTimesOutWithError) {
  mac::Simulator sim(three_ues());
  auto [up, down] = transport::make_datagram_pair();
  transport::LossyChannel lossy(std::move(up));
  lossy.drop_next(static_cast<std::uint8_t>(Direction::kSmDownlink));
  SmTask sm(sim, *down);
  Dialer dialer;
  E2Termination term({}, dialer.connector(), lossy);
  FakeRic ric = establish(term, dialer);

  ric.send(e2::make_control_request(40, 1, e2::encode_sm_payload(SpsCommand{{{1, 5u}}})));
  term.poll(10ms);
  sm.poll();
  term.poll(209ms);
  EXPECT_TRUE(ric.frames().empty());
  term.poll(210ms);
  const auto err = single(ric);
  EXPECT_EQ(err.type, e2::MsgType::kError);
  EXPECT_EQ(err.txid, 40);
  EXPECT_EQ(term.counters().control_timeouts, 1u);
  EXPECT_EQ(lossy.dropped(), 1);

  // The next control goes through normally.
  ric.send(e2::make_control_request(41, 1, e2::encode_sm_payload(SpsCommand{{{1, 5u}}})));
  term.poll(220ms);
  sm.poll();
  term.poll(221ms);
  const auto ack = single(ric);
  EXPECT_EQ(ack.txid, 41);
  EXPECT_EQ(ack.cause(), e2::Cause::kOk);
}

TEST(Control, QueuedControlsAckedInOrder) {
  mac::Simulator sim(three_ues());
  auto [up, down] = transport::make_datagram_pair();
  SmTask sm(sim, *down);
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  for (std::uint16_t t = 50; t < 55; ++t) {
    ric.send(e2::make_control_request(t, 1, e2::encode_sm_payload(SpsCommand{{{1, t}}})));
  }
  std::vector<std::uint16_t> acked;
  for (int i = 0; i < 20; ++i) {
    term.poll(2ms);
    sm.poll();
    for (const auto& f : ric.frames()) acked.push_back(f.txid);
  }
  EXPECT_EQ(acked, (std::vector<std::uint16_t>{50, 51, 52, 53, 54}));
}

TEST(Telemetry, EveryWindowBecomesOneIndication) {
  mac::Simulator sim(three_ues());
  auto [up, down] = transport::make_datagram_pair();
  SmTask sm(sim, *down);
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  ric.send(e2::make_subscription_request(1, 1, 1, 100));
  term.poll(0ms);
  ric.frames();

  std::vector<KpmReport> expected;
  sim.set_report_observer([&](const KpmReport& r) { expected.push_back(r); });
  std::vector<KpmReport> got;
  for (int slot = 0; slot < 10000; ++slot) {
    sim.step_tti();
    sm.poll();
    term.poll(sim.now());
    for (const auto& f : ric.frames()) {
      ASSERT_EQ(f.type, e2::MsgType::kIndication);
      got.push_back(std::get<KpmReport>(e2::decode_sm_payload(f.bytes(e2::Tag::kSmPayload))));
    }
  }
  EXPECT_EQ(expected.size(), 50u);
  EXPECT_EQ(got, expected);
  EXPECT_EQ(term.counters().uplinks_received, sm.uplinks_sent());
  EXPECT_EQ(term.counters().indications_sent, 50u);
}

TEST(Telemetry, LongerPeriodAggregatesWindows) {
  mac::Simulator sim(three_ues());
  auto [up, down] = transport::make_datagram_pair();
  SmTask sm(sim, *down);
  Dialer dialer;
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  ric.send(e2::make_subscription_request(1, 1, 1, 300));
  term.poll(0ms);
  ric.frames();
  std::vector<KpmReport> got;
  for (int slot = 0; slot < 1200; ++slot) {
    sim.step_tti();
    sm.poll();
    term.poll(sim.now());
    for (const auto& f : ric.frames()) {
      got.push_back(std::get<KpmReport>(e2::decode_sm_payload(f.bytes(e2::Tag::kSmPayload))));
    }
  }
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].period_ms, 300u);
  std::uint32_t slots = 0;
  for (const auto& r : got[0].records) slots += r.prb_slots;
  EXPECT_EQ(slots, 65u * 600u);  // 600 slots of 500 us
}

namespace {

// Runs a fixed script against one agent and returns every byte it wrote to
// the RIC. The boundary is either in-memory or real UDP sockets.
Bytes scripted_session(bool use_udp) {
  mac::Simulator sim(three_ues());
  transport::DatagramPtr up;
  transport::DatagramPtr down;
  if (use_udp) {
    auto pair = transport::make_udp_pair();
    up = std::move(pair.first);
    down = std::move(pair.second);
  } else {
    std::tie(up, down) = transport::make_datagram_pair();
  }
  SmTask sm(sim, *down);
  Dialer dialer;
  dialer.record = std::make_shared<Bytes>();
  E2Termination term({}, dialer.connector(), *up);
  FakeRic ric = establish(term, dialer);
  ric.send(e2::make_subscription_request(1, 1, 1, 100));

  // Waits for the boundary to settle: every uplink received, no control
  // outstanding.
  auto settle = [&](std::size_t acks_expected, std::size_t& acks_seen) {
    for (int spin = 0; spin < 5000; ++spin) {
      sm.poll();
      term.poll(sim.now());
      for (const auto& f : ric.frames()) {
        if (f.type == e2::MsgType::kControlAck) ++acks_seen;
      }
      if (term.counters().uplinks_received == sm.uplinks_sent() &&
          acks_seen == acks_expected) {
        return;
      }
      if (use_udp) std::this_thread::sleep_for(std::chrono::microseconds(100));
    }
    ADD_FAILURE() << "boundary did not settle";
  };

  std::size_t acks = 0;
  settle(0, acks);
  for (int window = 0; window < 8; ++window) {
    if (window == 3) {
      ric.send(e2::make_control_request(
          100, 1, e2::encode_sm_payload(SpsCommand{{{1, 30u}, {2, 10u}}})));
      settle(1, acks);
    }
    if (window == 6) {
      ric.send(e2::make_control_request(
          101, 1, e2::encode_sm_payload(SpsCommand{{{1, std::nullopt}}})));
      settle(2, acks);
    }
    for (int s = 0; s < 200; ++s) sim.step_tti();
    settle(acks, acks);
  }
  return *dialer.record;
}

}  // namespace

TEST(ProcessSplit, UdpBoundaryIsTransparent) {
  const Bytes in_memory = scripted_session(false);
  const Bytes over_udp = scripted_session(true);
  EXPECT_GT(in_memory.size(), 500u);
  EXPECT_EQ(in_memory, over_udp);
}
