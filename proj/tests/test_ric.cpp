#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include "oranlab/e2_agent.hpp"
#include "oranlab/ric.hpp"

using namespace oranlab;
using namespace oranlab::ric;
using namespace std::chrono_literals;
using transport::Bytes;

namespace {

// Agent side of one session, scripted by the test.
struct FakeAgent {
  transport::StreamPtr stream;
  e2::FrameReader reader;

  static FakeAgent attach(Ric& ric) {
    auto [agent_end, ric_end] = transport::make_stream_pair();
    ric.attach(std::move(ric_end));
    return FakeAgent{std::move(agent_end), {}};
  }

  std::vector<e2::Frame> frames() {
    Bytes in;
    stream->read_some(in);
    reader.feed(in);
    std::vector<e2::Frame> out;
    while (auto f = reader.next()) out.push_back(*f);
    return out;
  }
  void send(const e2::Frame& f) { stream->write(e2::encode_frame(f)); }
  bool open() {
    Bytes in;
    const bool o = stream->read_some(in);
    reader.feed(in);
    return o;
  }

  void setup(Ric& ric, GnbId gnb) {
    send(e2::make_setup_request(0, gnb));
    ric.poll(0us);
    const auto fs = frames();
    ASSERT_EQ(fs.size(), 1u);
    ASSERT_EQ(fs[0].type, e2::MsgType::kSetupResponse);
    ASSERT_EQ(fs[0].cause(), e2::Cause::kOk);
  }

  // Accepts every pending SUB_REQ, numbering agent-side ids from `next`.
  std::vector<std::uint32_t> accept_subscriptions(Ric& ric, std::uint32_t& next) {
    ric.poll(0us);
    std::vector<std::uint32_t> ids;
    for (const auto& f : frames()) {
      if (f.type != e2::MsgType::kSubscriptionRequest) continue;
      ids.push_back(next);
      send(e2::make_subscription_response(f.txid, next++, e2::Cause::kOk));
    }
    ric.poll(0us);
    return ids;
  }
};

std::vector<RoutedMessage> drain(XappQueue& q) {
  std::vector<RoutedMessage> out;
  while (auto m = q.pop()) out.push_back(std::move(*m));
  return out;
}

template <class T>
std::vector<T> only(const std::vector<RoutedMessage>& msgs) {
  std::vector<T> out;
  for (const auto& m : msgs) {
    if (const auto* p = std::get_if<T>(&m)) out.push_back(*p);
  }
  return out;
}

Bytes report_bytes(std::uint32_t marker) {
  return e2::encode_sm_payload(KpmReport{100, {{1, marker, marker}}});
}

}  // namespace

TEST(Queue, DropOldestOnOverflow) {
  XappQueue q(3);
  for (std::uint32_t i = 0; i < 5; ++i) q.push(SubscriptionMsg{i});
  EXPECT_EQ(q.dropped(), 2u);
  EXPECT_EQ(q.size(), 3u);
  EXPECT_EQ(std::get<SubscriptionMsg>(*q.pop()).subscription_id, 2u);
}

TEST(Queue, DefaultCapacityIs1024) {
  Ric ric;
  auto q = ric.queue(ric.register_xapp("x"));
  for (std::uint32_t i = 0; i < 1030; ++i) q->push(SubscriptionMsg{i});
  EXPECT_EQ(q->size(), 1024u);
  EXPECT_EQ(q->dropped(), 6u);
}

TEST(Rnib, OneAgent) {
  Ric ric;
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  ASSERT_EQ(ric.rnib().size(), 1u);
  EXPECT_EQ(ric.rnib()[0].gnb_id, 1u);
  EXPECT_EQ(ric.rnib()[0].ran_function_ids, std::vector<std::uint16_t>{1});
  EXPECT_EQ(ric.gnb_ids(), std::vector<GnbId>{1});
}

TEST(Rnib, TwoAgentsListedAscending) {
  Ric ric;
  auto a = FakeAgent::attach(ric);
  auto b = FakeAgent::attach(ric);
  a.setup(ric, 2);
  b.setup(ric, 1);
  EXPECT_EQ(ric.gnb_ids(), (std::vector<GnbId>{1, 2}));
}

TEST(Rnib, ReconnectSupersedesOldSession) {
  Ric ric;
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  const auto old_session = ric.rnib()[0].session;
  auto b = FakeAgent::attach(ric);
  b.setup(ric, 1);
  ASSERT_EQ(ric.rnib().size(), 1u);
  EXPECT_NE(ric.rnib()[0].session, old_session);
  EXPECT_EQ(ric.counters().superseded, 1u);
  EXPECT_FALSE(a.open());
  EXPECT_EQ(ric.gnb_ids(), std::vector<GnbId>{1});
}

TEST(Rnib, ListTracksSetupAndTeardownInOrder) {
  Ric ric;
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  EXPECT_EQ(ric.gnb_ids(), std::vector<GnbId>{1});
  auto b = FakeAgent::attach(ric);
  b.setup(ric, 2);
  EXPECT_EQ(ric.gnb_ids(), (std::vector<GnbId>{1, 2}));
  a.stream->close();
  ric.poll(1ms);
  EXPECT_EQ(ric.gnb_ids(), std::vector<GnbId>{2});
  auto c = FakeAgent::attach(ric);
  c.setup(ric, 3);
  EXPECT_EQ(ric.gnb_ids(), (std::vector<GnbId>{2, 3}));
  b.stream->close();
  ric.poll(2ms);
  EXPECT_EQ(ric.gnb_ids(), std::vector<GnbId>{3});
}

TEST(Session, MalformedFrameGetsErrorAndClose) {
  Ric ric;
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  a.stream->write(Bytes{0, 0, 0, 3, 0x55, 0, 0});
  ric.poll(1ms);
  const auto fs = a.frames();
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].type, e2::MsgType::kError);
  EXPECT_EQ(fs[0].cause(), e2::Cause::kMalformed);
  EXPECT_FALSE(a.open());
  EXPECT_EQ(ric.counters().malformed, 1u);
  EXPECT_TRUE(ric.gnb_ids().empty());
}

TEST(Session, FrameBeforeSetupIsRefused) {
  Ric ric;
  auto a = FakeAgent::attach(ric);
  a.send(e2::make_indication(3, 1, 1, report_bytes(1)));
  ric.poll(0us);
  const auto fs = a.frames();
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].type, e2::MsgType::kError);
  EXPECT_FALSE(a.open());
  EXPECT_TRUE(ric.rnib().empty());
}

TEST(Subscribe, UnknownOrLostGnbIsError) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  EXPECT_THROW(ric.subscribe(x, 9, 100), RicError);
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  a.stream->close();
  ric.poll(1ms);
  EXPECT_THROW(ric.subscribe(x, 1, 100), RicError);
}

TEST(Subscribe, AgentRejectIsPropagated) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  const auto id = ric.subscribe(x, 1, 5);
  EXPECT_EQ(ric.subscription(id)->state, SubscriptionState::kPending);
  ric.poll(0us);
  const auto req = a.frames().at(0);
  EXPECT_EQ(req.u32(e2::Tag::kReportPeriodMs), 5u);
  a.send(e2::make_subscription_response(req.txid, 0, e2::Cause::kReject));
  ric.poll(0us);
  const auto msgs = only<SubscriptionMsg>(drain(*ric.queue(x)));
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0].state, SubscriptionState::kRejected);
  EXPECT_EQ(msgs[0].cause, e2::Cause::kReject);
  EXPECT_EQ(ric.subscription(id)->state, SubscriptionState::kRejected);
}

TEST(Subscribe, IdsAreUniqueAndMonotonic) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  auto a = FakeAgent::attach(ric);
  a.setup(ric, 1);
  std::uint32_t prev = 0;
  for (int i = 0; i < 20; ++i) {
    const auto id = ric.subscribe(x, 1, 100);
    EXPECT_GT(id, prev);
    prev = id;
  }
}

TEST(Routing, IndicationReachesExactlyTheSubscribedSet) {
  Ric ric;
  const XappId xa = ric.register_xapp("a");
  const XappId xb = ric.register_xapp("b");
  const XappId xc = ric.register_xapp("c");
  auto g1 = FakeAgent::attach(ric);
  auto g2 = FakeAgent::attach(ric);
  g1.setup(ric, 1);
  g2.setup(ric, 2);
  const auto sa = ric.subscribe(xa, 1, 100);
  const auto sb = ric.subscribe(xb, 1, 100);
  const auto sc = ric.subscribe(xc, 2, 100);
  std::uint32_t next1 = 100;
  std::uint32_t next2 = 200;
  const auto agent1 = g1.accept_subscriptions(ric, next1);
  const auto agent2 = g2.accept_subscriptions(ric, next2);
  ASSERT_EQ(agent1.size(), 2u);
  ASSERT_EQ(agent2.size(), 1u);
  for (XappId x : {xa, xb, xc}) drain(*ric.queue(x));

  // g1 emits one indication per subscription (as the real agent does); g2
  // emits one; plus one for a subscription nobody holds.
  g1.send(e2::make_indication(1, 1, agent1[0], report_bytes(11)));
  g1.send(e2::make_indication(2, 1, agent1[1], report_bytes(12)));
  g2.send(e2::make_indication(3, 2, agent2[0], report_bytes(21)));
  g2.send(e2::make_indication(4, 2, 999, report_bytes(99)));
  ric.poll(1ms);

  auto received = [&](XappId x) {
    std::set<std::pair<GnbId, std::uint32_t>> s;
    for (const auto& m : only<IndicationMsg>(drain(*ric.queue(x)))) {
      s.insert({m.gnb_id, m.subscription_id});
    }
    return s;
  };
  using Set = std::set<std::pair<GnbId, std::uint32_t>>;
  EXPECT_EQ(received(xa), (Set{{1, sa}}));
  EXPECT_EQ(received(xb), (Set{{1, sb}}));
  EXPECT_EQ(received(xc), (Set{{2, sc}}));
  EXPECT_EQ(ric.counters().indications_routed, 3u);
  EXPECT_EQ(ric.counters().indications_unrouted, 1u);
}

TEST(Routing, CadenceWithRealAgentAndTwoXapps) {
  Ric ric;
  const XappId xa = ric.register_xapp("a");
  const XappId xb = ric.register_xapp("b");

  mac::SimConfig sc;
  for (UeId id = 1; id <= 3; ++id) sc.ues.push_back({id, 200, {{0.0, 10.0}}});
  mac::Simulator sim(sc);
  auto [up, down] = transport::make_datagram_pair();
  agent::SmTask sm(sim, *down);
  agent::E2Termination term(
      {},
      [&ric]() -> transport::StreamPtr {
        auto [a, b] = transport::make_stream_pair();
        ric.attach(std::move(b));
        return std::move(a);
      },
      *up);

  auto settle = [&](Micros now) {
    for (int i = 0; i < 50; ++i) {
      bool w = sm.poll();
      w |= term.poll(now);
      w |= ric.poll(now);
      if (!w) break;
    }
  };
  settle(0us);
  ASSERT_EQ(ric.gnb_ids(), std::vector<GnbId>{1});
  ric.subscribe(xa, 1, 100);
  ric.subscribe(xb, 1, 100);
  settle(0us);
  ASSERT_EQ(term.subscription_count(), 2u);
  drain(*ric.queue(xa));
  drain(*ric.queue(xb));

  for (int slot = 0; slot < 2000; ++slot) {  // 1 s
    sim.step_tti();
    settle(sim.now());
  }
  const auto a = only<IndicationMsg>(drain(*ric.queue(xa)));
  const auto b = only<IndicationMsg>(drain(*ric.queue(xb)));
  EXPECT_GE(a.size(), 9u);
  EXPECT_LE(a.size(), 11u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].sm_payload, b[i].sm_payload);
}

TEST(Control, AckCorrelationUnderPermutation) {
  std::mt19937_64 rng(7);
  for (int k = 1; k <= 8; ++k) {
    for (int trial = 0; trial < 20; ++trial) {
      Ric ric;
      auto g = FakeAgent::attach(ric);
      g.setup(ric, 1);
      std::vector<XappId> xapps;
      std::vector<RequestToken> tokens;
      for (int i = 0; i < k; ++i) {
        xapps.push_back(ric.register_xapp("x" + std::to_string(i)));
        // The payload identifies the issuer to the fake agent.
        tokens.push_back(ric.route_control(
            xapps.back(), 1,
            e2::encode_sm_payload(SpsCommand{{{1, static_cast<std::uint32_t>(i)}}})));
      }
      ric.poll(1ms);
      auto reqs = g.frames();
      ASSERT_EQ(reqs.size(), static_cast<std::size_t>(k));
      std::shuffle(reqs.begin(), reqs.end(), rng);
      for (const auto& r : reqs) {
        const auto cmd = std::get<SpsCommand>(e2::decode_sm_payload(r.bytes(e2::Tag::kSmPayload)));
        const std::uint32_t issuer = *cmd.entries.at(0).fixed_prbs;
        g.send(e2::make_control_ack(r.txid, issuer % 2 ? e2::Cause::kReject : e2::Cause::kOk));
      }
      ric.poll(2ms);
      for (int i = 0; i < k; ++i) {
        const auto acks = only<ControlAckMsg>(drain(*ric.queue(xapps[i])));
        ASSERT_EQ(acks.size(), 1u) << "k=" << k << " issuer " << i;
        EXPECT_EQ(acks[0].token, tokens[i]);
        EXPECT_EQ(acks[0].ok(), i % 2 == 0);
        EXPECT_FALSE(acks[0].timed_out);
      }
    }
  }
}

TEST(Control, ErrorFrameWithTxidFailsThatControl) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  auto g = FakeAgent::attach(ric);
  g.setup(ric, 1);
  const auto token = ric.route_control(x, 1, e2::encode_sm_payload(SpsCommand{{{1, 3u}}}));
  ric.poll(0us);
  const auto req = g.frames().at(0);
  g.send(e2::make_error(req.txid, e2::Cause::kReject));
  ric.poll(1ms);
  const auto acks = only<ControlAckMsg>(drain(*ric.queue(x)));
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].token, token);
  EXPECT_FALSE(acks[0].ok());
}

TEST(Control, TimeoutSynthesizesFailureAck) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  auto g = FakeAgent::attach(ric);
  g.setup(ric, 1);
  const auto token = ric.route_control(x, 1, e2::encode_sm_payload(SpsCommand{{{1, 3u}}}));
  ric.poll(0us);
  ric.poll(199ms);
  EXPECT_EQ(ric.queue(x)->size(), 0u);
  ric.poll(200ms);
  const auto acks = only<ControlAckMsg>(drain(*ric.queue(x)));
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].token, token);
  EXPECT_TRUE(acks[0].timed_out);
  EXPECT_EQ(ric.counters().control_timeouts, 1u);

  // A late ack for the expired txid is dropped.
  g.send(e2::make_control_ack(g.frames().at(0).txid, e2::Cause::kOk));
  ric.poll(300ms);
  EXPECT_EQ(ric.queue(x)->size(), 0u);
}

TEST(Control, DisconnectedGnbGivesFailureAck) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  EXPECT_THROW(ric.route_control(x, 4, {}), RicError);
  auto g = FakeAgent::attach(ric);
  g.setup(ric, 4);
  g.stream->close();
  ric.poll(1ms);
  const auto token = ric.route_control(x, 4, e2::encode_sm_payload(SpsCommand{}));
  ric.poll(2ms);
  const auto acks = only<ControlAckMsg>(drain(*ric.queue(x)));
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].token, token);
  EXPECT_FALSE(acks[0].ok());
  EXPECT_FALSE(acks[0].timed_out);
}

TEST(Control, SessionLossFailsInFlightAndMarksSubscriptionsLost) {
  Ric ric;
  const XappId x = ric.register_xapp("x");
  auto g = FakeAgent::attach(ric);
  g.setup(ric, 1);
  const auto sub = ric.subscribe(x, 1, 100);
  std::uint32_t next = 1;
  g.accept_subscriptions(ric, next);
  drain(*ric.queue(x));
  const auto token = ric.route_control(x, 1, e2::encode_sm_payload(SpsCommand{{{1, 3u}}}));
  ric.poll(1ms);
  g.stream->close();
  ric.poll(2ms);
  const auto msgs = drain(*ric.queue(x));
  const auto acks = only<ControlAckMsg>(msgs);
  const auto subs = only<SubscriptionMsg>(msgs);
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].token, token);
  EXPECT_FALSE(acks[0].ok());
  ASSERT_EQ(subs.size(), 1u);
  EXPECT_EQ(subs[0].subscription_id, sub);
  EXPECT_EQ(subs[0].state, SubscriptionState::kLost);
}

TEST(Control, TxidWraparoundSkipsPendingIds) {
  RicConfig cfg;
  cfg.control_timeout = std::chrono::hours(1);
  Ric ric(cfg);
  const XappId x = ric.register_xapp("x");
  auto g = FakeAgent::attach(ric);
  g.setup(ric, 1);
  const Bytes payload = e2::encode_sm_payload(SpsCommand{{{1, 1u}}});

  ric.route_control(x, 1, payload);
  ric.poll(0us);
  const std::uint16_t stuck = g.frames().at(0).txid;

  std::set<std::uint16_t> seen;
  auto q = ric.queue(x);
  for (int i = 0; i < 65536; ++i) {
    const auto token = ric.route_control(x, 1, payload);
    ric.poll(0us);
    const auto f = g.frames().at(0);
    ASSERT_NE(f.txid, stuck);
    seen.insert(f.txid);
    g.send(e2::make_control_ack(f.txid, e2::Cause::kOk));
    ric.poll(0us);
    const auto acks = only<ControlAckMsg>(drain(*q));
    ASSERT_EQ(acks.size(), 1u);
    ASSERT_EQ(acks[0].token, token);
  }
  EXPECT_EQ(seen.size(), 65535u);
}
