#include <gtest/gtest.h>

#include <chrono>
#include <set>
#include <thread>

#include "oranlab/xapp_sdk.hpp"

using namespace oranlab;
using namespace std::chrono_literals;
using transport::Bytes;

namespace {

struct Agent {
  transport::StreamPtr stream;
  e2::FrameReader reader;

  Agent(ric::Ric& ric, GnbId gnb) {
    auto [a, b] = transport::make_stream_pair();
    ric.attach(std::move(b));
    stream = std::move(a);
    stream->write(e2::encode_frame(e2::make_setup_request(0, gnb)));
    ric.poll(0us);
    frames();
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
};

}  // namespace

TEST(GnbList, EmptyWithoutAgents) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  EXPECT_TRUE(h.get_gnb_id_list().empty());
}

TEST(GnbList, SingleAndAscending) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  Agent five(ric, 5);
  EXPECT_EQ(h.get_gnb_id_list(), std::vector<GnbId>{5});
  Agent two(ric, 2);
  Agent one(ric, 1);
  EXPECT_EQ(h.get_gnb_id_list(), (std::vector<GnbId>{1, 2, 5}));
}

TEST(Handles, DistinctIdsAndNames) {
  ric::Ric ric;
  sdk::XappHandle a(ric, "a");
  sdk::XappHandle b(ric, "b");
  EXPECT_NE(a.id(), b.id());
  EXPECT_EQ(b.name(), "b");
}

TEST(Queue, EmptyThenSingleIndication) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  EXPECT_FALSE(h.get_queued_rx_msg().has_value());
  Agent g(ric, 1);
  const auto sub = h.e2ap_subscribe(1, 100);
  ric.poll(0us);
  const auto req = g.frames().at(0);
  g.send(e2::make_subscription_response(req.txid, 77, e2::Cause::kOk));
  ric.poll(0us);
  auto m = h.get_queued_rx_msg();
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<ric::SubscriptionMsg>(*m).state, ric::SubscriptionState::kActive);

  const Bytes payload = e2::encode_sm_payload(KpmReport{100, {{1, 5, 6}}});
  g.send(e2::make_indication(1, 1, 77, payload));
  ric.poll(1ms);
  m = h.get_queued_rx_msg();
  ASSERT_TRUE(m);
  const auto& ind = std::get<ric::IndicationMsg>(*m);
  EXPECT_EQ(ind.subscription_id, sub);
  EXPECT_EQ(ind.sm_payload, payload);
  EXPECT_FALSE(h.get_queued_rx_msg().has_value());
}

TEST(Queue, FifoOverTenAndExactlyOnce) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  Agent g(ric, 1);
  h.e2ap_subscribe(1, 100);
  ric.poll(0us);
  g.send(e2::make_subscription_response(g.frames().at(0).txid, 1, e2::Cause::kOk));
  ric.poll(0us);
  h.get_queued_rx_msg();

  for (std::uint32_t i = 0; i < 10; ++i) {
    g.send(e2::make_indication(static_cast<std::uint16_t>(i), 1, 1,
                               e2::encode_sm_payload(KpmReport{100, {{1, i, i}}})));
  }
  ric.poll(1ms);
  std::vector<std::uint32_t> order;
  while (auto m = h.get_queued_rx_msg()) {
    const auto& ind = std::get<ric::IndicationMsg>(*m);
    const auto rep = std::get<KpmReport>(e2::decode_sm_payload(ind.sm_payload));
    order.push_back(rep.records.at(0).prb_slots);
  }
  EXPECT_EQ(order, (std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  // Repeated polls return nothing further.
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(h.get_queued_rx_msg().has_value());
}

TEST(Control, TokensDistinctAndAckTagged) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  Agent g(ric, 1);
  const SpsCommand cmd{{{1, 10u}}};
  const auto t1 = h.e2ap_control_request(1, cmd);
  const auto t2 = h.e2ap_control_request(1, cmd);
  EXPECT_NE(t1, t2);
  ric.poll(0us);
  const auto reqs = g.frames();
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_EQ(std::get<SpsCommand>(e2::decode_sm_payload(reqs[0].bytes(e2::Tag::kSmPayload))), cmd);
  g.send(e2::make_control_ack(reqs[1].txid, e2::Cause::kOk));
  g.send(e2::make_control_ack(reqs[0].txid, e2::Cause::kReject));
  ric.poll(50ms);
  const auto a = std::get<ric::ControlAckMsg>(*h.get_queued_rx_msg());
  const auto b = std::get<ric::ControlAckMsg>(*h.get_queued_rx_msg());
  EXPECT_EQ(a.token, t2);
  EXPECT_TRUE(a.ok());
  EXPECT_EQ(b.token, t1);
  EXPECT_FALSE(b.ok());
}

TEST(Control, AckArrivesWithinTimeoutEvenIfAgentSilent) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  Agent g(ric, 1);
  const auto t = h.e2ap_control_request(1, SpsCommand{{{1, 1u}}});
  ric.poll(0us);
  ric.poll(200ms);
  const auto m = h.get_queued_rx_msg();
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<ric::ControlAckMsg>(*m).token, t);
  EXPECT_TRUE(std::get<ric::ControlAckMsg>(*m).timed_out);
}

TEST(Control, UnknownGnbIsImmediateError) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  EXPECT_THROW(h.e2ap_control_request(3, SpsCommand{}), ric::RicError);
  EXPECT_THROW(h.e2ap_subscribe(3, 100), ric::RicError);
}

TEST(NonBlocking, QueuePollDoesNotWaitOnStalledRic) {
  ric::Ric ric;
  sdk::XappHandle h(ric, "x");
  ric.queue(h.id())->push(ric::SubscriptionMsg{42});

  std::atomic<bool> locked{false};
  std::atomic<bool> release{false};
  std::thread staller([&] {
    auto lock = ric.hold_state_lock();
    locked.store(true);
    while (!release.load()) std::this_thread::sleep_for(1ms);
  });
  while (!locked.load()) std::this_thread::yield();

  const auto t0 = std::chrono::steady_clock::now();
  const auto first = h.get_queued_rx_msg();
  const auto second = h.get_queued_rx_msg();
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  release.store(true);
  staller.join();

  ASSERT_TRUE(first);
  EXPECT_EQ(std::get<ric::SubscriptionMsg>(*first).subscription_id, 42u);
  EXPECT_FALSE(second);
  EXPECT_LT(elapsed, 10ms);
}

TEST(Queue, OverflowCountedOnHandle) {
  ric::RicConfig cfg;
  cfg.queue_capacity = 4;
  ric::Ric ric(cfg);
  sdk::XappHandle h(ric, "x");
  for (std::uint32_t i = 0; i < 6; ++i) ric.queue(h.id())->push(ric::SubscriptionMsg{i});
  EXPECT_EQ(h.dropped_messages(), 2u);
  EXPECT_EQ(std::get<ric::SubscriptionMsg>(*h.get_queued_rx_msg()).subscription_id, 2u);
}
