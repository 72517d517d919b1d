#pragma once

// gNB-side E2 endpoint, split in two halves joined by a datagram boundary:
//
//   E2Termination  owns the RIC-facing stream: setup with backoff,
//                  subscriptions, indications, control acks.
//   SmTask         lives next to the scheduler: ships telemetry windows up,
//                  applies SPS commands coming down.
//
// Boundary datagram: u8 direction | body
//   0x01 SM_UPLINK    body = encoded KPM_REPORT
//   0x02 SM_DOWNLINK  body = encoded SPS_CONTROL
//   0x03 ACK_STATUS   body = u8 status (0 ok, 1 rejected)

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "oranlab/domain.hpp"
#include "oranlab/e2_codec.hpp"
#include "oranlab/mac_sim.hpp"
#include "oranlab/transport.hpp"

namespace oranlab::agent {

using Micros = std::chrono::microseconds;
using std::chrono::milliseconds;

enum class Direction : std::uint8_t {
  kSmUplink = 0x01,
  kSmDownlink = 0x02,
  kAckStatus = 0x03,
};

struct BoundaryMsg {
  Direction direction = Direction::kSmUplink;
  e2::Bytes body;

  bool operator==(const BoundaryMsg&) const = default;
};

e2::Bytes encode_boundary(const BoundaryMsg& msg);
// Throws e2::CodecError on an empty or unknown datagram.
BoundaryMsg decode_boundary(e2::ByteView datagram);

// Service-model half, co-located with the scheduler. Talks to the simulator
// only through its thread-safe inbox/outbox.
class SmTask {
 public:
  SmTask(mac::Simulator& sim, transport::DatagramChannel& boundary)
      : sim_(sim), boundary_(boundary) {}

  // Forwards emitted reports and applies pending commands. Returns true if
  // any work was done.
  bool poll();

  std::uint64_t uplinks_sent() const { return uplinks_sent_; }
  std::uint64_t commands_applied() const { return commands_applied_; }

 private:
  mac::Simulator& sim_;
  transport::DatagramChannel& boundary_;
  std::uint64_t uplinks_sent_ = 0;
  std::uint64_t commands_applied_ = 0;
};

struct AgentConfig {
  GnbId gnb_id = 1;
  std::uint16_t ran_function_id = e2::kDefaultRanFunctionId;
  // Control acks not returned by the SM task within 2x this are failed.
  milliseconds report_period{100};
  milliseconds min_subscription_period{10};
  milliseconds backoff_base{500};
  milliseconds backoff_cap{8000};
};

// Opens a new stream to the RIC, or nullptr if it is unreachable.
using Connector = std::function<transport::StreamPtr()>;

enum class SessionState { kDisconnected, kAwaitingSetup, kEstablished };

class E2Termination {
 public:
  E2Termination(AgentConfig config, Connector connect,
                transport::DatagramChannel& boundary);

  // Drives connection management, inbound frames, boundary traffic and
  // timers. Returns true if any work was done.
  bool poll(Micros now);
  void shutdown();

  SessionState state() const { return state_; }
  const AgentConfig& config() const { return config_; }

  struct Counters {
    std::uint64_t connect_attempts = 0;
    std::uint64_t setup_rejections = 0;
    std::uint64_t sessions_established = 0;
    std::uint64_t uplinks_received = 0;
    std::uint64_t uplinks_while_subscribed = 0;
    std::uint64_t indications_sent = 0;
    std::uint64_t control_timeouts = 0;
    std::uint64_t malformed_frames = 0;
  };
  const Counters& counters() const { return counters_; }
  std::size_t subscription_count() const { return subscriptions_.size(); }
  // Time of the next connection attempt while disconnected.
  Micros next_attempt() const { return next_attempt_; }

 private:
  struct Subscription {
    std::uint32_t id = 0;
    std::uint32_t period_ms = 0;
    std::uint32_t accumulated_ms = 0;
    KpmReport pending;
  };
  struct PendingControl {
    std::uint16_t txid = 0;
    e2::Bytes payload;
    Micros deadline{0};
  };

  bool try_connect(Micros now);
  void schedule_retry(Micros now);
  void send(const e2::Frame& frame);
  void drop_session(Micros now);
  void handle_frame(const e2::Frame& frame, Micros now);
  void handle_subscription(const e2::Frame& frame);
  void handle_control(const e2::Frame& frame, Micros now);
  void handle_uplink(const e2::Bytes& body);
  void handle_ack_status(const e2::Bytes& body);
  void dispatch_control(Micros now);
  void expire_control(Micros now);

  AgentConfig config_;
  Connector connect_;
  transport::DatagramChannel& boundary_;

  transport::StreamPtr stream_;
  e2::FrameReader reader_;
  SessionState state_ = SessionState::kDisconnected;
  int retry_ = 0;
  Micros next_attempt_{0};
  std::optional<Micros> resend_setup_at_;
  std::uint16_t next_txid_ = 0;

  std::uint32_t next_subscription_id_ = 1;
  std::vector<Subscription> subscriptions_;

  // One control in flight across the boundary at a time, so that status
  // datagrams can be matched in order even when one is lost.
  std::optional<PendingControl> in_flight_;
  std::deque<PendingControl> waiting_;

  Counters counters_;
};

}  // namespace oranlab::agent
