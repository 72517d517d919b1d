#pragma once

// Near-real-time controller core: terminates agent sessions, keeps the node
// registry, and routes indications and control acknowledgments to xApp
// queues. xApps never run on the RIC thread; they poll their queues.

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oranlab/domain.hpp"
#include "oranlab/e2_codec.hpp"
#include "oranlab/transport.hpp"

namespace oranlab::ric {

using Micros = std::chrono::microseconds;
using XappId = std::uint32_t;
using RequestToken = std::uint64_t;

class RicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IndicationMsg {
  GnbId gnb_id = 0;
  std::uint32_t subscription_id = 0;
  e2::Bytes sm_payload;
};

struct ControlAckMsg {
  RequestToken token = 0;
  GnbId gnb_id = 0;
  e2::Cause cause = e2::Cause::kOk;
  bool timed_out = false;

  bool ok() const { return cause == e2::Cause::kOk && !timed_out; }
};

enum class SubscriptionState { kPending, kActive, kRejected, kLost };

struct SubscriptionMsg {
  std::uint32_t subscription_id = 0;
  GnbId gnb_id = 0;
  SubscriptionState state = SubscriptionState::kPending;
  e2::Cause cause = e2::Cause::kOk;
};

using RoutedMessage = std::variant<IndicationMsg, ControlAckMsg, SubscriptionMsg>;

// Bounded multi-producer FIFO; overflow evicts the oldest entry.
class XappQueue {
 public:
  explicit XappQueue(std::size_t capacity = 1024) : capacity_(capacity) {}

  void push(RoutedMessage msg);
  std::optional<RoutedMessage> pop();
  std::size_t size() const;
  std::uint64_t dropped() const;

 private:
  mutable std::mutex mutex_;
  std::deque<RoutedMessage> items_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
};

enum class ConnectionState { kConnected, kLost };

struct RnibEntry {
  GnbId gnb_id = 0;
  std::uint64_t session = 0;
  std::vector<std::uint16_t> ran_function_ids;
  ConnectionState state = ConnectionState::kConnected;
  Micros connected_at{0};
};

struct Subscription {
  std::uint32_t subscription_id = 0;
  XappId xapp_id = 0;
  GnbId gnb_id = 0;
  std::uint32_t period_ms = 0;
  SubscriptionState state = SubscriptionState::kPending;
};

struct RicConfig {
  std::chrono::milliseconds control_timeout{200};
  std::size_t queue_capacity = 1024;
};

class Ric {
 public:
  explicit Ric(RicConfig config = {});
  ~Ric();

  Ric(const Ric&) = delete;
  Ric& operator=(const Ric&) = delete;

  // Hands an accepted agent connection to the RIC. Thread-safe.
  void attach(transport::StreamPtr stream);

  // Processes inbound frames, outbound requests and timers. Returns true if
  // any work was done.
  bool poll(Micros now);

  XappId register_xapp(const std::string& name);
  std::shared_ptr<XappQueue> queue(XappId xapp) const;

  // Connected node ids, ascending.
  std::vector<GnbId> gnb_ids() const;
  std::vector<RnibEntry> rnib() const;
  std::optional<Subscription> subscription(std::uint32_t id) const;

  // subscribe throws RicError unless the node is connected. route_control
  // throws only for a node never registered; a lost node yields a failure
  // ack. Outcomes arrive later through the xApp queue.
  std::uint32_t subscribe(XappId xapp, GnbId gnb, std::uint32_t period_ms);
  RequestToken route_control(XappId xapp, GnbId gnb, e2::Bytes sm_payload);

  // Blocks every RIC operation except queue access while held.
  std::unique_lock<std::mutex> hold_state_lock() const {
    return std::unique_lock(mutex_);
  }

  struct Counters {
    std::uint64_t setups = 0;
    std::uint64_t superseded = 0;
    std::uint64_t malformed = 0;
    std::uint64_t indications_routed = 0;
    std::uint64_t indications_unrouted = 0;
    std::uint64_t control_timeouts = 0;
  };
  Counters counters() const;

 private:
  struct Session {
    std::uint64_t id = 0;
    transport::StreamPtr stream;
    e2::FrameReader reader;
    GnbId gnb_id = 0;  // 0 until SETUP_REQ
    bool closed = false;
  };
  struct Outbound {
    enum class Kind { kSubscribe, kControl } kind;
    XappId xapp = 0;
    GnbId gnb = 0;
    std::uint32_t subscription_id = 0;
    RequestToken token = 0;
    e2::Bytes payload;
    std::uint32_t period_ms = 0;
  };
  struct PendingControl {
    RequestToken token = 0;
    XappId xapp = 0;
    GnbId gnb = 0;
    std::uint64_t session = 0;
    Micros deadline{0};
  };
  struct PendingSubscription {
    std::uint32_t subscription_id = 0;
    std::uint64_t session = 0;
  };
  struct SubscriptionRecord {
    Subscription info;
    std::uint64_t session = 0;
    std::uint32_t agent_subscription_id = 0;
  };

  bool poll_session(Session& s, Micros now);
  void handle_frame(Session& s, const e2::Frame& f, Micros now);
  void handle_setup(Session& s, const e2::Frame& f, Micros now);
  void close_session(Session& s, const char* why);
  void send(Session& s, const e2::Frame& f);
  void send_outbound(const Outbound& out, Micros now);
  Session* session_for(GnbId gnb);
  std::uint16_t allocate_txid();
  void deliver(XappId xapp, RoutedMessage msg);
  void fail_control(const PendingControl& pc, e2::Cause cause, bool timeout);

  RicConfig config_;
  mutable std::mutex mutex_;
  std::vector<std::unique_ptr<Session>> sessions_;
  std::vector<transport::StreamPtr> attached_;
  std::uint64_t next_session_ = 1;
  std::map<GnbId, RnibEntry> rnib_;
  std::map<XappId, std::shared_ptr<XappQueue>> queues_;
  std::map<XappId, std::string> xapp_names_;
  XappId next_xapp_ = 1;

  std::deque<Outbound> outbound_;
  std::map<std::uint16_t, PendingControl> pending_controls_;
  std::map<std::uint16_t, PendingSubscription> pending_subs_;
  std::map<std::uint32_t, SubscriptionRecord> subscriptions_;
  std::uint32_t next_subscription_ = 1;
  RequestToken next_token_ = 1;
  std::uint16_t next_txid_ = 0;
  Counters counters_;
};

}  // namespace oranlab::ric
