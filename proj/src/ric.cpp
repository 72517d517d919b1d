#include "oranlab/ric.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace oranlab::ric {

void XappQueue::push(RoutedMessage msg) {
  std::lock_guard lock(mutex_);
  if (items_.size() >= capacity_) {
    items_.pop_front();
    ++dropped_;
  }
  items_.push_back(std::move(msg));
}

std::optional<RoutedMessage> XappQueue::pop() {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  RoutedMessage msg = std::move(items_.front());
  items_.pop_front();
  return msg;
}

std::size_t XappQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

std::uint64_t XappQueue::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

Ric::Ric(RicConfig config) : config_(config) {}
Ric::~Ric() = default;

void Ric::attach(transport::StreamPtr stream) {
  std::lock_guard lock(mutex_);
  attached_.push_back(std::move(stream));
}

XappId Ric::register_xapp(const std::string& name) {
  std::lock_guard lock(mutex_);
  const XappId id = next_xapp_++;
  queues_[id] = std::make_shared<XappQueue>(config_.queue_capacity);
  xapp_names_[id] = name;
  return id;
}

std::shared_ptr<XappQueue> Ric::queue(XappId xapp) const {
  std::lock_guard lock(mutex_);
  auto it = queues_.find(xapp);
  if (it == queues_.end()) {
    throw RicError("unknown xapp " + std::to_string(xapp));
  }
  return it->second;
}

std::vector<GnbId> Ric::gnb_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<GnbId> ids;
  for (const auto& [id, entry] : rnib_) {
    if (entry.state == ConnectionState::kConnected) ids.push_back(id);
  }
  return ids;
}

std::vector<RnibEntry> Ric::rnib() const {
  std::lock_guard lock(mutex_);
  std::vector<RnibEntry> out;
  for (const auto& [id, entry] : rnib_) out.push_back(entry);
  return out;
}

std::optional<Subscription> Ric::subscription(std::uint32_t id) const {
  std::lock_guard lock(mutex_);
  auto it = subscriptions_.find(id);
  if (it == subscriptions_.end()) return std::nullopt;
  return it->second.info;
}

Ric::Counters Ric::counters() const {
  std::lock_guard lock(mutex_);
  return counters_;
}

std::uint32_t Ric::subscribe(XappId xapp, GnbId gnb, std::uint32_t period_ms) {
  std::lock_guard lock(mutex_);
  if (!queues_.contains(xapp)) {
    throw RicError("unknown xapp " + std::to_string(xapp));
  }
  auto it = rnib_.find(gnb);
  if (it == rnib_.end() || it->second.state != ConnectionState::kConnected) {
    throw RicError("gNB " + std::to_string(gnb) + " is not connected");
  }
  const std::uint32_t id = next_subscription_++;
  SubscriptionRecord rec;
  rec.info = {id, xapp, gnb, period_ms, SubscriptionState::kPending};
  rec.session = it->second.session;
  subscriptions_[id] = rec;
  Outbound out{Outbound::Kind::kSubscribe, xapp, gnb, id, 0, {}, period_ms};
  outbound_.push_back(std::move(out));
  return id;
}

RequestToken Ric::route_control(XappId xapp, GnbId gnb, e2::Bytes sm_payload) {
  std::lock_guard lock(mutex_);
  if (!queues_.contains(xapp)) {
    throw RicError("unknown xapp " + std::to_string(xapp));
  }
  // A node that was seen but is gone gets a failure ack, not an exception.
  if (!rnib_.contains(gnb)) {
    throw RicError("unknown gNB " + std::to_string(gnb));
  }
  const RequestToken token = next_token_++;
  Outbound out{Outbound::Kind::kControl, xapp, gnb, 0, token,
               std::move(sm_payload), 0};
  outbound_.push_back(std::move(out));
  return token;
}

std::uint16_t Ric::allocate_txid() {
  // Skip identifiers still awaiting an answer after wraparound.
  for (int guard = 0; guard < 65536; ++guard) {
    const std::uint16_t txid = next_txid_++;
    if (!pending_controls_.contains(txid) && !pending_subs_.contains(txid)) {
      return txid;
    }
  }
  throw RicError("all transaction ids in flight");
}

void Ric::deliver(XappId xapp, RoutedMessage msg) {
  auto it = queues_.find(xapp);
  if (it != queues_.end()) it->second->push(std::move(msg));
}

void Ric::fail_control(const PendingControl& pc, e2::Cause cause,
                       bool timeout) {
  deliver(pc.xapp, ControlAckMsg{pc.token, pc.gnb,
                                 cause == e2::Cause::kOk ? e2::Cause::kReject
                                                         : cause,
                                 timeout});
}

Ric::Session* Ric::session_for(GnbId gnb) {
  auto it = rnib_.find(gnb);
  if (it == rnib_.end() || it->second.state != ConnectionState::kConnected) {
    return nullptr;
  }
  for (auto& s : sessions_) {
    if (s->id == it->second.session && !s->closed) return s.get();
  }
  return nullptr;
}

void Ric::send(Session& s, const e2::Frame& f) {
  if (s.closed) return;
  if (!s.stream->write(e2::encode_frame(f))) close_session(s, "write failed");
}

void Ric::close_session(Session& s, const char* why) {
  if (s.closed) return;
  s.closed = true;
  s.stream->close();
  spdlog::info("ric: session {} (gNB {}) closed: {}", s.id, s.gnb_id, why);

  auto entry = rnib_.find(s.gnb_id);
  if (entry != rnib_.end() && entry->second.session == s.id) {
    entry->second.state = ConnectionState::kLost;
  }
  for (auto it = pending_controls_.begin(); it != pending_controls_.end();) {
    if (it->second.session == s.id) {
      fail_control(it->second, e2::Cause::kReject, false);
      it = pending_controls_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = pending_subs_.begin(); it != pending_subs_.end();) {
    it = it->second.session == s.id ? pending_subs_.erase(it) : std::next(it);
  }
  for (auto& [id, rec] : subscriptions_) {
    if (rec.session != s.id) continue;
    if (rec.info.state == SubscriptionState::kActive ||
        rec.info.state == SubscriptionState::kPending) {
      rec.info.state = SubscriptionState::kLost;
      deliver(rec.info.xapp_id,
              SubscriptionMsg{id, rec.info.gnb_id, SubscriptionState::kLost,
                              e2::Cause::kReject});
    }
  }
}

void Ric::send_outbound(const Outbound& out, Micros now) {
  Session* s = session_for(out.gnb);
  if (out.kind == Outbound::Kind::kControl) {
    PendingControl pc{out.token, out.xapp, out.gnb, s ? s->id : 0,
                      now + config_.control_timeout};
    if (s == nullptr) {
      fail_control(pc, e2::Cause::kReject, false);
      return;
    }
    const std::uint16_t txid = allocate_txid();
    pending_controls_[txid] = pc;
    send(*s, e2::make_control_request(txid, out.gnb, out.payload));
    return;
  }
  auto& rec = subscriptions_.at(out.subscription_id);
  if (s == nullptr || s->id != rec.session) {
    rec.info.state = SubscriptionState::kLost;
    deliver(out.xapp, SubscriptionMsg{out.subscription_id, out.gnb,
                                      SubscriptionState::kLost,
                                      e2::Cause::kReject});
    return;
  }
  const std::uint16_t txid = allocate_txid();
  pending_subs_[txid] = {out.subscription_id, s->id};
  send(*s, e2::make_subscription_request(txid, out.gnb,
                                         e2::kDefaultRanFunctionId,
                                         out.period_ms));
}

void Ric::handle_setup(Session& s, const e2::Frame& f, Micros now) {
  const GnbId gnb = f.gnb_id();
  if (gnb == 0) {
    send(s, e2::make_setup_response(f.txid, e2::Cause::kReject));
    return;
  }
  auto it = rnib_.find(gnb);
  if (it != rnib_.end() && it->second.state == ConnectionState::kConnected &&
      it->second.session != s.id) {
    // A fresh setup for a known node supersedes the old session.
    for (auto& other : sessions_) {
      if (other->id == it->second.session) {
        close_session(*other, "superseded");
      }
    }
    ++counters_.superseded;
  }
  s.gnb_id = gnb;
  rnib_[gnb] = RnibEntry{gnb, s.id, {f.ran_function_id()},
                         ConnectionState::kConnected, now};
  ++counters_.setups;
  send(s, e2::make_setup_response(f.txid, e2::Cause::kOk));
}

void Ric::handle_frame(Session& s, const e2::Frame& f, Micros now) {
  using e2::MsgType;
  if (f.type == MsgType::kSetupRequest) {
    handle_setup(s, f, now);
    return;
  }
  if (s.gnb_id == 0) {
    send(s, e2::make_error(f.txid, e2::Cause::kMalformed));
    close_session(s, "frame before setup");
    return;
  }
  switch (f.type) {
    case MsgType::kSubscriptionResponse: {
      auto it = pending_subs_.find(f.txid);
      if (it == pending_subs_.end()) return;
      auto& rec = subscriptions_.at(it->second.subscription_id);
      pending_subs_.erase(it);
      if (f.cause() == e2::Cause::kOk) {
        rec.info.state = SubscriptionState::kActive;
        rec.agent_subscription_id = f.u32(e2::Tag::kSubscriptionId);
      } else {
        rec.info.state = SubscriptionState::kRejected;
      }
      deliver(rec.info.xapp_id,
              SubscriptionMsg{rec.info.subscription_id, rec.info.gnb_id,
                              rec.info.state, f.cause()});
      return;
    }
    case MsgType::kIndication: {
      const std::uint32_t agent_sub = f.u32(e2::Tag::kSubscriptionId);
      bool routed = false;
      for (auto& [id, rec] : subscriptions_) {
        if (rec.session == s.id && rec.agent_subscription_id == agent_sub &&
            rec.info.state == SubscriptionState::kActive) {
          deliver(rec.info.xapp_id,
                  IndicationMsg{s.gnb_id, id, f.bytes(e2::Tag::kSmPayload)});
          routed = true;
        }
      }
      ++(routed ? counters_.indications_routed
                : counters_.indications_unrouted);
      return;
    }
    case MsgType::kControlAck:
    case MsgType::kError: {
      auto it = pending_controls_.find(f.txid);
      if (it == pending_controls_.end()) {
        if (f.type == MsgType::kError) {
          spdlog::warn("ric: gNB {} reported error cause {}", s.gnb_id,
                       static_cast<int>(f.cause()));
        }
        return;
      }
      const PendingControl pc = it->second;
      pending_controls_.erase(it);
      if (f.type == MsgType::kControlAck) {
        deliver(pc.xapp, ControlAckMsg{pc.token, pc.gnb, f.cause(), false});
      } else {
        fail_control(pc, f.cause(), false);
      }
      return;
    }
    default:
      send(s, e2::make_error(f.txid, e2::Cause::kMalformed));
      return;
  }
}

bool Ric::poll_session(Session& s, Micros now) {
  if (s.closed) return false;
  e2::Bytes incoming;
  const bool open = s.stream->read_some(incoming);
  bool worked = !incoming.empty();
  s.reader.feed(incoming);
  for (;;) {
    try {
      auto frame = s.reader.next();
      if (!frame) break;
      handle_frame(s, *frame, now);
    } catch (const e2::CodecError& err) {
      ++counters_.malformed;
      spdlog::warn("ric: malformed frame on session {}: {}", s.id,
                   err.what());
      send(s, e2::make_error(0, e2::Cause::kMalformed));
      close_session(s, "malformed frame");
      return true;
    }
    if (s.closed) return true;
  }
  if (!open) {
    close_session(s, "stream lost");
    worked = true;
  }
  return worked;
}

bool Ric::poll(Micros now) {
  std::lock_guard lock(mutex_);
  bool worked = false;

  for (auto& stream : attached_) {
    auto s = std::make_unique<Session>();
    s->id = next_session_++;
    s->stream = std::move(stream);
    sessions_.push_back(std::move(s));
    worked = true;
  }
  attached_.clear();

  // Index loop: handling a frame may close sibling sessions.
  for (std::size_t i = 0; i < sessions_.size(); ++i) {
    worked |= poll_session(*sessions_[i], now);
  }
  std::erase_if(sessions_, [](const auto& s) { return s->closed; });

  while (!outbound_.empty()) {
    Outbound out = std::move(outbound_.front());
    outbound_.pop_front();
    send_outbound(out, now);
    worked = true;
  }

  for (auto it = pending_controls_.begin(); it != pending_controls_.end();) {
    if (now >= it->second.deadline) {
      ++counters_.control_timeouts;
      fail_control(it->second, e2::Cause::kReject, true);
      it = pending_controls_.erase(it);
      worked = true;
    } else {
      ++it;
    }
  }
  return worked;
}

}  // namespace oranlab::ric
