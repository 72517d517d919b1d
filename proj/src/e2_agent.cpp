#include "oranlab/e2_agent.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace oranlab::agent {

e2::Bytes encode_boundary(const BoundaryMsg& msg) {
  e2::Bytes out;
  out.reserve(1 + msg.body.size());
  out.push_back(static_cast<std::uint8_t>(msg.direction));
  out.insert(out.end(), msg.body.begin(), msg.body.end());
  return out;
}

BoundaryMsg decode_boundary(e2::ByteView datagram) {
  if (datagram.empty()) {
    throw e2::CodecError(e2::CodecErrorKind::kTruncated, "empty datagram");
  }
  const std::uint8_t dir = datagram[0];
  if (dir < 0x01 || dir > 0x03) {
    throw e2::CodecError(e2::CodecErrorKind::kInvalidValue,
                         "boundary direction " + std::to_string(dir));
  }
  BoundaryMsg msg{static_cast<Direction>(dir),
                  e2::Bytes(datagram.begin() + 1, datagram.end())};
  if (msg.body.empty()) {
    throw e2::CodecError(e2::CodecErrorKind::kTruncated,
                         "boundary message without body");
  }
  if (msg.direction == Direction::kAckStatus && msg.body.size() != 1) {
    throw e2::CodecError(e2::CodecErrorKind::kBadFieldWidth,
                         "ACK_STATUS carries one status byte");
  }
  return msg;
}

bool SmTask::poll() {
  bool worked = false;
  while (auto report = sim_.pop_report()) {
    boundary_.send(encode_boundary(
        {Direction::kSmUplink, e2::encode_sm_payload(*report)}));
    ++uplinks_sent_;
    worked = true;
  }
  while (auto datagram = boundary_.receive()) {
    worked = true;
    std::uint8_t status = static_cast<std::uint8_t>(mac::AckStatus::kRejected);
    try {
      const BoundaryMsg msg = decode_boundary(*datagram);
      if (msg.direction != Direction::kSmDownlink) continue;
      const auto payload = e2::decode_sm_payload(msg.body);
      if (const auto* cmd = std::get_if<SpsCommand>(&payload)) {
        const mac::SpsAck ack = sim_.apply_sps_command(*cmd);
        status = static_cast<std::uint8_t>(ack.status);
        if (!ack.ignored.empty()) {
          spdlog::debug("sps command ignored {} unknown UE(s)",
                        ack.ignored.size());
        }
        if (ack.status == mac::AckStatus::kOk) ++commands_applied_;
      }
    } catch (const e2::CodecError& err) {
      spdlog::warn("sm task: bad downlink datagram: {}", err.what());
    }
    boundary_.send(encode_boundary({Direction::kAckStatus, {status}}));
  }
  return worked;
}

E2Termination::E2Termination(AgentConfig config, Connector connect,
                             transport::DatagramChannel& boundary)
    : config_(std::move(config)),
      connect_(std::move(connect)),
      boundary_(boundary) {
  if (config_.gnb_id == 0) throw DomainError("gnb_id must be > 0");
}

namespace {
Micros backoff(const AgentConfig& cfg, int retry) {
  auto delay = cfg.backoff_base;
  for (int i = 0; i < retry && delay < cfg.backoff_cap; ++i) delay *= 2;
  return std::min(delay, cfg.backoff_cap);
}
}  // namespace

void E2Termination::send(const e2::Frame& frame) {
  if (stream_ && !stream_->write(e2::encode_frame(frame))) {
    spdlog::warn("agent {}: stream write failed", config_.gnb_id);
  }
}

void E2Termination::schedule_retry(Micros now) {
  next_attempt_ = now + backoff(config_, retry_);
  ++retry_;
}

bool E2Termination::try_connect(Micros now) {
  ++counters_.connect_attempts;
  stream_ = connect_();
  if (!stream_) {
    schedule_retry(now);
    return false;
  }
  reader_ = e2::FrameReader{};
  state_ = SessionState::kAwaitingSetup;
  resend_setup_at_.reset();
  send(e2::make_setup_request(next_txid_++, config_.gnb_id,
                              config_.ran_function_id));
  return true;
}

void E2Termination::drop_session(Micros now) {
  if (stream_) stream_->close();
  stream_.reset();
  state_ = SessionState::kDisconnected;
  subscriptions_.clear();
  in_flight_.reset();
  waiting_.clear();
  resend_setup_at_.reset();
  retry_ = 0;
  next_attempt_ = now;
}

void E2Termination::shutdown() {
  if (stream_) stream_->close();
  stream_.reset();
  state_ = SessionState::kDisconnected;
  subscriptions_.clear();
}

bool E2Termination::poll(Micros now) {
  bool worked = false;

  if (!stream_ && now >= next_attempt_) worked |= try_connect(now);

  if (stream_) {
    e2::Bytes incoming;
    const bool open = stream_->read_some(incoming);
    if (!incoming.empty()) {
      worked = true;
      reader_.feed(incoming);
    }
    for (;;) {
      try {
        auto frame = reader_.next();
        if (!frame) break;
        handle_frame(*frame, now);
      } catch (const e2::CodecError& err) {
        ++counters_.malformed_frames;
        spdlog::warn("agent {}: malformed frame: {}", config_.gnb_id,
                     err.what());
        send(e2::make_error(0, e2::Cause::kMalformed));
      }
    }
    if (!open) {
      spdlog::info("agent {}: stream lost, re-running setup", config_.gnb_id);
      drop_session(now);
      worked = true;
    }
  }

  if (resend_setup_at_ && now >= *resend_setup_at_ && stream_) {
    resend_setup_at_.reset();
    send(e2::make_setup_request(next_txid_++, config_.gnb_id,
                                config_.ran_function_id));
    worked = true;
  }

  while (auto datagram = boundary_.receive()) {
    worked = true;
    try {
      const BoundaryMsg msg = decode_boundary(*datagram);
      if (msg.direction == Direction::kSmUplink) {
        handle_uplink(msg.body);
      } else if (msg.direction == Direction::kAckStatus) {
        handle_ack_status(msg.body);
      }
    } catch (const e2::CodecError& err) {
      spdlog::warn("agent {}: bad boundary datagram: {}", config_.gnb_id,
                   err.what());
    }
  }

  expire_control(now);
  if (!in_flight_ && !waiting_.empty()) {
    dispatch_control(now);
    worked = true;
  }
  return worked;
}

void E2Termination::handle_frame(const e2::Frame& frame, Micros now) {
  using e2::MsgType;
  switch (frame.type) {
    case MsgType::kSetupResponse:
      if (state_ != SessionState::kAwaitingSetup) return;
      if (frame.cause() == e2::Cause::kOk) {
        state_ = SessionState::kEstablished;
        retry_ = 0;
        ++counters_.sessions_established;
      } else {
        ++counters_.setup_rejections;
        resend_setup_at_ = now + backoff(config_, retry_);
        ++retry_;
      }
      return;
    case MsgType::kSubscriptionRequest:
      handle_subscription(frame);
      return;
    case MsgType::kControlRequest:
      handle_control(frame, now);
      return;
    case MsgType::kError:
      spdlog::warn("agent {}: RIC reported error cause {}", config_.gnb_id,
                   static_cast<int>(frame.cause()));
      return;
    default:
      send(e2::make_error(frame.txid, e2::Cause::kMalformed));
      return;
  }
}

void E2Termination::handle_subscription(const e2::Frame& frame) {
  if (state_ != SessionState::kEstablished) {
    send(e2::make_subscription_response(frame.txid, 0, e2::Cause::kReject));
    return;
  }
  if (frame.ran_function_id() != config_.ran_function_id) {
    send(e2::make_subscription_response(frame.txid, 0,
                                        e2::Cause::kUnknownFunction));
    return;
  }
  const std::uint32_t period = frame.u32(e2::Tag::kReportPeriodMs);
  if (milliseconds(period) < config_.min_subscription_period) {
    send(e2::make_subscription_response(frame.txid, 0, e2::Cause::kReject));
    return;
  }
  Subscription sub;
  sub.id = next_subscription_id_++;
  sub.period_ms = period;
  subscriptions_.push_back(sub);
  send(e2::make_subscription_response(frame.txid, sub.id, e2::Cause::kOk));
}

void E2Termination::handle_control(const e2::Frame& frame, Micros now) {
  if (state_ != SessionState::kEstablished ||
      frame.gnb_id() != config_.gnb_id) {
    send(e2::make_control_ack(frame.txid, e2::Cause::kReject));
    return;
  }
  const e2::Bytes& payload = frame.bytes(e2::Tag::kSmPayload);
  bool valid = false;
  try {
    valid = std::holds_alternative<SpsCommand>(e2::decode_sm_payload(payload));
  } catch (const e2::CodecError&) {
    valid = false;
  }
  if (!valid) {
    send(e2::make_control_ack(frame.txid, e2::Cause::kMalformed));
    return;
  }
  waiting_.push_back({frame.txid, payload, Micros{0}});
  if (!in_flight_) dispatch_control(now);
}

void E2Termination::dispatch_control(Micros now) {
  if (in_flight_ || waiting_.empty()) return;
  in_flight_ = std::move(waiting_.front());
  waiting_.pop_front();
  in_flight_->deadline = now + 2 * config_.report_period;
  boundary_.send(encode_boundary({Direction::kSmDownlink, in_flight_->payload}));
}

void E2Termination::expire_control(Micros now) {
  if (!in_flight_ || now < in_flight_->deadline) return;
  ++counters_.control_timeouts;
  spdlog::warn("agent {}: SM task did not acknowledge control txid {}",
               config_.gnb_id, in_flight_->txid);
  send(e2::make_error(in_flight_->txid, e2::Cause::kReject));
  in_flight_.reset();
}

void E2Termination::handle_ack_status(const e2::Bytes& body) {
  if (!in_flight_) return;  // late status for a control already timed out
  const auto cause = body[0] == 0 ? e2::Cause::kOk : e2::Cause::kReject;
  send(e2::make_control_ack(in_flight_->txid, cause));
  in_flight_.reset();
}

void E2Termination::handle_uplink(const e2::Bytes& body) {
  ++counters_.uplinks_received;
  if (state_ != SessionState::kEstablished || subscriptions_.empty()) return;
  ++counters_.uplinks_while_subscribed;

  KpmReport report;
  try {
    auto payload = e2::decode_sm_payload(body);
    if (!std::holds_alternative<KpmReport>(payload)) return;
    report = std::get<KpmReport>(std::move(payload));
  } catch (const e2::CodecError& err) {
    spdlog::warn("agent {}: bad uplink payload: {}", config_.gnb_id,
                 err.what());
    return;
  }

  for (auto& sub : subscriptions_) {
    if (sub.accumulated_ms == 0 && report.period_ms >= sub.period_ms) {
      send(e2::make_indication(next_txid_++, config_.gnb_id, sub.id, body));
      ++counters_.indications_sent;
      continue;
    }
    // Longer subscription periods aggregate consecutive windows.
    for (const auto& rec : report.records) {
      auto it = std::find_if(
          sub.pending.records.begin(), sub.pending.records.end(),
          [&](const KpmRecord& r) { return r.ue_id == rec.ue_id; });
      if (it == sub.pending.records.end()) {
        sub.pending.records.push_back(rec);
      } else {
        it->prb_slots += rec.prb_slots;
        it->tbs_bits += rec.tbs_bits;
      }
    }
    sub.accumulated_ms += report.period_ms;
    if (sub.accumulated_ms >= sub.period_ms) {
      sub.pending.period_ms = sub.accumulated_ms;
      send(e2::make_indication(next_txid_++, config_.gnb_id, sub.id,
                               e2::encode_sm_payload(sub.pending)));
      ++counters_.indications_sent;
      sub.pending = KpmReport{};
      sub.accumulated_ms = 0;
    }
  }
}

}  // namespace oranlab::agent
