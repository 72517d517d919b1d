#include "oranlab/e2_codec.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace oranlab::e2 {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }
  void raw(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(read(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(read(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  std::uint64_t u64() { return read(8); }
  ByteView raw(std::size_t n) {
    need(n);
    auto view = in_.subspan(pos_, n);
    pos_ += n;
    return view;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw CodecError(CodecErrorKind::kTruncated,
                       "need " + std::to_string(n) + " bytes, have " +
                           std::to_string(remaining()));
    }
  }
  std::uint64_t read(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += n;
    return v;
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

// RAN_FUNCTION_ID is defaulted when absent, so it is not enforced on the
// wire for SETUP_REQ and SUB_REQ.
constexpr std::array<Tag, 1> kSetupReqTags{Tag::kGnbId};
constexpr std::array<Tag, 1> kCauseOnly{Tag::kCause};
constexpr std::array<Tag, 2> kSubReqTags{Tag::kGnbId, Tag::kReportPeriodMs};
constexpr std::array<Tag, 2> kSubRespTags{Tag::kCause, Tag::kSubscriptionId};
constexpr std::array<Tag, 3> kIndicationTags{Tag::kGnbId, Tag::kSmPayload,
                                             Tag::kSubscriptionId};
constexpr std::array<Tag, 2> kControlReqTags{Tag::kGnbId, Tag::kSmPayload};

// Fixed value width of a known tag, 0 for opaque or unknown tags.
std::size_t field_width(std::uint8_t tag) {
  switch (static_cast<Tag>(tag)) {
    case Tag::kGnbId: return 4;
    case Tag::kRanFunctionId: return 2;
    case Tag::kReportPeriodMs: return 4;
    case Tag::kCause: return 1;
    case Tag::kSubscriptionId: return 4;
    case Tag::kSmPayload: return 0;
  }
  return 0;
}

bool is_known_tag(std::uint8_t tag) { return tag >= 0x01 && tag <= 0x06; }

// Widths, duplicates and the mandatory table; shared by encoder and decoder.
void check_fields(const Frame& frame) {
  std::array<int, 7> counts{};
  for (const auto& tlv : frame.tlvs) {
    if (!is_known_tag(tlv.tag)) continue;
    const std::size_t width = field_width(tlv.tag);
    if (width != 0 && tlv.value.size() != width) {
      throw CodecError(CodecErrorKind::kBadFieldWidth,
                       "tag " + std::to_string(tlv.tag) + " expects " +
                           std::to_string(width) + " bytes, got " +
                           std::to_string(tlv.value.size()),
                       tlv.tag);
    }
    if (++counts[tlv.tag] > 1) {
      throw CodecError(CodecErrorKind::kDuplicateMandatory,
                       "tag " + std::to_string(tlv.tag) + " repeated",
                       tlv.tag);
    }
  }
  for (Tag tag : mandatory_tags(frame.type)) {
    if (counts[static_cast<std::uint8_t>(tag)] == 0) {
      throw CodecError(CodecErrorKind::kMissingMandatory,
                       to_string(frame.type) + " lacks tag " +
                           std::to_string(static_cast<int>(tag)),
                       static_cast<std::uint8_t>(tag));
    }
  }
}

Bytes be_bytes(std::uint64_t v, std::size_t width) {
  Bytes out(width);
  for (std::size_t i = 0; i < width; ++i) {
    out[width - 1 - i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
  return out;
}

std::uint64_t be_value(const Tlv& tlv, std::size_t width) {
  if (tlv.value.size() != width) {
    throw CodecError(CodecErrorKind::kBadFieldWidth,
                     "tag " + std::to_string(tlv.tag) + " has width " +
                         std::to_string(tlv.value.size()),
                     tlv.tag);
  }
  std::uint64_t v = 0;
  for (auto b : tlv.value) v = (v << 8) | b;
  return v;
}

}  // namespace

std::string to_string(MsgType type) {
  switch (type) {
    case MsgType::kSetupRequest: return "SETUP_REQ";
    case MsgType::kSetupResponse: return "SETUP_RESP";
    case MsgType::kSubscriptionRequest: return "SUB_REQ";
    case MsgType::kSubscriptionResponse: return "SUB_RESP";
    case MsgType::kIndication: return "INDICATION";
    case MsgType::kControlRequest: return "CONTROL_REQ";
    case MsgType::kControlAck: return "CONTROL_ACK";
    case MsgType::kError: return "ERROR";
  }
  return "UNKNOWN";
}

bool is_known_msg_type(std::uint8_t raw) {
  return (raw >= 0x01 && raw <= 0x07) || raw == 0x7F;
}

std::string to_string(CodecErrorKind kind) {
  switch (kind) {
    case CodecErrorKind::kTruncated: return "truncated";
    case CodecErrorKind::kTrailingBytes: return "trailing-bytes";
    case CodecErrorKind::kUnknownMsgType: return "unknown-msg-type";
    case CodecErrorKind::kTlvOverrun: return "tlv-overrun";
    case CodecErrorKind::kMissingMandatory: return "missing-mandatory";
    case CodecErrorKind::kDuplicateMandatory: return "duplicate-field";
    case CodecErrorKind::kBadFieldWidth: return "bad-field-width";
    case CodecErrorKind::kCountMismatch: return "count-mismatch";
    case CodecErrorKind::kUnknownSmType: return "unknown-sm-type";
    case CodecErrorKind::kFrameTooLarge: return "frame-too-large";
    case CodecErrorKind::kInvalidValue: return "invalid-value";
  }
  return "unknown";
}

CodecError::CodecError(CodecErrorKind kind, const std::string& detail,
                       std::optional<std::uint8_t> tag)
    : std::runtime_error(to_string(kind) + ": " + detail),
      kind_(kind),
      tag_(tag) {}

const Tlv* Frame::find(Tag tag) const {
  const auto raw = static_cast<std::uint8_t>(tag);
  for (const auto& tlv : tlvs) {
    if (tlv.tag == raw) return &tlv;
  }
  return nullptr;
}

namespace {
const Tlv& require(const Frame& f, Tag tag) {
  const Tlv* tlv = f.find(tag);
  if (tlv == nullptr) {
    throw CodecError(CodecErrorKind::kMissingMandatory,
                     to_string(f.type) + " lacks tag " +
                         std::to_string(static_cast<int>(tag)),
                     static_cast<std::uint8_t>(tag));
  }
  return *tlv;
}
}  // namespace

std::uint8_t Frame::u8(Tag tag) const {
  return static_cast<std::uint8_t>(be_value(require(*this, tag), 1));
}
std::uint16_t Frame::u16(Tag tag) const {
  return static_cast<std::uint16_t>(be_value(require(*this, tag), 2));
}
std::uint32_t Frame::u32(Tag tag) const {
  return static_cast<std::uint32_t>(be_value(require(*this, tag), 4));
}
const Bytes& Frame::bytes(Tag tag) const { return require(*this, tag).value; }

Frame& Frame::set_bytes(Tag tag, Bytes v) {
  const auto raw = static_cast<std::uint8_t>(tag);
  for (auto& tlv : tlvs) {
    if (tlv.tag == raw) {
      tlv.value = std::move(v);
      return *this;
    }
  }
  tlvs.push_back(Tlv{raw, std::move(v)});
  std::stable_sort(tlvs.begin(), tlvs.end(),
                   [](const Tlv& a, const Tlv& b) { return a.tag < b.tag; });
  return *this;
}
Frame& Frame::set_u8(Tag tag, std::uint8_t v) {
  return set_bytes(tag, be_bytes(v, 1));
}
Frame& Frame::set_u16(Tag tag, std::uint16_t v) {
  return set_bytes(tag, be_bytes(v, 2));
}
Frame& Frame::set_u32(Tag tag, std::uint32_t v) {
  return set_bytes(tag, be_bytes(v, 4));
}

std::uint16_t Frame::ran_function_id() const {
  return has(Tag::kRanFunctionId) ? u16(Tag::kRanFunctionId)
                                  : kDefaultRanFunctionId;
}

std::span<const Tag> mandatory_tags(MsgType type) {
  switch (type) {
    case MsgType::kSetupRequest: return kSetupReqTags;
    case MsgType::kSubscriptionRequest: return kSubReqTags;
    case MsgType::kSetupResponse:
    case MsgType::kControlAck:
    case MsgType::kError:
      return kCauseOnly;
    case MsgType::kSubscriptionResponse: return kSubRespTags;
    case MsgType::kIndication: return kIndicationTags;
    case MsgType::kControlRequest: return kControlReqTags;
  }
  return {};
}

Bytes encode_frame(const Frame& frame) {
  if (!is_known_msg_type(static_cast<std::uint8_t>(frame.type))) {
    throw CodecError(CodecErrorKind::kUnknownMsgType,
                     "msg_type " +
                         std::to_string(static_cast<int>(frame.type)));
  }
  check_fields(frame);

  std::vector<const Tlv*> ordered;
  ordered.reserve(frame.tlvs.size());
  for (const auto& tlv : frame.tlvs) ordered.push_back(&tlv);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Tlv* a, const Tlv* b) { return a->tag < b->tag; });

  std::size_t body = 3;
  for (const Tlv* tlv : ordered) {
    if (tlv->value.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CodecError(CodecErrorKind::kInvalidValue,
                       "TLV value exceeds 65535 bytes", tlv->tag);
    }
    body += 3 + tlv->value.size();
  }
  if (body > kMaxFrameLength) {
    throw CodecError(CodecErrorKind::kFrameTooLarge,
                     "frame body of " + std::to_string(body) + " bytes");
  }

  Writer w;
  w.u32(static_cast<std::uint32_t>(body));
  w.u8(static_cast<std::uint8_t>(frame.type));
  w.u16(frame.txid);
  for (const Tlv* tlv : ordered) {
    w.u8(tlv->tag);
    w.u16(static_cast<std::uint16_t>(tlv->value.size()));
    w.raw(tlv->value);
  }
  return w.take();
}

Frame decode_frame(ByteView bytes) {
  Reader r(bytes);
  const std::uint32_t length = r.u32();
  if (length > kMaxFrameLength) {
    throw CodecError(CodecErrorKind::kFrameTooLarge,
                     "length field " + std::to_string(length));
  }
  if (r.remaining() < length) {
    throw CodecError(CodecErrorKind::kTruncated,
                     "length field " + std::to_string(length) + " but " +
                         std::to_string(r.remaining()) + " bytes follow");
  }
  if (r.remaining() > length) {
    throw CodecError(CodecErrorKind::kTrailingBytes,
                     std::to_string(r.remaining() - length) +
                         " bytes after frame");
  }
  if (length < 3) {
    throw CodecError(CodecErrorKind::kTruncated, "frame header incomplete");
  }
  const std::uint8_t raw_type = r.u8();
  if (!is_known_msg_type(raw_type)) {
    throw CodecError(CodecErrorKind::kUnknownMsgType,
                     "msg_type " + std::to_string(raw_type));
  }
  Frame frame;
  frame.type = static_cast<MsgType>(raw_type);
  frame.txid = r.u16();
  while (r.remaining() > 0) {
    if (r.remaining() < 3) {
      throw CodecError(CodecErrorKind::kTlvOverrun,
                       "TLV header runs past frame end");
    }
    Tlv tlv;
    tlv.tag = r.u8();
    const std::uint16_t len = r.u16();
    if (r.remaining() < len) {
      throw CodecError(CodecErrorKind::kTlvOverrun,
                       "TLV of " + std::to_string(len) + " bytes with " +
                           std::to_string(r.remaining()) + " left",
                       tlv.tag);
    }
    auto value = r.raw(len);
    tlv.value.assign(value.begin(), value.end());
    frame.tlvs.push_back(std::move(tlv));
  }
  check_fields(frame);
  return frame;
}

void FrameReader::feed(ByteView bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameReader::next() {
  if (buffered() < 4) return std::nullopt;
  const std::uint8_t* p = buffer_.data() + offset_;
  const std::uint32_t length = (std::uint32_t{p[0]} << 24) |
                               (std::uint32_t{p[1]} << 16) |
                               (std::uint32_t{p[2]} << 8) | p[3];
  if (length > kMaxFrameLength) {
    // Framing is lost; drop everything buffered.
    offset_ = buffer_.size();
    throw CodecError(CodecErrorKind::kFrameTooLarge,
                     "length field " + std::to_string(length));
  }
  if (buffered() < 4 + std::size_t{length}) return std::nullopt;
  ByteView whole(buffer_.data() + offset_, 4 + std::size_t{length});
  offset_ += whole.size();
  Frame frame = decode_frame(whole);
  if (offset_ > 4096 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(),
                  buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return frame;
}

Frame make_setup_request(std::uint16_t txid, GnbId gnb,
                         std::optional<std::uint16_t> ran_function) {
  Frame f{MsgType::kSetupRequest, txid, {}};
  f.set_u32(Tag::kGnbId, gnb);
  if (ran_function) f.set_u16(Tag::kRanFunctionId, *ran_function);
  return f;
}

Frame make_setup_response(std::uint16_t txid, Cause cause) {
  Frame f{MsgType::kSetupResponse, txid, {}};
  f.set_u8(Tag::kCause, static_cast<std::uint8_t>(cause));
  return f;
}

Frame make_subscription_request(std::uint16_t txid, GnbId gnb,
                                std::uint16_t ran_function,
                                std::uint32_t period_ms) {
  Frame f{MsgType::kSubscriptionRequest, txid, {}};
  f.set_u32(Tag::kGnbId, gnb);
  f.set_u16(Tag::kRanFunctionId, ran_function);
  f.set_u32(Tag::kReportPeriodMs, period_ms);
  return f;
}

Frame make_subscription_response(std::uint16_t txid,
                                 std::uint32_t subscription_id, Cause cause) {
  Frame f{MsgType::kSubscriptionResponse, txid, {}};
  f.set_u8(Tag::kCause, static_cast<std::uint8_t>(cause));
  f.set_u32(Tag::kSubscriptionId, subscription_id);
  return f;
}

Frame make_indication(std::uint16_t txid, GnbId gnb,
                      std::uint32_t subscription_id, Bytes sm_payload) {
  Frame f{MsgType::kIndication, txid, {}};
  f.set_u32(Tag::kGnbId, gnb);
  f.set_bytes(Tag::kSmPayload, std::move(sm_payload));
  f.set_u32(Tag::kSubscriptionId, subscription_id);
  return f;
}

Frame make_control_request(std::uint16_t txid, GnbId gnb, Bytes sm_payload) {
  Frame f{MsgType::kControlRequest, txid, {}};
  f.set_u32(Tag::kGnbId, gnb);
  f.set_bytes(Tag::kSmPayload, std::move(sm_payload));
  return f;
}

Frame make_control_ack(std::uint16_t txid, Cause cause) {
  Frame f{MsgType::kControlAck, txid, {}};
  f.set_u8(Tag::kCause, static_cast<std::uint8_t>(cause));
  return f;
}

Frame make_error(std::uint16_t txid, Cause cause) {
  Frame f{MsgType::kError, txid, {}};
  f.set_u8(Tag::kCause, static_cast<std::uint8_t>(cause));
  return f;
}

namespace {

struct PayloadEncoder {
  Writer& w;

  void operator()(const KpmReport& report) const {
    if (report.records.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CodecError(CodecErrorKind::kInvalidValue,
                       "too many KPM records");
    }
    w.u8(static_cast<std::uint8_t>(SmType::kKpmReport));
    w.u32(report.period_ms);
    w.u16(static_cast<std::uint16_t>(report.records.size()));
    for (const auto& rec : report.records) {
      w.u16(rec.ue_id);
      w.u32(rec.prb_slots);
      w.u64(rec.tbs_bits);
    }
  }

  void operator()(const SpsCommand& cmd) const {
    if (cmd.entries.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CodecError(CodecErrorKind::kInvalidValue, "too many SPS entries");
    }
    w.u8(static_cast<std::uint8_t>(SmType::kSpsControl));
    w.u16(static_cast<std::uint16_t>(cmd.entries.size()));
    for (const auto& e : cmd.entries) {
      if (e.fixed_prbs && *e.fixed_prbs == kSpsRelease) {
        throw CodecError(CodecErrorKind::kInvalidValue,
                         "fixed_prbs collides with the release sentinel");
      }
      w.u16(e.ue_id);
      w.u32(e.fixed_prbs.value_or(kSpsRelease));
    }
  }
};

// Records after the header must be exactly count * record_size bytes.
void check_record_block(std::size_t remaining, std::size_t count,
                        std::size_t record_size) {
  const std::size_t expected = count * record_size;
  if (remaining == expected) return;
  if (remaining < expected && remaining % record_size != 0) {
    throw CodecError(CodecErrorKind::kTruncated,
                     "partial record: " + std::to_string(remaining) +
                         " bytes for " + std::to_string(count) + " records");
  }
  throw CodecError(CodecErrorKind::kCountMismatch,
                   "header announces " + std::to_string(count) +
                       " records, body holds " +
                       std::to_string(remaining / record_size) +
                       (remaining % record_size ? " and a fragment" : ""));
}

}  // namespace

Bytes encode_sm_payload(const SmPayload& payload) {
  Writer w;
  std::visit(PayloadEncoder{w}, payload);
  return w.take();
}

SmPayload decode_sm_payload(ByteView bytes) {
  Reader r(bytes);
  const std::uint8_t type = r.u8();
  if (type == static_cast<std::uint8_t>(SmType::kKpmReport)) {
    KpmReport report;
    report.period_ms = r.u32();
    const std::uint16_t count = r.u16();
    check_record_block(r.remaining(), count, 14);
    report.records.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
      KpmRecord rec;
      rec.ue_id = r.u16();
      rec.prb_slots = r.u32();
      rec.tbs_bits = r.u64();
      report.records.push_back(rec);
    }
    return report;
  }
  if (type == static_cast<std::uint8_t>(SmType::kSpsControl)) {
    SpsCommand cmd;
    const std::uint16_t count = r.u16();
    check_record_block(r.remaining(), count, 6);
    cmd.entries.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
      SpsEntry e;
      e.ue_id = r.u16();
      const std::uint32_t v = r.u32();
      if (v != kSpsRelease) e.fixed_prbs = v;
      cmd.entries.push_back(e);
    }
    return cmd;
  }
  throw CodecError(CodecErrorKind::kUnknownSmType,
                   "sm_type " + std::to_string(type));
}

}  // namespace oranlab::e2
