#pragma once

// Wire formats for the E2AP-lite application protocol and the RC-lite service
// model carried inside it.
//
// Frame:   u32 length L (bytes after the length field) | u8 msg_type |
//          u16 txid | TLV*
// TLV:     u8 tag | u16 length | value
// All integers are big-endian. Encoders emit TLVs in ascending tag order;
// decoders accept any order and keep unknown tags.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oranlab/domain.hpp"

namespace oranlab::e2 {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class MsgType : std::uint8_t {
  kSetupRequest = 0x01,
  kSetupResponse = 0x02,
  kSubscriptionRequest = 0x03,
  kSubscriptionResponse = 0x04,
  kIndication = 0x05,
  kControlRequest = 0x06,
  kControlAck = 0x07,
  kError = 0x7F,
};

enum class Tag : std::uint8_t {
  kGnbId = 0x01,
  kRanFunctionId = 0x02,
  kReportPeriodMs = 0x03,
  kSmPayload = 0x04,
  kCause = 0x05,
  kSubscriptionId = 0x06,
};

enum class Cause : std::uint8_t {
  kOk = 0,
  kReject = 1,
  kUnknownFunction = 2,
  kMalformed = 3,
};

inline constexpr std::uint16_t kDefaultRanFunctionId = 1;
// Frames larger than this are refused by the stream reader.
inline constexpr std::uint32_t kMaxFrameLength = 1u << 20;

std::string to_string(MsgType type);
bool is_known_msg_type(std::uint8_t raw);

enum class CodecErrorKind {
  kTruncated,
  kTrailingBytes,
  kUnknownMsgType,
  kTlvOverrun,
  kMissingMandatory,
  kDuplicateMandatory,
  kBadFieldWidth,
  kCountMismatch,
  kUnknownSmType,
  kFrameTooLarge,
  kInvalidValue,
};

std::string to_string(CodecErrorKind kind);

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrorKind kind, const std::string& detail,
             std::optional<std::uint8_t> tag = std::nullopt);

  CodecErrorKind kind() const { return kind_; }
  std::optional<std::uint8_t> tag() const { return tag_; }

 private:
  CodecErrorKind kind_;
  std::optional<std::uint8_t> tag_;
};

struct Tlv {
  std::uint8_t tag = 0;
  Bytes value;

  bool operator==(const Tlv&) const = default;
};

struct Frame {
  MsgType type = MsgType::kError;
  std::uint16_t txid = 0;
  std::vector<Tlv> tlvs;

  bool operator==(const Frame&) const = default;

  const Tlv* find(Tag tag) const;
  bool has(Tag tag) const { return find(tag) != nullptr; }

  // Typed getters throw CodecError(kMissingMandatory) when absent.
  std::uint8_t u8(Tag tag) const;
  std::uint16_t u16(Tag tag) const;
  std::uint32_t u32(Tag tag) const;
  const Bytes& bytes(Tag tag) const;

  // Setters replace an existing TLV with the same tag.
  Frame& set_u8(Tag tag, std::uint8_t v);
  Frame& set_u16(Tag tag, std::uint16_t v);
  Frame& set_u32(Tag tag, std::uint32_t v);
  Frame& set_bytes(Tag tag, Bytes v);

  GnbId gnb_id() const { return u32(Tag::kGnbId); }
  Cause cause() const { return static_cast<Cause>(u8(Tag::kCause)); }
  // Absent RAN_FUNCTION_ID means the default function.
  std::uint16_t ran_function_id() const;
};

// Tags that must appear exactly once for a message type.
std::span<const Tag> mandatory_tags(MsgType type);

Bytes encode_frame(const Frame& frame);
// Decodes exactly one frame; the span must hold nothing else.
Frame decode_frame(ByteView bytes);

// Reassembles frames from a byte stream.
class FrameReader {
 public:
  void feed(ByteView bytes);
  // Next complete frame, if buffered. Throws CodecError on a malformed frame;
  // the offending bytes are consumed.
  std::optional<Frame> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

// Message builders for the supported procedures.
Frame make_setup_request(std::uint16_t txid, GnbId gnb,
                         std::optional<std::uint16_t> ran_function =
                             std::nullopt);
Frame make_setup_response(std::uint16_t txid, Cause cause);
Frame make_subscription_request(std::uint16_t txid, GnbId gnb,
                                std::uint16_t ran_function,
                                std::uint32_t period_ms);
Frame make_subscription_response(std::uint16_t txid,
                                 std::uint32_t subscription_id, Cause cause);
Frame make_indication(std::uint16_t txid, GnbId gnb,
                      std::uint32_t subscription_id, Bytes sm_payload);
Frame make_control_request(std::uint16_t txid, GnbId gnb, Bytes sm_payload);
Frame make_control_ack(std::uint16_t txid, Cause cause);
Frame make_error(std::uint16_t txid, Cause cause);

// Service-model payloads.
//
// KPM_REPORT:  0x01 | u32 period_ms | u16 n | n x (u16 ue, u32 prb_slots,
//              u64 tbs_bits)
// SPS_CONTROL: 0x02 | u16 n | n x (u16 ue, u32 fixed_prbs)
//              fixed_prbs 0xFFFFFFFF releases the UE.
enum class SmType : std::uint8_t { kKpmReport = 0x01, kSpsControl = 0x02 };

inline constexpr std::uint32_t kSpsRelease = 0xFFFFFFFFu;

using SmPayload = std::variant<KpmReport, SpsCommand>;

Bytes encode_sm_payload(const SmPayload& payload);
SmPayload decode_sm_payload(ByteView bytes);

}  // namespace oranlab::e2
