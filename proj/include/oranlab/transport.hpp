#pragma once

// Byte-stream and datagram transports used between the RIC, the E2
// termination and the service-model task. Every operation is non-blocking;
// callers poll.
//
// In-memory implementations back the deterministic fused mode, loopback
// TCP/UDP sockets back the live mode.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oranlab::transport {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reliable, ordered byte stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  // Queues all bytes. Returns false if the stream is closed.
  virtual bool write(ByteView bytes) = 0;
  // Appends whatever is available to `out`. Returns false once the stream is
  // closed and fully drained.
  virtual bool read_some(Bytes& out) = 0;
  virtual void close() = 0;
  virtual bool is_open() const = 0;
};

using StreamPtr = std::unique_ptr<ByteStream>;

// Two connected in-memory endpoints.
std::pair<StreamPtr, StreamPtr> make_stream_pair();

// A stream that records every byte written through it before forwarding.
class RecordingStream : public ByteStream {
 public:
  RecordingStream(StreamPtr inner, std::shared_ptr<Bytes> written)
      : inner_(std::move(inner)), written_(std::move(written)) {}
  bool write(ByteView bytes) override;
  bool read_some(Bytes& out) override { return inner_->read_some(out); }
  void close() override { inner_->close(); }
  bool is_open() const override { return inner_->is_open(); }

 private:
  StreamPtr inner_;
  std::shared_ptr<Bytes> written_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// Parses "host:port".
Endpoint parse_endpoint(const std::string& text);

class TcpListener {
 public:
  // Port 0 binds an ephemeral port; see port().
  explicit TcpListener(const Endpoint& at);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Next pending connection, if any.
  StreamPtr accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Connects to a listening TCP endpoint; nullptr when refused.
StreamPtr tcp_connect(const Endpoint& to);

// Unreliable message transport.
class DatagramChannel {
 public:
  virtual ~DatagramChannel() = default;
  virtual void send(ByteView datagram) = 0;
  virtual std::optional<Bytes> receive() = 0;
};

using DatagramPtr = std::unique_ptr<DatagramChannel>;

std::pair<DatagramPtr, DatagramPtr> make_datagram_pair();

class UdpChannel : public DatagramChannel {
 public:
  // Binds `local` (port 0 for ephemeral) and sends to `peer`.
  UdpChannel(const Endpoint& local, const Endpoint& peer);
  ~UdpChannel() override;
  UdpChannel(const UdpChannel&) = delete;
  UdpChannel& operator=(const UdpChannel&) = delete;

  std::uint16_t local_port() const { return local_port_; }
  void set_peer(const Endpoint& peer);
  void send(ByteView datagram) override;
  std::optional<Bytes> receive() override;

 private:
  int fd_ = -1;
  std::uint16_t local_port_ = 0;
  Endpoint peer_;
};

// Two UDP sockets on loopback addressed at each other.
std::pair<std::unique_ptr<UdpChannel>, std::unique_ptr<UdpChannel>>
make_udp_pair();

// Wraps a channel and discards the next `count` sent datagrams whose first
// byte equals `direction`. Used to exercise loss handling.
class LossyChannel : public DatagramChannel {
 public:
  explicit LossyChannel(DatagramPtr inner) : inner_(std::move(inner)) {}
  void drop_next(std::uint8_t direction, int count = 1) {
    drop_direction_ = direction;
    drop_count_ = count;
  }
  void send(ByteView datagram) override;
  std::optional<Bytes> receive() override { return inner_->receive(); }
  int dropped() const { return dropped_; }

 private:
  DatagramPtr inner_;
  std::uint8_t drop_direction_ = 0;
  int drop_count_ = 0;
  int dropped_ = 0;
};

}  // namespace oranlab::transport
