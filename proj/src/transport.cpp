#include "oranlab/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <mutex>

namespace oranlab::transport {
namespace {

struct Pipe {
  std::mutex mutex;
  std::deque<std::uint8_t> bytes;
  bool closed = false;
};

class MemoryStream : public ByteStream {
 public:
  MemoryStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryStream() override { close(); }

  bool write(ByteView bytes) override {
    std::lock_guard lock(out_->mutex);
    if (out_->closed) return false;
    out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
    return true;
  }

  bool read_some(Bytes& out) override {
    std::lock_guard lock(in_->mutex);
    out.insert(out.end(), in_->bytes.begin(), in_->bytes.end());
    in_->bytes.clear();
    return !in_->closed;
  }

  void close() override {
    for (auto* pipe : {in_.get(), out_.get()}) {
      std::lock_guard lock(pipe->mutex);
      pipe->closed = true;
    }
  }

  bool is_open() const override {
    std::lock_guard lock(in_->mutex);
    return !in_->closed;
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
};

struct DatagramQueue {
  std::mutex mutex;
  std::deque<Bytes> datagrams;
};

class MemoryDatagram : public DatagramChannel {
 public:
  MemoryDatagram(std::shared_ptr<DatagramQueue> in,
                 std::shared_ptr<DatagramQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  void send(ByteView datagram) override {
    std::lock_guard lock(out_->mutex);
    out_->datagrams.emplace_back(datagram.begin(), datagram.end());
  }

  std::optional<Bytes> receive() override {
    std::lock_guard lock(in_->mutex);
    if (in_->datagrams.empty()) return std::nullopt;
    Bytes d = std::move(in_->datagrams.front());
    in_->datagrams.pop_front();
    return d;
  }

 private:
  std::shared_ptr<DatagramQueue> in_;
  std::shared_ptr<DatagramQueue> out_;
};

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("invalid IPv4 address: " + ep.host);
  }
  return addr;
}

std::uint16_t bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    set_nonblocking(fd_);
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override { close(); }

  bool write(ByteView bytes) override {
    if (fd_ < 0) return false;
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent,
                               MSG_NOSIGNAL);
      if (n > 0) {
        sent += static_cast<std::size_t>(n);
      } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK ||
                           errno == EINTR)) {
        // Socket buffer full: frames are small, so wait it out.
        ::usleep(100);
      } else {
        close();
        return false;
      }
    }
    return true;
  }

  bool read_some(Bytes& out) override {
    if (fd_ < 0) return false;
    std::uint8_t buf[4096];
    for (;;) {
      const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
      if (n > 0) {
        out.insert(out.end(), buf, buf + n);
        continue;
      }
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return true;
      if (n < 0 && errno == EINTR) continue;
      close();
      return false;
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  bool is_open() const override { return fd_ >= 0; }

 private:
  int fd_;
};

}  // namespace

std::pair<StreamPtr, StreamPtr> make_stream_pair() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<MemoryStream>(b_to_a, a_to_b),
          std::make_unique<MemoryStream>(a_to_b, b_to_a)};
}

bool RecordingStream::write(ByteView bytes) {
  if (!inner_->write(bytes)) return false;
  written_->insert(written_->end(), bytes.begin(), bytes.end());
  return true;
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    throw TransportError("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw TransportError("invalid port in '" + text + "'");
  }
  if (ep.host.empty() || ep.host == "localhost") ep.host = "127.0.0.1";
  return ep;
}

TcpListener::TcpListener(const Endpoint& at) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket: " + std::string(strerror(errno)));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const sockaddr_in addr = to_sockaddr(at);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) <
          0 ||
      ::listen(fd_, 16) < 0) {
    const std::string err = strerror(errno);
    ::close(fd_);
    throw TransportError("cannot listen on " + at.host + ":" +
                         std::to_string(at.port) + ": " + err);
  }
  set_nonblocking(fd_);
  port_ = bound_port(fd_);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

StreamPtr TcpListener::accept() {
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return nullptr;
  return std::make_unique<TcpStream>(fd);
}

StreamPtr tcp_connect(const Endpoint& to) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return nullptr;
  const sockaddr_in addr = to_sockaddr(to);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) <
      0) {
    ::close(fd);
    return nullptr;
  }
  return std::make_unique<TcpStream>(fd);
}

std::pair<DatagramPtr, DatagramPtr> make_datagram_pair() {
  auto a_to_b = std::make_shared<DatagramQueue>();
  auto b_to_a = std::make_shared<DatagramQueue>();
  return {std::make_unique<MemoryDatagram>(b_to_a, a_to_b),
          std::make_unique<MemoryDatagram>(a_to_b, b_to_a)};
}

UdpChannel::UdpChannel(const Endpoint& local, const Endpoint& peer)
    : peer_(peer) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw TransportError("socket: " + std::string(strerror(errno)));
  const sockaddr_in addr = to_sockaddr(local);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) <
      0) {
    const std::string err = strerror(errno);
    ::close(fd_);
    throw TransportError("cannot bind UDP " + local.host + ":" +
                         std::to_string(local.port) + ": " + err);
  }
  int buf = 1 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
  set_nonblocking(fd_);
  local_port_ = bound_port(fd_);
}

UdpChannel::~UdpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpChannel::set_peer(const Endpoint& peer) { peer_ = peer; }

void UdpChannel::send(ByteView datagram) {
  const sockaddr_in addr = to_sockaddr(peer_);
  // Best effort: loss is part of the datagram contract.
  ::sendto(fd_, datagram.data(), datagram.size(), 0,
           reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
}

std::optional<Bytes> UdpChannel::receive() {
  std::uint8_t buf[65536];
  const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
  if (n < 0) return std::nullopt;
  return Bytes(buf, buf + n);
}

std::pair<std::unique_ptr<UdpChannel>, std::unique_ptr<UdpChannel>>
make_udp_pair() {
  auto a = std::make_unique<UdpChannel>(Endpoint{"127.0.0.1", 0},
                                        Endpoint{"127.0.0.1", 0});
  auto b = std::make_unique<UdpChannel>(Endpoint{"127.0.0.1", 0},
                                        Endpoint{"127.0.0.1", a->local_port()});
  a->set_peer({"127.0.0.1", b->local_port()});
  return {std::move(a), std::move(b)};
}

void LossyChannel::send(ByteView datagram) {
  if (drop_count_ > 0 && !datagram.empty() &&
      datagram[0] == drop_direction_) {
    --drop_count_;
    ++dropped_;
    return;
  }
  inner_->send(datagram);
}

}  // namespace oranlab::transport
