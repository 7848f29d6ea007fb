#include "net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cerrno>
#include <cstring>
#include <thread>

namespace sftl {

namespace {

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = std::uint8_t(v);
  p[1] = std::uint8_t(v >> 8);
  p[2] = std::uint8_t(v >> 16);
  p[3] = std::uint8_t(v >> 24);
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0)
    throw TransportError("fcntl O_NONBLOCK failed");
}

constexpr std::size_t kMaxFrame = 1ULL << 30;

}  // namespace

Channel::Channel(int fd, int timeout_ms) : fd_(fd), timeout_ms_(timeout_ms) {
  if (fd_ < 0) throw TransportError("bad channel fd");
  set_nonblocking(fd_);
  int one = 1;
  setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));  // no-op on AF_UNIX
}

Channel::~Channel() {
  if (fd_ >= 0) close(fd_);
}

Channel::Channel(Channel&& o) noexcept
    : fd_(o.fd_),
      timeout_ms_(o.timeout_ms_),
      send_seq_(o.send_seq_),
      recv_seq_(o.recv_seq_),
      stats_(o.stats_),
      sink_(o.sink_) {
  o.fd_ = -1;
}

// Single-threaded send+receive multiplexer. Drives both directions with
// poll() so that two parties writing large frames at once cannot deadlock.
void Channel::pump(const std::uint8_t* out, std::size_t out_len, std::vector<std::uint8_t>* in) {
  std::size_t sent = 0;
  std::size_t want = in ? kFrameHeader : 0;  // grows once the header arrives
  std::size_t got = 0;
  bool header_parsed = false;
  if (in) in->resize(kFrameHeader);

  while (sent < out_len || (in && got < want)) {
    pollfd pfd{fd_, 0, 0};
    if (sent < out_len) pfd.events |= POLLOUT;
    if (in && got < want) pfd.events |= POLLIN;
    int rc = poll(&pfd, 1, timeout_ms_);
    if (rc == 0) throw TransportError("channel timeout");
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (pfd.revents & (POLLERR | POLLNVAL)) throw TransportError("channel error");
    if ((pfd.revents & POLLOUT) && sent < out_len) {
      ssize_t n = ::send(fd_, out + sent, out_len - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno != EAGAIN && errno != EWOULDBLOCK)
          throw TransportError(std::string("send: ") + std::strerror(errno));
      } else {
        sent += std::size_t(n);
      }
    }
    if (in && (pfd.revents & (POLLIN | POLLHUP)) && got < want) {
      ssize_t n = ::recv(fd_, in->data() + got, want - got, 0);
      if (n == 0) throw TransportError("peer closed connection");
      if (n < 0) {
        if (errno != EAGAIN && errno != EWOULDBLOCK)
          throw TransportError(std::string("recv: ") + std::strerror(errno));
      } else {
        got += std::size_t(n);
        if (!header_parsed && got >= kFrameHeader) {
          std::uint32_t len = get_u32(in->data());
          if (len > kMaxFrame) throw TransportError("oversized frame");
          want = kFrameHeader + len;
          in->resize(want);
          header_parsed = true;
        }
      }
    }
  }
  stats_.bytes_sent += out_len;
  if (in) stats_.bytes_received += got;
}

void Channel::write_frame(MsgType type, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> buf(kFrameHeader + payload.size());
  put_u32(buf.data(), std::uint32_t(payload.size()));
  buf[4] = std::uint8_t(type);
  put_u32(buf.data() + 5, send_seq_);
  std::memcpy(buf.data() + kFrameHeader, payload.data(), payload.size());
  if (sink_) {
    sink_->frames.push_back({true, type, send_seq_, payload.size()});
    if (sink_->capture_payloads)
      sink_->payloads.emplace_back(payload.begin(), payload.end());
  }
  ++send_seq_;
  pump(buf.data(), buf.size(), nullptr);
}

std::pair<MsgType, std::vector<std::uint8_t>> Channel::read_frame() {
  std::vector<std::uint8_t> raw;
  pump(nullptr, 0, &raw);
  auto type = static_cast<MsgType>(raw[4]);
  std::uint32_t seq = get_u32(raw.data() + 5);
  if (seq != recv_seq_) throw TransportError("frame sequence mismatch");
  ++recv_seq_;
  std::vector<std::uint8_t> payload(raw.begin() + kFrameHeader, raw.end());
  if (sink_) {
    sink_->frames.push_back({false, type, seq, payload.size()});
    if (sink_->capture_payloads) sink_->payloads.push_back(payload);
  }
  return {type, std::move(payload)};
}

std::vector<std::uint8_t> Channel::exchange(MsgType type, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out(kFrameHeader + payload.size());
  put_u32(out.data(), std::uint32_t(payload.size()));
  out[4] = std::uint8_t(type);
  put_u32(out.data() + 5, send_seq_);
  std::memcpy(out.data() + kFrameHeader, payload.data(), payload.size());
  if (sink_) {
    sink_->frames.push_back({true, type, send_seq_, payload.size()});
    if (sink_->capture_payloads)
      sink_->payloads.emplace_back(payload.begin(), payload.end());
  }
  ++send_seq_;

  std::vector<std::uint8_t> raw;
  pump(out.data(), out.size(), &raw);
  auto rtype = static_cast<MsgType>(raw[4]);
  std::uint32_t seq = get_u32(raw.data() + 5);
  if (seq != recv_seq_) throw TransportError("frame sequence mismatch");
  ++recv_seq_;
  if (rtype != type) throw TransportError("exchange type mismatch");
  if (sink_) {
    sink_->frames.push_back({false, rtype, seq, raw.size() - kFrameHeader});
    if (sink_->capture_payloads)
      sink_->payloads.emplace_back(raw.begin() + kFrameHeader, raw.end());
  }
  ++stats_.rounds;
  return {raw.begin() + kFrameHeader, raw.end()};
}

void Channel::send_to(MsgType type, std::span<const std::uint8_t> payload) {
  write_frame(type, payload);
  ++stats_.rounds;
}

std::vector<std::uint8_t> Channel::recv_from(MsgType expected) {
  auto [type, payload] = read_frame();
  if (type != expected) {
    if (type == MsgType::Control) throw TransportError("peer signalled abort");
    throw TransportError("unexpected frame type");
  }
  ++stats_.rounds;
  return payload;
}

std::vector<std::uint8_t> Channel::pack_elems(std::span<const Elem> elems) {
  std::vector<std::uint8_t> out(8 * elems.size());
  for (std::size_t i = 0; i < elems.size(); ++i) {
    Elem v = elems[i];
    for (int b = 0; b < 8; ++b) out[8 * i + b] = std::uint8_t(v >> (8 * b));
  }
  return out;
}

std::vector<Elem> Channel::unpack_elems(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8) throw TransportError("element payload not 8-byte aligned");
  std::vector<Elem> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    Elem v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[8 * i + b];
    out[i] = v;
  }
  return out;
}

std::vector<Elem> Channel::exchange_elems(MsgType type, std::span<const Elem> elems) {
  return unpack_elems(exchange(type, pack_elems(elems)));
}

void Channel::send_elems(MsgType type, std::span<const Elem> elems) {
  send_to(type, pack_elems(elems));
}

std::vector<Elem> Channel::recv_elems(MsgType expected) {
  return unpack_elems(recv_from(expected));
}

Channel connect_channel(const std::string& host, std::uint16_t port, int timeout_ms) {
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  std::string err = "connect failed";
  do {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) == 0 && res) {
      int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
      if (fd >= 0) {
        if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
          freeaddrinfo(res);
          return Channel(fd);
        }
        err = std::string("connect: ") + std::strerror(errno);
        close(fd);
      }
      freeaddrinfo(res);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  } while (std::chrono::steady_clock::now() < deadline);
  throw TransportError(err + " (timed out)");
}

Channel accept_channel(std::uint16_t port, int timeout_ms) {
  int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) throw TransportError("socket failed");
  int one = 1;
  setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    close(lfd);
    throw TransportError(std::string("bind: ") + std::strerror(errno));
  }
  if (listen(lfd, 1) < 0) {
    close(lfd);
    throw TransportError("listen failed");
  }
  pollfd pfd{lfd, POLLIN, 0};
  int rc = poll(&pfd, 1, timeout_ms);
  if (rc <= 0) {
    close(lfd);
    throw TransportError("accept timeout");
  }
  int fd = ::accept(lfd, nullptr, nullptr);
  close(lfd);
  if (fd < 0) throw TransportError(std::string("accept: ") + std::strerror(errno));
  return Channel(fd);
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> channel_pair() {
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) < 0)
    throw TransportError("socketpair failed");
  return {std::make_unique<Channel>(fds[0]), std::make_unique<Channel>(fds[1])};
}

}  // namespace sftl
