#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "arith.hpp"

namespace sftl {

struct TransportError : std::runtime_error {
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

// One frame on the wire: 4-byte LE payload length, 1-byte type, 4-byte LE
// sequence number, then the payload. Elements travel as 8-byte LE words.
enum class MsgType : std::uint8_t {
  Handshake = 1,
  Open = 2,       // simultaneous share opening
  MaskDelta = 3,  // input sharing (delta broadcast / share transfer)
  Commit = 4,
  Reveal = 5,
  Output = 6,     // directed reveal
  Control = 7,
};

inline constexpr std::size_t kFrameHeader = 9;

struct ChannelStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t rounds = 0;
};

struct FrameRecord {
  bool outgoing;
  MsgType type;
  std::uint32_t seq;
  std::uint64_t payload_bytes;
};

// Optional per-session log of every frame, used by the information-flow
// audit. Opened-value records are appended by the engines. With
// capture_payloads set, payload bytes are kept alongside each record.
struct TranscriptSink {
  std::vector<FrameRecord> frames;
  bool capture_payloads = false;
  std::vector<std::vector<std::uint8_t>> payloads;
};

// Reliable ordered two-party channel over a stream socket. One instance per
// session; calls are blocking round primitives, internally multiplexed so a
// simultaneous exchange cannot deadlock on large payloads.
class Channel {
 public:
  explicit Channel(int fd, int timeout_ms = 60000);
  ~Channel();
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;
  Channel(Channel&& o) noexcept;

  // Sends our frame and receives the peer's, concurrently. One round.
  std::vector<std::uint8_t> exchange(MsgType type, std::span<const std::uint8_t> payload);
  // Directed transfer. Each side counts one round.
  void send_to(MsgType type, std::span<const std::uint8_t> payload);
  std::vector<std::uint8_t> recv_from(MsgType expected);

  // Element-array conveniences (8-byte LE each).
  std::vector<Elem> exchange_elems(MsgType type, std::span<const Elem> elems);
  void send_elems(MsgType type, std::span<const Elem> elems);
  std::vector<Elem> recv_elems(MsgType expected);

  const ChannelStats& stats() const { return stats_; }
  void set_transcript(TranscriptSink* sink) { sink_ = sink; }

  static std::vector<std::uint8_t> pack_elems(std::span<const Elem> elems);
  static std::vector<Elem> unpack_elems(std::span<const std::uint8_t> bytes);

 private:
  void write_frame(MsgType type, std::span<const std::uint8_t> payload);
  std::pair<MsgType, std::vector<std::uint8_t>> read_frame();
  void pump(const std::uint8_t* out, std::size_t out_len, std::vector<std::uint8_t>* in);

  int fd_ = -1;
  int timeout_ms_;
  std::uint32_t send_seq_ = 0;
  std::uint32_t recv_seq_ = 0;
  ChannelStats stats_;
  TranscriptSink* sink_ = nullptr;
};

// TCP endpoints. connect_channel retries until the deadline so either party
// may start first.
Channel connect_channel(const std::string& host, std::uint16_t port, int timeout_ms = 30000);
Channel accept_channel(std::uint16_t port, int timeout_ms = 30000);

// In-process pair of connected channels (unit tests, benchmarks).
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> channel_pair();

}  // namespace sftl
