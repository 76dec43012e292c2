#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ips2pc {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The peer sent an abort frame; what() carries its reason.
class PeerAbort : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class ConnectionLost : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

enum class MsgType : uint8_t {
  InputShare = 1,
  Emulation = 2,
  WatchlistCiphertext = 3,
  CoinCommit = 4,
  CoinOpen = 5,
  TestBroadcast = 6,
  Output = 7,
  Abort = 8,
  // party <-> dealer service
  Hello = 16,
  OtKeys = 17,
  OtSelection = 18,
  OtResult = 19,
  OleRequest = 20,
  OleHalves = 21,
};

std::string_view to_string(MsgType t);
bool is_known_msg_type(uint8_t raw);

enum class Phase : uint8_t { Setup = 0, Offline = 1, Online = 2 };
std::string_view to_string(Phase p);

constexpr std::size_t kFrameHeaderBytes = 9;

/// Reliable ordered byte stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write(std::span<const uint8_t> data) = 0;
  /// Blocks until `out.size()` bytes arrived; throws ConnectionLost on EOF.
  virtual void read(std::span<uint8_t> out) = 0;
  virtual void close() = 0;
};

/// Two connected in-memory endpoints.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_memory_pipe();

/// Accepts a single connection on 0.0.0.0:port. Port 0 picks an ephemeral
/// port, reported through `bound_port` before blocking in accept.
class TcpListener {
 public:
  explicit TcpListener(uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  uint16_t port() const { return port_; }
  std::unique_ptr<ByteStream> accept();

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

/// Connects with retries (the peer may not be listening yet).
std::unique_ptr<ByteStream> tcp_connect(const std::string& host, uint16_t port, int attempts = 100,
                                        int backoff_ms = 50);

struct Counter {
  uint64_t payload = 0;
  uint64_t frames = 0;
  uint64_t framing() const { return frames * kFrameHeaderBytes; }
  uint64_t total() const { return payload + framing(); }
  Counter& operator+=(const Counter& o) {
    payload += o.payload;
    frames += o.frames;
    return *this;
  }
  friend bool operator==(const Counter&, const Counter&) = default;
};

/// Bytes sent by one endpoint, by message type, by phase and by cost term.
class ByteLedger {
 public:
  void record(MsgType type, Phase phase, std::string_view term, std::size_t payload_bytes);
  const std::map<MsgType, Counter>& by_type() const { return by_type_; }
  const std::map<Phase, Counter>& by_phase() const { return by_phase_; }
  const std::map<std::string, Counter>& by_term() const { return by_term_; }
  Counter total() const { return total_; }
  ByteLedger& operator+=(const ByteLedger& o);

 private:
  std::map<MsgType, Counter> by_type_;
  std::map<Phase, Counter> by_phase_;
  std::map<std::string, Counter> by_term_;
  Counter total_;
};

struct Frame {
  uint32_t session = 0;
  MsgType type = MsgType::Abort;
  std::vector<uint8_t> payload;
};

std::vector<uint8_t> encode_frame(const Frame& f);

/// Framed, accounted message channel over a ByteStream.
class FramedChannel {
 public:
  explicit FramedChannel(std::unique_ptr<ByteStream> stream, uint32_t session = 0);

  void send(MsgType type, std::span<const uint8_t> payload, std::string_view term = {});
  /// Receives the next frame. An abort frame raises PeerAbort; any other
  /// unexpected type or session raises ProtocolError naming both types.
  Frame recv(MsgType expected);
  /// Next frame of any known type; an abort frame still raises PeerAbort.
  Frame recv_any();
  /// Best effort: never throws.
  void send_abort(std::string_view reason) noexcept;

  /// Sends and receives one frame of the same type. With `send_first` false
  /// the peer's frame is read before ours is written.
  std::vector<uint8_t> exchange(MsgType type, std::span<const uint8_t> payload, bool send_first,
                                std::string_view term = {});

  void set_phase(Phase p) { phase_ = p; }
  Phase phase() const { return phase_; }
  void set_session(uint32_t s) { session_ = s; }
  uint32_t session() const { return session_; }
  const ByteLedger& ledger() const { return ledger_; }

  /// When enabled, every sent and received frame is appended (with a one byte
  /// direction tag, 'S' or 'R') to the transcript.
  void record_transcript(bool on) { recording_ = on; }
  const std::vector<uint8_t>& transcript() const { return transcript_; }
  void close() { stream_->close(); }

 private:
  std::unique_ptr<ByteStream> stream_;
  uint32_t session_;
  Phase phase_ = Phase::Setup;
  ByteLedger ledger_;
  bool recording_ = false;
  std::vector<uint8_t> transcript_;
};

/// Little-endian helpers shared by the wire formats.
void put_u32(std::vector<uint8_t>& out, uint32_t v);
uint32_t get_u32(const uint8_t* in);
void put_u64(std::vector<uint8_t>& out, uint64_t v);
uint64_t get_u64(const uint8_t* in);

}  // namespace ips2pc
