#include "ips2pc/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

namespace ips2pc {

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::InputShare: return "input-share";
    case MsgType::Emulation: return "emulation";
    case MsgType::WatchlistCiphertext: return "watchlist-ciphertext";
    case MsgType::CoinCommit: return "coin-commit";
    case MsgType::CoinOpen: return "coin-open";
    case MsgType::TestBroadcast: return "test-broadcast";
    case MsgType::Output: return "output";
    case MsgType::Abort: return "abort";
    case MsgType::Hello: return "hello";
    case MsgType::OtKeys: return "ot-keys";
    case MsgType::OtSelection: return "ot-selection";
    case MsgType::OtResult: return "ot-result";
    case MsgType::OleRequest: return "ole-request";
    case MsgType::OleHalves: return "ole-halves";
  }
  return "unknown";
}

bool is_known_msg_type(uint8_t raw) {
  return (raw >= 1 && raw <= 8) || (raw >= 16 && raw <= 21);
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Setup: return "setup";
    case Phase::Offline: return "offline";
    case Phase::Online: return "online";
  }
  return "unknown";
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* in) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[i]) << (8 * i);
  return v;
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get_u64(const uint8_t* in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in[i]) << (8 * i);
  return v;
}

// ---------------------------------------------------------------------------
// in-memory pipe

namespace {

struct PipeBuffer {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<uint8_t> bytes;
  bool closed = false;
};

class MemoryStream final : public ByteStream {
 public:
  MemoryStream(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryStream() override { close(); }

  void write(std::span<const uint8_t> data) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw ConnectionLost("write on closed in-memory channel");
    out_->bytes.insert(out_->bytes.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  void read(std::span<uint8_t> out) override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return in_->bytes.size() >= out.size() || in_->closed; });
    if (in_->bytes.size() < out.size()) throw ConnectionLost("in-memory channel closed by peer");
    std::copy_n(in_->bytes.begin(), out.size(), out.begin());
    in_->bytes.erase(in_->bytes.begin(), in_->bytes.begin() + static_cast<std::ptrdiff_t>(out.size()));
  }

  void close() override {
    for (auto* b : {in_.get(), out_.get()}) {
      std::lock_guard lock(b->mu);
      b->closed = true;
      b->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<PipeBuffer> in_, out_;
};

class TcpStream final : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override { close(); }

  void write(std::span<const uint8_t> data) override {
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t k = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) throw ConnectionLost(std::string("tcp send failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(k);
    }
  }

  void read(std::span<uint8_t> out) override {
    std::size_t off = 0;
    while (off < out.size()) {
      ssize_t k = ::recv(fd_, out.data() + off, out.size() - off, 0);
      if (k < 0 && errno == EINTR) continue;
      if (k == 0) throw ConnectionLost("tcp connection closed by peer");
      if (k < 0) throw ConnectionLost(std::string("tcp recv failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(k);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_memory_pipe() {
  auto a = std::make_shared<PipeBuffer>();
  auto b = std::make_shared<PipeBuffer>();
  return {std::make_unique<MemoryStream>(a, b), std::make_unique<MemoryStream>(b, a)};
}

TcpListener::TcpListener(uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw ConnectionLost("socket() failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 4) != 0) {
    ::close(fd_);
    throw ConnectionLost("cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<ByteStream> TcpListener::accept() {
  for (;;) {
    int c = ::accept(fd_, nullptr, nullptr);
    if (c >= 0) return std::make_unique<TcpStream>(c);
    if (errno != EINTR) throw ConnectionLost(std::string("accept failed: ") + std::strerror(errno));
  }
}

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, uint16_t port, int attempts, int backoff_ms) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  for (int i = 0; i < attempts; ++i) {
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) == 0) {
      for (addrinfo* p = res; p; p = p->ai_next) {
        int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
          ::freeaddrinfo(res);
          return std::make_unique<TcpStream>(fd);
        }
        ::close(fd);
      }
      ::freeaddrinfo(res);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
  }
  throw ConnectionLost("cannot connect to " + host + ":" + std::to_string(port));
}

// ---------------------------------------------------------------------------
// ledger and framing

void ByteLedger::record(MsgType type, Phase phase, std::string_view term, std::size_t payload_bytes) {
  const Counter c{payload_bytes, 1};
  by_type_[type] += c;
  by_phase_[phase] += c;
  by_term_[term.empty() ? std::string(to_string(type)) : std::string(term)] += c;
  total_ += c;
}

ByteLedger& ByteLedger::operator+=(const ByteLedger& o) {
  for (auto& [k, v] : o.by_type_) by_type_[k] += v;
  for (auto& [k, v] : o.by_phase_) by_phase_[k] += v;
  for (auto& [k, v] : o.by_term_) by_term_[k] += v;
  total_ += o.total_;
  return *this;
}

std::vector<uint8_t> encode_frame(const Frame& f) {
  std::vector<uint8_t> out;
  out.reserve(kFrameHeaderBytes + f.payload.size());
  put_u32(out, f.session);
  out.push_back(static_cast<uint8_t>(f.type));
  put_u32(out, static_cast<uint32_t>(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

FramedChannel::FramedChannel(std::unique_ptr<ByteStream> stream, uint32_t session)
    : stream_(std::move(stream)), session_(session) {}

void FramedChannel::send(MsgType type, std::span<const uint8_t> payload, std::string_view term) {
  if (payload.size() > 0xffffffffULL) throw ProtocolError("payload too large for one frame");
  std::vector<uint8_t> bytes;
  bytes.reserve(kFrameHeaderBytes + payload.size());
  put_u32(bytes, session_);
  bytes.push_back(static_cast<uint8_t>(type));
  put_u32(bytes, static_cast<uint32_t>(payload.size()));
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  stream_->write(bytes);
  ledger_.record(type, phase_, term, payload.size());
  if (recording_) {
    transcript_.push_back('S');
    transcript_.insert(transcript_.end(), bytes.begin(), bytes.end());
  }
}

Frame FramedChannel::recv(MsgType expected) {
  Frame f = recv_any();
  if (f.type != expected)
    throw ProtocolError("expected " + std::string(to_string(expected)) + " frame, received " +
                        std::string(to_string(f.type)));
  return f;
}

Frame FramedChannel::recv_any() {
  uint8_t hdr[kFrameHeaderBytes];
  stream_->read(hdr);
  Frame f;
  f.session = get_u32(hdr);
  const uint8_t raw = hdr[4];
  const uint32_t len = get_u32(hdr + 5);
  f.payload.resize(len);
  if (len) stream_->read(f.payload);
  if (recording_) {
    transcript_.push_back('R');
    transcript_.insert(transcript_.end(), hdr, hdr + kFrameHeaderBytes);
    transcript_.insert(transcript_.end(), f.payload.begin(), f.payload.end());
  }
  if (!is_known_msg_type(raw)) throw ProtocolError("unknown message type " + std::to_string(raw));
  f.type = static_cast<MsgType>(raw);
  if (f.type == MsgType::Abort) throw PeerAbort(std::string(f.payload.begin(), f.payload.end()));
  if (f.session != session_)
    throw ProtocolError("session mismatch: expected " + std::to_string(session_) + ", received " +
                        std::to_string(f.session));
  return f;
}

void FramedChannel::send_abort(std::string_view reason) noexcept {
  try {
    std::vector<uint8_t> payload(reason.begin(), reason.end());
    send(MsgType::Abort, payload);
  } catch (...) {
  }
}

std::vector<uint8_t> FramedChannel::exchange(MsgType type, std::span<const uint8_t> payload, bool send_first,
                                             std::string_view term) {
  if (send_first) {
    send(type, payload, term);
    return recv(type).payload;
  }
  auto got = recv(type).payload;
  send(type, payload, term);
  return got;
}

}  // namespace ips2pc
