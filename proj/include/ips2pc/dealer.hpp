#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ips2pc/crypto.hpp"
#include "ips2pc/inner.hpp"
#include "ips2pc/transport.hpp"

namespace ips2pc {

/// Trusted third party serving one two-party session over TCP: random OLE
/// correlations in both directions and the watchlist OTs. Each party's
/// requests arrive on its own connection, opened with a Hello frame that
/// names the party.
class DealerService {
 public:
  DealerService(const PrimeField& F, const Seed& seed, uint16_t port = 0);
  uint16_t port() const { return listener_.port(); }
  /// Accepts both parties and serves them until they disconnect.
  void serve_session();
  /// Payload bytes the dealer sent to each party.
  const ByteLedger& ledger(int party) const { return ledger_[party]; }

 private:
  void serve(FramedChannel& ch, int party);
  std::vector<RandomOleCorrelation> ole_batch(int direction, int role, std::size_t count);

  const PrimeField& F_;
  Seed seed_;
  TcpListener listener_;
  IdealOtOracle ot_;
  std::mutex mu_;
  struct Pending {
    std::vector<RandomOleCorrelation> corr;
    int served = 0;
  };
  std::map<std::pair<int, std::size_t>, Pending> pending_;
  std::size_t next_[2][2]{};  // [direction][role] batch counters
  std::size_t made_[2]{};
  ByteLedger ledger_[2];
};

/// A party's connection to the dealer.
class DealerClient {
 public:
  DealerClient(std::unique_ptr<ByteStream> stream, int party);
  FramedChannel& channel() { return ch_; }
  int party() const { return party_; }

 private:
  FramedChannel ch_;
  int party_;
};

class DealerOt : public OtBackend {
 public:
  explicit DealerOt(DealerClient& c) : c_(c) {}
  void send(std::span<const WatchKey> keys, std::size_t t) override;
  std::vector<WatchKey> receive(std::size_t n, const WatchlistSelection& selection) override;

 private:
  DealerClient& c_;
};

class DealerOleProvider : public OleProvider {
 public:
  DealerOleProvider(const PrimeField& F, DealerClient& c) : F_(F), c_(c) {}
  std::vector<OleSenderHalf> sender_batch(std::size_t count) override;
  std::vector<OleReceiverHalf> receiver_batch(std::size_t count) override;

 private:
  std::vector<Fe> fetch(uint8_t role, std::size_t count);
  const PrimeField& F_;
  DealerClient& c_;
};

}  // namespace ips2pc
