#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>

#include "edgefaas/migration/wire.hpp"

namespace edgefaas::migration {

// Bidirectional frame transport. send() either delivers the frame to the
// peer or throws TargetUnreachable; recv() returns nullopt on orderly or
// broken close.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Frame& f) = 0;
  virtual std::optional<Frame> recv() = 0;
  virtual void close() = 0;
  virtual std::uint64_t bytes_sent() const = 0;
};

// In-memory pair for the in-process harness. Deterministic: migration is
// strict request/response alternation, so both ends block for each other.
// kill_after_frames injects a connection kill once that many frames have
// crossed the pair (both directions counted); the sending side throws and
// the receiving side sees EOF from then on.
class MemoryConduit {
 public:
  explicit MemoryConduit(int kill_after_frames = -1);
  ~MemoryConduit();

  Channel& a();
  Channel& b();
  std::uint64_t total_bytes() const;
  std::uint64_t total_frames() const;

 private:
  struct Shared;
  class End;
  std::shared_ptr<Shared> shared_;
  std::unique_ptr<End> a_, b_;
};

// Real loopback/TCP transport exercising the exact wire framing.
class TcpChannel : public Channel {
 public:
  // Takes ownership of a connected socket fd.
  explicit TcpChannel(int fd, int timeout_s = 30);
  ~TcpChannel() override;

  static std::unique_ptr<TcpChannel> connect(const Addr& addr,
                                             int timeout_s = 30);

  void send(const Frame& f) override;
  std::optional<Frame> recv() override;
  void close() override;
  std::uint64_t bytes_sent() const override { return bytes_sent_; }

 private:
  int fd_ = -1;
  std::uint64_t bytes_sent_ = 0;
};

// Minimal TCP acceptor for the migration listener.
class TcpListener {
 public:
  explicit TcpListener(const Addr& bind_addr);
  ~TcpListener();

  // Blocks until a connection arrives or the listener is shut down.
  std::unique_ptr<TcpChannel> accept(int timeout_s = 30);
  void shutdown();
  std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace edgefaas::migration
