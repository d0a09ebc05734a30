#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>

#include "edgefaas/common.hpp"

namespace edgefaas::sim {

enum class SocketStatus : std::uint8_t { Open = 1, Closed = 2 };

struct SocketState {
  std::string id;
  Addr local;
  Addr remote;
  SocketStatus status = SocketStatus::Open;
  std::deque<Bytes> recv_buffer;  // FIFO of undelivered payloads
  Bytes sent_log;                 // every byte the function sent
  Bytes recv_log;                 // every byte the function consumed

  bool operator==(const SocketState&) const = default;
};

// Full execution state of one instance's program. Plain value; snapshot()
// and resume() round-trip it byte-exactly.
struct SimState {
  std::uint32_t pc = 0;
  std::map<std::string, std::int64_t> vars;
  std::map<std::string, SocketState> sockets;
  SimTime clock_at_snapshot{};
  std::uint64_t rng_seed = 0;

  bool operator==(const SimState&) const = default;
};

}  // namespace edgefaas::sim
