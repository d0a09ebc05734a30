#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "edgefaas/sim/program.hpp"
#include "edgefaas/sim/state.hpp"

namespace edgefaas::sim {

// Why a run stopped short of completion.
struct BlockReason {
  enum class Kind : std::uint8_t { Sleep, NetRecv } kind = Kind::Sleep;
  SimTime wake_at{};       // Sleep: absolute simulated deadline
  std::string socket_id;   // NetRecv

  static BlockReason sleep_until(SimTime wake_at) {
    return BlockReason{Kind::Sleep, wake_at, {}};
  }
  static BlockReason net_recv(std::string socket_id) {
    return BlockReason{Kind::NetRecv, {}, std::move(socket_id)};
  }

  bool operator==(const BlockReason&) const = default;
  std::string str() const;
};

enum class RunOutcome : std::uint8_t { Completed, Blocked };

struct RunResult {
  SimState state;
  RunOutcome outcome = RunOutcome::Completed;
  std::optional<BlockReason> reason;  // set iff Blocked
  std::vector<Bytes> responses;       // Respond emissions, in order
  std::int64_t ticks = 0;
};

struct RunLimits {
  std::int64_t max_ticks = 1'000'000;
};

// Assigns the local 4-tuple end of a newly opened socket. The node owns
// the allocator so local tuples stay unique node-wide.
using PortAllocator = std::function<Addr()>;

// Executes steps from state.pc until the program completes or blocks.
// A Sleep that still has time left advances pc past the step and reports
// Blocked(Sleep(wake_at)); the deadline lives in the block reason, not in
// the state, so the snapshot format needs no extra field. Recv blocks at
// the step and consumes on a later run.
RunResult run_until_block(SimState state, const Program& program, SimTime clock,
                          const PortAllocator& alloc_port,
                          const RunLimits& limits = {});

// Appends a payload to an open socket's receive buffer.
void deliver(SimState& state, const std::string& socket_id, Bytes payload);

// True if the recorded block reason still prevents execution at `now`.
bool still_blocked(const BlockReason& reason, const SimState& state,
                   SimTime now);

// Renders a Respond template: ${var:NAME} -> decimal value (0 if absent),
// ${recv:SOCKET} -> all bytes consumed so far on that socket.
Bytes render_template(const std::string& tmpl, const SimState& state);

}  // namespace edgefaas::sim
