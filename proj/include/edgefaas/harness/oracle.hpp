#pragma once

#include <deque>

#include "edgefaas/sim/interpreter.hpp"

namespace edgefaas::harness {

// Payloads a socket will receive, in order. The reference run applies the
// next pending payload at the moment a Recv on that socket would block.
using DeliverySchedule = std::map<std::string, std::deque<Bytes>>;

struct OracleOutcome {
  sim::SimState state;
  bool completed = false;  // false: a Recv found no scheduled delivery
  std::vector<Bytes> responses;
};

// Reference interpreter: runs the program straight through with no
// suspensions. Independent of run_until_block/snapshot/resume — it is the
// ground truth those paths are compared against.
OracleOutcome oracle_uninterrupted(const sim::Program& program,
                                   DeliverySchedule deliveries,
                                   SimTime start_clock,
                                   const sim::PortAllocator& alloc_port);

}  // namespace edgefaas::harness
