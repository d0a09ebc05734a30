#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "edgefaas/common.hpp"

namespace edgefaas::sim {

// One step of a simulated function program. A program is a flat ordered
// list of steps; control never branches, so the program counter alone
// pins down execution progress.
enum class StepOp : std::uint8_t {
  Compute,      // burn abstract ticks
  Sleep,        // block until an absolute simulated deadline
  Open,         // open a socket to a peer; binds a handle name
  Send,         // append payload to the socket's sent log
  Recv,         // consume one buffered payload, or block until one arrives
  IncrCounter,  // vars[name] += 1 (created at 0)
  Respond,      // emit a rendered response payload
  Close,        // close a socket
};

struct Step {
  StepOp op = StepOp::Compute;
  std::int64_t units = 0;   // Compute
  SimTime duration{};       // Sleep
  std::string socket;       // Open/Send/Recv/Close handle
  Addr peer;                // Open
  Bytes payload;            // Send
  std::string var;          // IncrCounter
  std::string tmpl;         // Respond template

  static Step compute(std::int64_t units);
  static Step sleep(SimTime d);
  static Step open(std::string socket, Addr peer);
  static Step send(std::string socket, Bytes payload);
  static Step recv(std::string socket);
  static Step incr(std::string var);
  static Step respond(std::string tmpl);
  static Step close(std::string socket);
};

using Program = std::vector<Step>;

// Parses a JSON step list and checks handle discipline: every socket
// referenced by send/recv/close is opened by an earlier step and not
// closed before the reference.
Program program_from_json(const nlohmann::json& j);
nlohmann::json program_to_json(const Program& p);
void validate_program(const Program& p);

}  // namespace edgefaas::sim
