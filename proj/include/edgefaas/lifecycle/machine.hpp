#pragma once

#include <functional>

#include "edgefaas/lifecycle/types.hpp"
#include "edgefaas/policy/models.hpp"

namespace edgefaas::lifecycle {

struct TransitionArgs {
  std::string archive_id;                   // Checkpointing+Complete
  std::string cause;                        // Fail
  std::optional<sim::BlockReason> reason;   // recorded at Pause/Checkpoint
};

struct TransitionOutcome {
  Instance instance;
  double cost_s = 0;
};

// The per-instance state machine. apply() is pure over the instance value
// and charges each transition its modeled cost:
//
//   Registered+Invoke -> ColdStarting            (start_cold)
//   ColdStarting+Complete -> Running
//   Running+Pause -> Paused                      (pause)
//   Paused+Unpause -> Running                    (unpause)
//   {Running,Blocked,Paused}+Checkpoint -> Checkpointing   (checkpoint)
//   Checkpointing+Complete -> Checkpointed(archive)
//   Checkpointed+Restore -> Restoring            (create + start_from_ckpt)
//   Restoring+Complete -> Running | Blocked      (re-evaluates the reason)
//   Checkpointed+MigrateStart -> MigratingOut
//   MigratingOut+MigrateCommit -> Terminated
//   MigratingOut+MigrateAbort -> Checkpointed
//   any non-absorbing+Fail -> Failed
//   {Paused,Checkpointed}+Reap -> Terminated
//
// Everything else is IllegalTransition.
class Machine {
 public:
  explicit Machine(policy::CostModel costs) : costs_(costs) {}

  TransitionOutcome apply(Instance inst, Event event, SimTime now,
                          const TransitionArgs& args = {}) const;

  const policy::CostModel& costs() const { return costs_; }

 private:
  policy::CostModel costs_;
};

// Execution-boundary mutations. Entering and leaving Blocked and the
// terminal completion of a program are driven by the interpreter, not by
// external events, so they live outside the event table.
Instance mark_blocked(Instance inst, sim::BlockReason reason, SimTime now);
Instance mark_woken(Instance inst, SimTime now);     // Blocked -> Running
Instance mark_completed(Instance inst, SimTime now); // Running -> Terminated

enum class SuspendMode : std::uint8_t { Pause, Checkpoint };

struct SuspendOutcome {
  Instance instance;
  std::vector<proxy::WakeRule> rules;
  double cost_s = 0;
};

// Wake rules for a block reason: Sleep -> TimerRule(wake_at), NetRecv ->
// PacketRule over the socket's 4-tuple. Throws UnknownSocket when the
// reason references a socket missing from the sim state.
std::vector<proxy::WakeRule> derive_wake_rules(
    const Instance& inst, const std::optional<sim::BlockReason>& reason);

// Suspends a Running-at-block-boundary or Blocked instance. Pause is a
// single transition; Checkpoint runs the two-step Checkpointing ->
// Checkpointed path, calling write_archive in between. The derived rules
// are stored on the instance and returned for proxy registration.
SuspendOutcome suspend_for_block(
    const Machine& machine, Instance inst,
    std::optional<sim::BlockReason> reason, SuspendMode mode, SimTime now,
    const std::function<std::string(const Instance&)>& write_archive = {});

}  // namespace edgefaas::lifecycle
