#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edgefaas/common.hpp"
#include "edgefaas/proxy/rules.hpp"
#include "edgefaas/sim/interpreter.hpp"
#include "edgefaas/sim/program.hpp"
#include "edgefaas/sim/state.hpp"

namespace edgefaas::lifecycle {

// A deployable function: trigger route, program, image identity and
// resource declaration. Loaded from the registry file.
struct FunctionSpec {
  std::string function_id;
  std::string route;
  std::string image_digest;
  std::uint64_t image_size = 0;
  std::uint64_t memory_declared = 0;
  SimTime idle_timeout{};  // 0 with use_default_idle_timeout -> node default
  bool use_default_idle_timeout = true;
  sim::Program program;
  bool reentrant = false;

  enum class OnBlock : std::uint8_t { Default, Stay, Pause, Checkpoint };
  OnBlock on_block = OnBlock::Default;
};

enum class StateKind : std::uint8_t {
  Registered,
  ColdStarting,
  Running,
  Blocked,
  Paused,
  Checkpointing,
  Checkpointed,
  Restoring,
  MigratingOut,
  Terminated,
  Failed,
};

const char* state_kind_name(StateKind k);

struct InstanceState {
  StateKind kind = StateKind::Registered;
  std::optional<sim::BlockReason> reason;  // Blocked
  std::string archive_id;                  // Checkpointed / MigratingOut
  std::string cause;                       // Failed

  static InstanceState make(StateKind k) { return InstanceState{k, {}, {}, {}}; }
  static InstanceState blocked(sim::BlockReason r) {
    return InstanceState{StateKind::Blocked, std::move(r), {}, {}};
  }
  static InstanceState checkpointed(std::string archive_id) {
    return InstanceState{StateKind::Checkpointed, {}, std::move(archive_id), {}};
  }
  static InstanceState failed(std::string cause) {
    return InstanceState{StateKind::Failed, {}, {}, std::move(cause)};
  }

  bool absorbing() const {
    return kind == StateKind::Terminated || kind == StateKind::Failed;
  }
  bool operator==(const InstanceState&) const = default;
  std::string str() const;
};

enum class Event : std::uint8_t {
  Invoke,
  Pause,
  Unpause,
  Checkpoint,
  Restore,
  MigrateStart,
  MigrateCommit,
  MigrateAbort,
  Complete,
  Fail,
  Reap,
};

const char* event_name(Event e);

inline constexpr Event kAllEvents[] = {
    Event::Invoke,       Event::Pause,        Event::Unpause,
    Event::Checkpoint,   Event::Restore,      Event::MigrateStart,
    Event::MigrateCommit, Event::MigrateAbort, Event::Complete,
    Event::Fail,         Event::Reap,
};

// One execution of a function. Plain value; all mutation goes through the
// per-instance single writer that owns it.
struct Instance {
  std::string instance_id;
  std::string function_id;
  InstanceState state;
  sim::SimState sim;
  SimTime created_at{};
  SimTime last_active_at{};
  std::vector<proxy::WakeRule> wake_rules;
  std::string home_node;

  // Block reason recorded at suspension time (Paused/Checkpointed);
  // re-evaluated on restore.
  std::optional<sim::BlockReason> suspended_reason;

  std::uint64_t memory_declared = 0;  // copied from the FunctionSpec
  SimTime idle_timeout{};             // resolved against the node default
  std::optional<Bytes> response;      // latest Respond payload
  double cumulative_cost_s = 0;
};

}  // namespace edgefaas::lifecycle
