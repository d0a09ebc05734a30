#include "edgefaas/lifecycle/machine.hpp"

namespace edgefaas::lifecycle {

const char* state_kind_name(StateKind k) {
  switch (k) {
    case StateKind::Registered: return "Registered";
    case StateKind::ColdStarting: return "ColdStarting";
    case StateKind::Running: return "Running";
    case StateKind::Blocked: return "Blocked";
    case StateKind::Paused: return "Paused";
    case StateKind::Checkpointing: return "Checkpointing";
    case StateKind::Checkpointed: return "Checkpointed";
    case StateKind::Restoring: return "Restoring";
    case StateKind::MigratingOut: return "MigratingOut";
    case StateKind::Terminated: return "Terminated";
    case StateKind::Failed: return "Failed";
  }
  return "?";
}

const char* event_name(Event e) {
  switch (e) {
    case Event::Invoke: return "Invoke";
    case Event::Pause: return "Pause";
    case Event::Unpause: return "Unpause";
    case Event::Checkpoint: return "Checkpoint";
    case Event::Restore: return "Restore";
    case Event::MigrateStart: return "MigrateStart";
    case Event::MigrateCommit: return "MigrateCommit";
    case Event::MigrateAbort: return "MigrateAbort";
    case Event::Complete: return "Complete";
    case Event::Fail: return "Fail";
    case Event::Reap: return "Reap";
  }
  return "?";
}

std::string InstanceState::str() const {
  switch (kind) {
    case StateKind::Blocked:
      return reason ? "Blocked(" + reason->str() + ")" : "Blocked";
    case StateKind::Checkpointed:
      return "Checkpointed(" + archive_id + ")";
    case StateKind::Failed:
      return "Failed(" + cause + ")";
    default:
      return state_kind_name(kind);
  }
}

namespace {

[[noreturn]] void illegal(const InstanceState& state, Event event) {
  fail(Errc::IllegalTransition,
       std::string(event_name(event)) + " from " + state.str());
}

void touch(Instance& inst, SimTime now) {
  if (now > inst.last_active_at) inst.last_active_at = now;
}

}  // namespace

TransitionOutcome Machine::apply(Instance inst, Event event, SimTime now,
                                 const TransitionArgs& args) const {
  const StateKind k = inst.state.kind;
  double cost = 0;

  if (event == Event::Fail) {
    if (inst.state.absorbing()) illegal(inst.state, event);
    inst.state = InstanceState::failed(args.cause.empty() ? "error" : args.cause);
    return {std::move(inst), cost};
  }

  switch (k) {
    case StateKind::Registered:
      if (event == Event::Invoke) {
        inst.state = InstanceState::make(StateKind::ColdStarting);
        cost = costs_.start_cold;
        touch(inst, now);
        return {std::move(inst), cost};
      }
      break;

    case StateKind::ColdStarting:
      if (event == Event::Complete) {
        inst.state = InstanceState::make(StateKind::Running);
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Running:
      if (event == Event::Pause) {
        inst.state = InstanceState::make(StateKind::Paused);
        inst.suspended_reason = args.reason;
        cost = costs_.pause;
        return {std::move(inst), cost};
      }
      if (event == Event::Checkpoint) {
        inst.state = InstanceState::make(StateKind::Checkpointing);
        inst.suspended_reason = args.reason;
        cost = costs_.checkpoint;
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Blocked:
      if (event == Event::Checkpoint) {
        inst.suspended_reason = inst.state.reason;
        inst.state = InstanceState::make(StateKind::Checkpointing);
        cost = costs_.checkpoint;
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Paused:
      if (event == Event::Unpause) {
        inst.state = InstanceState::make(StateKind::Running);
        cost = costs_.unpause;
        touch(inst, now);
        return {std::move(inst), cost};
      }
      if (event == Event::Checkpoint) {
        inst.state = InstanceState::make(StateKind::Checkpointing);
        cost = costs_.checkpoint;
        return {std::move(inst), cost};
      }
      if (event == Event::Reap) {
        inst.state = InstanceState::make(StateKind::Terminated);
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Checkpointing:
      if (event == Event::Complete) {
        inst.state = InstanceState::checkpointed(args.archive_id);
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Checkpointed:
      if (event == Event::Restore) {
        const std::string archive = inst.state.archive_id;
        inst.state = InstanceState::make(StateKind::Restoring);
        inst.state.archive_id = archive;
        cost = costs_.restore();
        touch(inst, now);
        return {std::move(inst), cost};
      }
      if (event == Event::MigrateStart) {
        const std::string archive = inst.state.archive_id;
        inst.state = InstanceState::make(StateKind::MigratingOut);
        inst.state.archive_id = archive;
        return {std::move(inst), cost};
      }
      if (event == Event::Reap) {
        inst.state = InstanceState::make(StateKind::Terminated);
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Restoring:
      if (event == Event::Complete) {
        // Resume the recorded block reason only if it still holds.
        if (inst.suspended_reason &&
            sim::still_blocked(*inst.suspended_reason, inst.sim, now)) {
          inst.state = InstanceState::blocked(*inst.suspended_reason);
        } else {
          inst.state = InstanceState::make(StateKind::Running);
          inst.suspended_reason.reset();
        }
        return {std::move(inst), cost};
      }
      break;

    case StateKind::MigratingOut:
      if (event == Event::MigrateCommit) {
        inst.state = InstanceState::make(StateKind::Terminated);
        return {std::move(inst), cost};
      }
      if (event == Event::MigrateAbort) {
        inst.state = InstanceState::checkpointed(inst.state.archive_id);
        return {std::move(inst), cost};
      }
      break;

    case StateKind::Terminated:
    case StateKind::Failed:
      break;
  }
  illegal(inst.state, event);
}

Instance mark_blocked(Instance inst, sim::BlockReason reason, SimTime now) {
  if (inst.state.kind != StateKind::Running)
    fail(Errc::IllegalTransition,
         "mark_blocked from " + inst.state.str());
  inst.state = InstanceState::blocked(std::move(reason));
  touch(inst, now);
  return inst;
}

Instance mark_woken(Instance inst, SimTime now) {
  if (inst.state.kind != StateKind::Blocked)
    fail(Errc::IllegalTransition, "mark_woken from " + inst.state.str());
  inst.state = InstanceState::make(StateKind::Running);
  touch(inst, now);
  return inst;
}

Instance mark_completed(Instance inst, SimTime now) {
  if (inst.state.kind != StateKind::Running)
    fail(Errc::IllegalTransition, "mark_completed from " + inst.state.str());
  inst.state = InstanceState::make(StateKind::Terminated);
  touch(inst, now);
  return inst;
}

std::vector<proxy::WakeRule> derive_wake_rules(
    const Instance& inst, const std::optional<sim::BlockReason>& reason) {
  std::vector<proxy::WakeRule> rules;
  if (!reason) return rules;
  if (reason->kind == sim::BlockReason::Kind::Sleep) {
    rules.push_back(proxy::TimerRule{reason->wake_at, inst.instance_id});
    return rules;
  }
  auto it = inst.sim.sockets.find(reason->socket_id);
  if (it == inst.sim.sockets.end())
    fail(Errc::UnknownSocket,
         "block reason references unknown socket '" + reason->socket_id + "'");
  const sim::SocketState& sock = it->second;
  rules.push_back(proxy::PacketRule{sock.remote, sock.local, inst.instance_id,
                                    sock.id});
  return rules;
}

SuspendOutcome suspend_for_block(
    const Machine& machine, Instance inst,
    std::optional<sim::BlockReason> reason, SuspendMode mode, SimTime now,
    const std::function<std::string(const Instance&)>& write_archive) {
  // A Blocked instance carries its own reason; a Running one is at a block
  // boundary and the caller passes the reason the run just reported.
  if (inst.state.kind == StateKind::Blocked && !reason)
    reason = inst.state.reason;

  SuspendOutcome out;
  out.rules = derive_wake_rules(inst, reason);

  if (mode == SuspendMode::Pause) {
    auto t = machine.apply(std::move(inst), Event::Pause, now,
                           {.reason = reason});
    out.instance = std::move(t.instance);
    out.cost_s = t.cost_s;
  } else {
    auto t1 = machine.apply(std::move(inst), Event::Checkpoint, now,
                            {.reason = reason});
    out.cost_s = t1.cost_s;
    t1.instance.wake_rules = out.rules;
    std::string archive_id;
    if (write_archive) archive_id = write_archive(t1.instance);
    auto t2 = machine.apply(std::move(t1.instance), Event::Complete, now,
                            {.archive_id = archive_id});
    out.instance = std::move(t2.instance);
    out.cost_s += t2.cost_s;
  }
  out.instance.wake_rules = out.rules;
  return out;
}

}  // namespace edgefaas::lifecycle
