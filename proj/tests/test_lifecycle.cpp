#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "edgefaas/lifecycle/machine.hpp"
#include "util.hpp"

using namespace edgefaas;
using namespace edgefaas::lifecycle;
using testutil::Rng;

namespace {

Machine machine() { return Machine(policy::CostModel{}); }

Instance base_instance() {
  Instance inst;
  inst.instance_id = "i1";
  inst.function_id = "f";
  inst.created_at = SimTime::from_seconds(1);
  inst.last_active_at = SimTime::from_seconds(1);
  sim::SocketState sock;
  sock.id = "s1";
  sock.local = Addr{"A", 5000};
  sock.remote = Addr{"B", 80};
  inst.sim.sockets.emplace("s1", sock);
  return inst;
}

Instance in_state(StateKind kind) {
  Instance inst = base_instance();
  switch (kind) {
    case StateKind::Blocked:
      inst.state =
          InstanceState::blocked(sim::BlockReason::sleep_until(SimTime::from_seconds(500)));
      break;
    case StateKind::Checkpointed:
      inst.state = InstanceState::checkpointed("arch");
      break;
    case StateKind::MigratingOut:
      inst.state = InstanceState::make(StateKind::MigratingOut);
      inst.state.archive_id = "arch";
      break;
    case StateKind::Failed:
      inst.state = InstanceState::failed("boom");
      break;
    default:
      inst.state = InstanceState::make(kind);
      break;
  }
  return inst;
}

// The declared transition table, re-stated independently as the oracle.
// Restoring+Complete may land in Running or Blocked depending on whether
// the recorded block condition still holds.
std::set<StateKind> declared_targets(StateKind from, Event ev) {
  using K = StateKind;
  using E = Event;
  if (ev == E::Fail)
    return (from == K::Terminated || from == K::Failed)
               ? std::set<K>{}
               : std::set<K>{K::Failed};
  switch (from) {
    case K::Registered:
      if (ev == E::Invoke) return {K::ColdStarting};
      break;
    case K::ColdStarting:
      if (ev == E::Complete) return {K::Running};
      break;
    case K::Running:
      if (ev == E::Pause) return {K::Paused};
      if (ev == E::Checkpoint) return {K::Checkpointing};
      break;
    case K::Blocked:
      if (ev == E::Checkpoint) return {K::Checkpointing};
      break;
    case K::Paused:
      if (ev == E::Unpause) return {K::Running};
      if (ev == E::Checkpoint) return {K::Checkpointing};
      if (ev == E::Reap) return {K::Terminated};
      break;
    case K::Checkpointing:
      if (ev == E::Complete) return {K::Checkpointed};
      break;
    case K::Checkpointed:
      if (ev == E::Restore) return {K::Restoring};
      if (ev == E::MigrateStart) return {K::MigratingOut};
      if (ev == E::Reap) return {K::Terminated};
      break;
    case K::Restoring:
      if (ev == E::Complete) return {K::Running, K::Blocked};
      break;
    case K::MigratingOut:
      if (ev == E::MigrateCommit) return {K::Terminated};
      if (ev == E::MigrateAbort) return {K::Checkpointed};
      break;
    case K::Terminated:
    case K::Failed:
      break;
  }
  return {};
}

constexpr StateKind kAllStates[] = {
    StateKind::Registered,   StateKind::ColdStarting, StateKind::Running,
    StateKind::Blocked,      StateKind::Paused,       StateKind::Checkpointing,
    StateKind::Checkpointed, StateKind::Restoring,    StateKind::MigratingOut,
    StateKind::Terminated,   StateKind::Failed,
};

}  // namespace

TEST_CASE("pause from running, per the measured pause path") {
  auto out = machine().apply(in_state(StateKind::Running), Event::Pause,
                             SimTime::from_seconds(2));
  CHECK(out.instance.state.kind == StateKind::Paused);
  CHECK(out.cost_s == doctest::Approx(0.857));
}

TEST_CASE("absorbing states reject every event") {
  for (Event ev : kAllEvents) {
    CHECK_THROWS_AS(
        machine().apply(in_state(StateKind::Terminated), ev, {}), Error);
    CHECK_THROWS_AS(machine().apply(in_state(StateKind::Failed), ev, {}),
                    Error);
  }
}

TEST_CASE("invoke on a terminated instance is IllegalTransition") {
  try {
    machine().apply(in_state(StateKind::Terminated), Event::Invoke, {});
    FAIL("expected IllegalTransition");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IllegalTransition);
  }
}

TEST_CASE("every state x event pair matches the declared table") {
  const Machine m = machine();
  const SimTime now = SimTime::from_seconds(100);
  int legal = 0, illegal = 0;

  for (StateKind from : kAllStates) {
    for (Event ev : kAllEvents) {
      const auto expect = declared_targets(from, ev);
      // two condition worlds for the Restoring re-evaluation
      for (bool condition_holds : {true, false}) {
        Instance inst = in_state(from);
        inst.suspended_reason = sim::BlockReason::sleep_until(
            condition_holds ? SimTime::from_seconds(200)   // still sleeping
                            : SimTime::from_seconds(50));  // already passed
        TransitionArgs args;
        args.archive_id = "arch";
        args.cause = "x";
        try {
          auto out = m.apply(inst, ev, now, args);
          ++legal;
          CHECK(expect.count(out.instance.state.kind) == 1);
          if (from == StateKind::Restoring && ev == Event::Complete) {
            CHECK(out.instance.state.kind ==
                  (condition_holds ? StateKind::Blocked : StateKind::Running));
          }
        } catch (const Error& e) {
          ++illegal;
          CHECK(e.code() == Errc::IllegalTransition);
          CHECK(expect.empty());
        }
      }
    }
  }
  CHECK(legal > 0);
  CHECK(illegal > 0);
}

TEST_CASE("no event sequence of length <= 6 escapes the declared table") {
  const Machine m = machine();
  const SimTime now = SimTime::from_seconds(100);
  std::uint64_t checked = 0;
  std::set<StateKind> reached;

  // Depth-first over event sequences; recursion only on legal transitions
  // (an illegal event leaves the instance unchanged, so deeper suffixes
  // repeat already-covered sequences).
  auto dfs = [&](auto&& self, const Instance& inst, int depth,
                 const sim::BlockReason& reason) -> void {
    reached.insert(inst.state.kind);
    if (depth == 6) return;
    for (Event ev : kAllEvents) {
      TransitionArgs args;
      args.archive_id = "arch";
      args.cause = "x";
      args.reason = reason;  // what a caller at a block boundary passes
      const auto expect = declared_targets(inst.state.kind, ev);
      ++checked;
      try {
        auto out = m.apply(inst, ev, now, args);
        REQUIRE(expect.count(out.instance.state.kind) == 1);
        self(self, out.instance, depth + 1, reason);
      } catch (const Error& e) {
        REQUIRE(e.code() == Errc::IllegalTransition);
        REQUIRE(expect.empty());
      }
    }
  };

  for (bool condition_holds : {true, false}) {
    Instance start = base_instance();
    const auto reason = sim::BlockReason::sleep_until(
        condition_holds ? SimTime::from_seconds(200) : SimTime::from_seconds(50));
    start.suspended_reason = reason;
    dfs(dfs, start, 0, reason);
  }

  // all states on the main path are reachable within 6 events
  for (StateKind k :
       {StateKind::Registered, StateKind::ColdStarting, StateKind::Running,
        StateKind::Paused, StateKind::Checkpointing, StateKind::Checkpointed,
        StateKind::Restoring, StateKind::Blocked, StateKind::Terminated,
        StateKind::Failed, StateKind::MigratingOut})
    CHECK(reached.count(k) == 1);
  CHECK(checked > 500);
}

TEST_CASE("transition costs follow the cost model") {
  const Machine m = machine();
  CHECK(m.apply(in_state(StateKind::Registered), Event::Invoke, {}).cost_s ==
        doctest::Approx(1.463));
  CHECK(m.apply(in_state(StateKind::Paused), Event::Unpause, {}).cost_s ==
        doctest::Approx(0.850));
  CHECK(m.apply(in_state(StateKind::Blocked), Event::Checkpoint, {}).cost_s ==
        doctest::Approx(1.716));
  CHECK(m.apply(in_state(StateKind::Checkpointed), Event::Restore, {}).cost_s ==
        doctest::Approx(0.438 + 1.763));
  CHECK(m.apply(in_state(StateKind::MigratingOut), Event::MigrateCommit, {})
            .cost_s == doctest::Approx(0.0));
}

TEST_CASE("checkpointed restores carry the archive id through the cycle") {
  const Machine m = machine();
  Instance inst = in_state(StateKind::Checkpointed);
  CHECK(inst.state.archive_id == "arch");
  auto out = m.apply(inst, Event::MigrateStart, {});
  CHECK(out.instance.state.kind == StateKind::MigratingOut);
  auto back = m.apply(out.instance, Event::MigrateAbort, {});
  CHECK(back.instance.state.kind == StateKind::Checkpointed);
  CHECK(back.instance.state.archive_id == "arch");
}

TEST_CASE("suspend_for_block: blocked sleep checkpoints into a timer rule") {
  Instance inst = base_instance();
  inst.state =
      InstanceState::blocked(sim::BlockReason::sleep_until(SimTime::from_seconds(60)));
  auto out = suspend_for_block(machine(), inst, std::nullopt,
                               SuspendMode::Checkpoint, SimTime::from_seconds(30),
                               [](const Instance&) { return "arch-1"; });
  CHECK(out.instance.state.kind == StateKind::Checkpointed);
  CHECK(out.instance.state.archive_id == "arch-1");
  REQUIRE(out.rules.size() == 1);
  const auto* timer = std::get_if<proxy::TimerRule>(&out.rules[0]);
  REQUIRE(timer);
  CHECK(timer->wake_at == SimTime::from_seconds(60));
  CHECK(timer->instance_id == "i1");
}

TEST_CASE("suspend_for_block: blocked recv checkpoints into a packet rule") {
  Instance inst = base_instance();
  inst.state = InstanceState::blocked(sim::BlockReason::net_recv("s1"));
  auto out = suspend_for_block(machine(), inst, std::nullopt,
                               SuspendMode::Checkpoint, {},
                               [](const Instance&) { return "arch-2"; });
  REQUIRE(out.rules.size() == 1);
  const auto* rule = std::get_if<proxy::PacketRule>(&out.rules[0]);
  REQUIRE(rule);
  REQUIRE(rule->src);
  CHECK(rule->src->str() == "B:80");   // remote end
  CHECK(rule->dst.str() == "A:5000");  // our local 4-tuple end
  CHECK(rule->socket_id == "s1");
}

TEST_CASE("suspend_for_block: pausing a plain running instance has no rules") {
  Instance inst = base_instance();
  inst.state = InstanceState::make(StateKind::Running);
  auto out =
      suspend_for_block(machine(), inst, std::nullopt, SuspendMode::Pause, {});
  CHECK(out.instance.state.kind == StateKind::Paused);
  CHECK(out.rules.empty());
  CHECK(out.cost_s == doctest::Approx(0.857));
}

TEST_CASE("suspend_for_block: pausing a parked Blocked instance is illegal") {
  Instance inst = base_instance();
  inst.state =
      InstanceState::blocked(sim::BlockReason::sleep_until(SimTime::from_seconds(9)));
  CHECK_THROWS_AS(
      suspend_for_block(machine(), inst, std::nullopt, SuspendMode::Pause, {}),
      Error);
}

TEST_CASE("suspend_for_block: unknown socket in the reason") {
  Instance inst = base_instance();
  inst.state = InstanceState::blocked(sim::BlockReason::net_recv("ghost"));
  try {
    suspend_for_block(machine(), inst, std::nullopt, SuspendMode::Checkpoint,
                      {}, [](const Instance&) { return "a"; });
    FAIL("expected UnknownSocket");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownSocket);
  }
}

TEST_CASE("no lost suspension context across checkpoint/restore") {
  const Machine m = machine();
  // sleep that expires during suspension -> Running
  {
    Instance inst = base_instance();
    inst.state = InstanceState::blocked(
        sim::BlockReason::sleep_until(SimTime::from_seconds(60)));
    auto ck = suspend_for_block(m, inst, std::nullopt, SuspendMode::Checkpoint,
                                SimTime::from_seconds(30),
                                [](const Instance&) { return "a"; });
    auto rst = m.apply(ck.instance, Event::Restore, SimTime::from_seconds(60));
    auto done = m.apply(rst.instance, Event::Complete, SimTime::from_seconds(60));
    CHECK(done.instance.state.kind == StateKind::Running);
  }
  // sleep still pending -> Blocked with the same reason
  {
    Instance inst = base_instance();
    inst.state = InstanceState::blocked(
        sim::BlockReason::sleep_until(SimTime::from_seconds(60)));
    auto ck = suspend_for_block(m, inst, std::nullopt, SuspendMode::Checkpoint,
                                SimTime::from_seconds(30),
                                [](const Instance&) { return "a"; });
    auto rst = m.apply(ck.instance, Event::Restore, SimTime::from_seconds(45));
    auto done = m.apply(rst.instance, Event::Complete, SimTime::from_seconds(45));
    REQUIRE(done.instance.state.kind == StateKind::Blocked);
    CHECK(done.instance.state.reason->wake_at == SimTime::from_seconds(60));
  }
  // buffered bytes satisfy a NetRecv block -> Running
  {
    Instance inst = base_instance();
    inst.state = InstanceState::blocked(sim::BlockReason::net_recv("s1"));
    auto ck = suspend_for_block(m, inst, std::nullopt, SuspendMode::Checkpoint,
                                {}, [](const Instance&) { return "a"; });
    Instance with_bytes = ck.instance;
    sim::deliver(with_bytes.sim, "s1", to_bytes("data"));
    auto rst = m.apply(with_bytes, Event::Restore, {});
    auto done = m.apply(rst.instance, Event::Complete, {});
    CHECK(done.instance.state.kind == StateKind::Running);
  }
}

TEST_CASE("timestamps never decrease under random event sequences") {
  const Machine m = machine();
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = base_instance();
    inst.suspended_reason =
        sim::BlockReason::sleep_until(SimTime::from_seconds(rng.range(0, 200)));
    SimTime now{};
    SimTime prev_active = inst.last_active_at;
    for (int step = 0; step < 12; ++step) {
      now += SimTime::from_seconds(static_cast<double>(rng.range(0, 10)));
      const Event ev = kAllEvents[static_cast<size_t>(rng.range(0, 10))];
      try {
        auto out = m.apply(inst, ev, now, {.archive_id = "a", .cause = "c"});
        inst = out.instance;
      } catch (const Error&) {
      }
      CHECK(inst.last_active_at >= prev_active);
      prev_active = inst.last_active_at;
    }
  }
}

TEST_CASE("run-boundary mutations enforce their pre-states") {
  Instance running = in_state(StateKind::Running);
  auto blocked = mark_blocked(running, sim::BlockReason::net_recv("s1"),
                              SimTime::from_seconds(2));
  CHECK(blocked.state.kind == StateKind::Blocked);
  auto woken = mark_woken(blocked, SimTime::from_seconds(3));
  CHECK(woken.state.kind == StateKind::Running);
  auto done = mark_completed(woken, SimTime::from_seconds(4));
  CHECK(done.state.kind == StateKind::Terminated);

  CHECK_THROWS_AS(mark_blocked(done, sim::BlockReason::net_recv("s1"), {}),
                  Error);
  CHECK_THROWS_AS(mark_woken(running, {}), Error);
  CHECK_THROWS_AS(mark_completed(blocked, {}), Error);
}
