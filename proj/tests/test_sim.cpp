#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edgefaas/harness/oracle.hpp"
#include "edgefaas/sim/interpreter.hpp"
#include "edgefaas/sim/snapshot.hpp"
#include "util.hpp"

using namespace edgefaas;
using namespace testutil;

namespace {

sim::RunResult run(const sim::Program& p, sim::SimState st = {},
                   SimTime clock = {}) {
  return sim::run_until_block(std::move(st), p, clock, fixed_ports());
}

}  // namespace

TEST_CASE("sleeping program blocks with an absolute deadline") {
  sim::Program p = {sim::Step::sleep(SimTime::from_seconds(60))};
  auto r = run(p, {}, SimTime::from_seconds(0));
  CHECK(r.outcome == sim::RunOutcome::Blocked);
  REQUIRE(r.reason);
  CHECK(r.reason->kind == sim::BlockReason::Kind::Sleep);
  CHECK(r.reason->wake_at == SimTime::from_seconds(60));
  // pc moved past the sleep: resuming after the deadline just continues
  CHECK(r.state.pc == 1);

  auto r2 = run(p, r.state, SimTime::from_seconds(60));
  CHECK(r2.outcome == sim::RunOutcome::Completed);
}

TEST_CASE("sleep deadline is relative to the run clock") {
  sim::Program p = {sim::Step::sleep(SimTime::from_seconds(10))};
  auto r = run(p, {}, SimTime::from_seconds(30));
  REQUIRE(r.reason);
  CHECK(r.reason->wake_at == SimTime::from_seconds(40));
}

TEST_CASE("empty program completes") {
  auto r = run({});
  CHECK(r.outcome == sim::RunOutcome::Completed);
  CHECK(r.state.pc == 0);
}

TEST_CASE("counter program counts") {
  sim::Program p;
  for (int i = 0; i < 5; ++i) p.push_back(sim::Step::incr("c"));
  auto r = run(p);
  CHECK(r.outcome == sim::RunOutcome::Completed);
  CHECK(r.state.vars.at("c") == 5);
}

TEST_CASE("recv blocks on empty buffer and consumes FIFO") {
  sim::Program p = {sim::Step::open("s1", Addr{"peer", 80}),
                    sim::Step::recv("s1"), sim::Step::recv("s1"),
                    sim::Step::respond("${recv:s1}")};
  auto r = run(p);
  CHECK(r.outcome == sim::RunOutcome::Blocked);
  REQUIRE(r.reason);
  CHECK(r.reason->kind == sim::BlockReason::Kind::NetRecv);
  CHECK(r.reason->socket_id == "s1");
  CHECK(r.state.pc == 1);  // recv is re-entrant: pc stays at the step

  sim::deliver(r.state, "s1", to_bytes("b1"));
  sim::deliver(r.state, "s1", to_bytes("b2"));
  auto r2 = run(p, r.state);
  CHECK(r2.outcome == sim::RunOutcome::Completed);
  CHECK(to_string(r2.state.sockets.at("s1").recv_log) == "b1b2");
  REQUIRE(r2.responses.size() == 1);
  CHECK(to_string(r2.responses[0]) == "b1b2");
}

TEST_CASE("still_blocked re-evaluates conditions") {
  sim::SimState st;
  auto sleep_reason = sim::BlockReason::sleep_until(SimTime::from_seconds(60));
  CHECK(sim::still_blocked(sleep_reason, st, SimTime::from_seconds(30)));
  CHECK_FALSE(sim::still_blocked(sleep_reason, st, SimTime::from_seconds(60)));

  sim::SocketState sock;
  sock.id = "s1";
  st.sockets.emplace("s1", sock);
  auto recv_reason = sim::BlockReason::net_recv("s1");
  CHECK(sim::still_blocked(recv_reason, st, {}));
  st.sockets.at("s1").recv_buffer.push_back(to_bytes("x"));
  CHECK_FALSE(sim::still_blocked(recv_reason, st, {}));
}

TEST_CASE("send and close errors") {
  sim::Program p = {sim::Step::open("s1", Addr{"peer", 80}),
                    sim::Step::close("s1"), sim::Step::send("s1", to_bytes("x"))};
  CHECK_THROWS_AS(run(p), Error);
  try {
    run(p);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidSocket);
  }
}

TEST_CASE("deliver to closed or unknown socket fails") {
  sim::SimState st;
  CHECK_THROWS_AS(sim::deliver(st, "nope", to_bytes("x")), Error);
  sim::SocketState sock;
  sock.id = "s1";
  sock.status = sim::SocketStatus::Closed;
  st.sockets.emplace("s1", sock);
  CHECK_THROWS_AS(sim::deliver(st, "s1", to_bytes("x")), Error);
}

TEST_CASE("runaway programs trip the tick guard") {
  sim::Program p = {sim::Step::compute(10)};
  sim::RunLimits limits;
  limits.max_ticks = 5;
  CHECK_THROWS_AS(
      sim::run_until_block({}, p, {}, fixed_ports(), limits), Error);
}

TEST_CASE("snapshot is deterministic and round-trips") {
  sim::Program p = {sim::Step::open("s1", Addr{"peer", 80}),
                    sim::Step::send("s1", to_bytes("hello")),
                    sim::Step::incr("c"), sim::Step::recv("s1")};
  auto r = run(p, {}, SimTime::from_seconds(7));
  r.state.rng_seed = 42;
  sim::deliver(r.state, "s1", to_bytes("pending"));

  const Bytes b1 = sim::snapshot(r.state);
  const Bytes b2 = sim::snapshot(r.state);
  CHECK(b1 == b2);

  const sim::SimState back = sim::resume(b1);
  CHECK(back == r.state);
}

TEST_CASE("states differing in one var produce different bytes") {
  sim::SimState a;
  a.vars["c"] = 1;
  sim::SimState b;
  b.vars["c"] = 2;
  CHECK(sim::snapshot(a) != sim::snapshot(b));
}

TEST_CASE("truncated and structurally corrupt snapshots are rejected") {
  sim::SimState st;
  st.vars["x"] = 9;
  Bytes blob = sim::snapshot(st);

  // truncation at every length
  for (size_t len = 0; len < blob.size(); ++len) {
    Bytes cut(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(len));
    CHECK_THROWS_AS(sim::resume(cut), Error);
  }
  // trailing garbage
  Bytes extended = blob;
  extended.push_back(0);
  CHECK_THROWS_AS(sim::resume(extended), Error);
  // bad magic
  Bytes bad = blob;
  bad[0] ^= 0xFF;
  CHECK_THROWS_AS(sim::resume(bad), Error);
  // bad version
  bad = blob;
  bad[4] = 99;
  CHECK_THROWS_AS(sim::resume(bad), Error);
}

TEST_CASE("respond template rendering") {
  sim::SimState st;
  st.vars["n"] = 12;
  sim::SocketState sock;
  sock.id = "s1";
  sock.recv_log = to_bytes("DATA");
  st.sockets.emplace("s1", sock);
  CHECK(to_string(sim::render_template("n=${var:n} got ${recv:s1}", st)) ==
        "n=12 got DATA");
  CHECK(to_string(sim::render_template("${var:missing}", st)) == "0");
  CHECK(to_string(sim::render_template("${weird}", st)) == "${weird}");
}

TEST_CASE("program json round-trip and validation") {
  auto reg = registry_json();
  for (const auto& fn : reg) {
    auto p = sim::program_from_json(fn.at("program"));
    auto j = sim::program_to_json(p);
    auto p2 = sim::program_from_json(j);
    CHECK(p.size() == p2.size());
  }
  CHECK_THROWS_AS(sim::program_from_json(nlohmann::json::parse(
                      R"([{"op":"send","socket":"s1","payload":"x"}])")),
                  Error);
  CHECK_THROWS_AS(sim::program_from_json(nlohmann::json::parse(
                      R"([{"op":"warp"}])")),
                  Error);
}

// Suspend/resume transparency at the interpreter level: snapshot/resume at
// every block boundary cannot change observable results.
TEST_CASE("interrupted runs match the uninterrupted oracle") {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Rng rng(seed);
    auto gen = random_program(rng, 20);

    auto oracle = harness::oracle_uninterrupted(gen.program, gen.deliveries,
                                                {}, fixed_ports());

    // interpreted run with snapshot/resume at every boundary
    harness::DeliverySchedule pending = gen.deliveries;
    sim::SimState st;
    SimTime clock{};
    auto ports = fixed_ports();
    std::vector<Bytes> responses;
    bool completed = false;
    for (int hops = 0; hops < 1000; ++hops) {
      auto r = sim::run_until_block(st, gen.program, clock, ports);
      st = sim::resume(sim::snapshot(r.state));  // round-trip every stop
      responses.insert(responses.end(), r.responses.begin(), r.responses.end());
      if (r.outcome == sim::RunOutcome::Completed) {
        completed = true;
        break;
      }
      if (r.reason->kind == sim::BlockReason::Kind::Sleep) {
        clock = r.reason->wake_at;
      } else {
        auto& queue = pending[r.reason->socket_id];
        if (queue.empty()) break;  // oracle also stops here
        sim::deliver(st, r.reason->socket_id, queue.front());
        queue.pop_front();
      }
    }

    CHECK(completed == oracle.completed);
    CHECK(st.vars == oracle.state.vars);
    REQUIRE(st.sockets.size() == oracle.state.sockets.size());
    for (const auto& [id, sock] : st.sockets) {
      const auto& osock = oracle.state.sockets.at(id);
      CHECK(sock.sent_log == osock.sent_log);
      CHECK(sock.recv_log == osock.recv_log);
      CHECK(sock.status == osock.status);
    }
    REQUIRE(responses.size() == oracle.responses.size());
    for (size_t i = 0; i < responses.size(); ++i)
      CHECK(responses[i] == oracle.responses[i]);
  }
}
