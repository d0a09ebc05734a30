#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edgefaas/harness/cluster.hpp"
#include "util.hpp"

using namespace edgefaas;
using namespace edgefaas::harness;
using lifecycle::StateKind;

namespace {

std::unique_ptr<Cluster> two_nodes(nlohmann::json registry_b = nullptr) {
  return std::make_unique<Cluster>(
      std::vector<Cluster::NodeSpec>{{"A", {}, nullptr},
                                     {"B", {}, std::move(registry_b)}},
      testutil::registry_json());
}

// Drives the counter function to c=value (blocked on its next sleep).
std::string counter_at(Cluster& cluster, int value) {
  auto record = cluster.node("A").handle_trigger("counter", {});
  for (int i = 1; i < value; ++i)
    cluster.advance_clock(SimTime::from_seconds(1));
  auto inst = cluster.node("A").instance(record.instance_id);
  REQUIRE(inst.sim.vars.at("c") == value);
  REQUIRE(inst.state.kind == StateKind::Blocked);
  return record.instance_id;
}

// Non-terminal instances of the counter function across the cluster.
int live_owners(Cluster& cluster) {
  int live = 0;
  for (const auto& node_id : cluster.node_ids())
    for (const auto& inst : cluster.node(node_id).instances())
      if (inst.function_id == "counter" && !inst.state.absorbing()) ++live;
  return live;
}

}  // namespace

TEST_CASE("counter checkpointed at 7 resumes on the target and reaches 8") {
  auto cluster = two_nodes();
  const std::string src = counter_at(*cluster, 7);
  cluster->node("A").checkpoint_instance(src);

  auto outcome = cluster->node("A").migrate_instance(src, "B");
  REQUIRE(outcome.committed);
  CHECK(cluster->node("A").instance(src).state.kind == StateKind::Terminated);

  auto moved = cluster->node("B").instance(outcome.target_instance_id);
  CHECK(moved.state.kind == StateKind::Blocked);
  CHECK(moved.sim.vars.at("c") == 7);

  cluster->advance_clock(SimTime::from_seconds(1));
  moved = cluster->node("B").instance(outcome.target_instance_id);
  CHECK(moved.sim.vars.at("c") == 8);  // continued where it left off

  cluster->advance_clock(SimTime::from_seconds(5));
  moved = cluster->node("B").instance(outcome.target_instance_id);
  CHECK(moved.state.kind == StateKind::Terminated);
  CHECK(to_string(*moved.response) == "count=8");
  CHECK(cluster->node("B").stats().migrations_in == 1);
  CHECK(cluster->node("A").stats().migrations_out == 1);
}

TEST_CASE("migrate auto-checkpoints a blocked instance first") {
  auto cluster = two_nodes();
  const std::string src = counter_at(*cluster, 3);
  auto outcome = cluster->node("A").migrate_instance(src, "B");
  REQUIRE(outcome.committed);
  CHECK(cluster->node("B").instance(outcome.target_instance_id).sim.vars.at("c") == 3);
}

TEST_CASE("target without the base image rejects; source stays checkpointed") {
  auto other = nlohmann::json::parse(R"([
    {"function_id": "unrelated", "route": "u", "image_digest": "img-other",
     "image_size": 1000, "memory_declared": 1000,
     "program": [{"op": "respond", "template": "x"}]}
  ])");
  auto cluster = two_nodes(other);
  const std::string src = counter_at(*cluster, 4);
  cluster->node("A").checkpoint_instance(src);

  auto outcome = cluster->node("A").migrate_instance(src, "B");
  CHECK_FALSE(outcome.committed);
  CHECK(outcome.reason == "RejectNoImage");
  CHECK(cluster->node("A").instance(src).state.kind == StateKind::Checkpointed);
  CHECK(cluster->node("B").archives().empty());
  CHECK(cluster->node("B").instances().empty());
}

TEST_CASE("target over capacity rejects") {
  auto registry_b = testutil::registry_json();
  auto cluster = std::make_unique<Cluster>(
      std::vector<Cluster::NodeSpec>{
          {"A", {}, nullptr},
          {"B",
           [] {
             gateway::NodeConfig c;
             c.memory.node_capacity = 1;  // nothing fits
             return c;
           }(),
           nullptr}},
      testutil::registry_json());
  const std::string src = counter_at(*cluster, 2);
  auto outcome = cluster->node("A").migrate_instance(src, "B");
  CHECK_FALSE(outcome.committed);
  CHECK(outcome.reason == "RejectCapacity");
  CHECK(cluster->node("A").instance(src).state.kind == StateKind::Checkpointed);
}

TEST_CASE("migrating to an unknown peer or to self fails cleanly") {
  auto cluster = two_nodes();
  const std::string src = counter_at(*cluster, 2);
  cluster->node("A").checkpoint_instance(src);
  CHECK_THROWS_AS(cluster->node("A").migrate_instance(src, "Z"), Error);
  CHECK_THROWS_AS(cluster->node("A").migrate_instance(src, "A"), Error);
  CHECK(cluster->node("A").instance(src).state.kind == StateKind::Checkpointed);
}

TEST_CASE("exactly one owner at every connection-kill point") {
  // happy-path frame count: Offer, Accept, Chunk, Complete, Restored = 5
  for (int kill_after = 0; kill_after <= 6; ++kill_after) {
    CAPTURE(kill_after);
    auto cluster = two_nodes();
    const std::string src = counter_at(*cluster, 3);
    cluster->node("A").checkpoint_instance(src);

    cluster->set_kill_after_frames(kill_after);
    auto outcome = cluster->node("A").migrate_instance(src, "B");
    cluster->set_kill_after_frames(-1);

    CHECK(live_owners(*cluster) == 1);

    if (outcome.committed) {
      CHECK(kill_after >= 5);  // the whole protocol fit under the budget
      CHECK(cluster->node("A").instance(src).state.kind == StateKind::Terminated);
    } else {
      // source still owns a restorable checkpoint; target kept nothing
      auto inst = cluster->node("A").instance(src);
      CHECK(inst.state.kind == StateKind::Checkpointed);
      CHECK(cluster->node("B").instances().empty());
      CHECK(cluster->node("B").archives().empty());

      // the archive is intact: re-migration succeeds
      auto retry = cluster->node("A").migrate_instance(src, "B");
      REQUIRE(retry.committed);
      CHECK(cluster->node("B").instance(retry.target_instance_id).sim.vars.at("c") == 3);
      CHECK(live_owners(*cluster) == 1);
    }

    // whoever owns it finishes with the uninterrupted result
    cluster->advance_clock(SimTime::from_seconds(20));
    bool responded = false;
    for (const auto& node_id : cluster->node_ids()) {
      for (const auto& inst : cluster->node(node_id).instances()) {
        if (inst.function_id == "counter" && inst.response) {
          CHECK(to_string(*inst.response) == "count=8");
          responded = true;
        }
      }
    }
    CHECK(responded);
  }
}

TEST_CASE("abort during transfer keeps the source locally restorable") {
  auto cluster = two_nodes();
  const std::string src = counter_at(*cluster, 5);
  cluster->node("A").checkpoint_instance(src);

  cluster->set_kill_after_frames(2);  // dies after Accept
  auto outcome = cluster->node("A").migrate_instance(src, "B");
  cluster->set_kill_after_frames(-1);
  REQUIRE_FALSE(outcome.committed);

  // local restore continues the counter on the source
  cluster->advance_clock(SimTime::from_seconds(10));
  auto inst = cluster->node("A").instance(src);
  CHECK(inst.state.kind == StateKind::Terminated);
  CHECK(to_string(*inst.response) == "count=8");
}

TEST_CASE("only the checkpoint moves, never the image") {
  auto cluster = two_nodes();
  auto record = cluster->node("A").handle_trigger("authorize", {});
  cluster->node("A").checkpoint_instance(record.instance_id);

  auto outcome = cluster->node("A").migrate_instance(record.instance_id, "B");
  REQUIRE(outcome.committed);
  const auto image_size =
      cluster->node("A").registry().function("tcp-auth").image_size;
  CHECK(outcome.wire_bytes > 0);
  CHECK(outcome.wire_bytes < image_size / 5);  // < 0.2x, paper ratio ~0.058

  // wake rules travelled: the packet now wakes the instance on B
  auto moved = cluster->node("B").instance(outcome.target_instance_id);
  REQUIRE(moved.state.kind == StateKind::Blocked);
  const Addr dst = moved.sim.sockets.at("s1").local;
  auto hit = cluster->node("B").inject_packet(Addr{"authorizer", 80}, dst,
                                              to_bytes("YES"));
  CHECK(hit.woke);
  moved = cluster->node("B").instance(outcome.target_instance_id);
  CHECK(to_string(*moved.response) == "granted:YES");
}

TEST_CASE("restored state equals the pre-checkpoint state field by field") {
  auto cluster = two_nodes();
  auto record = cluster->node("A").handle_trigger("authorize", {});
  const auto archive_id = cluster->node("A").checkpoint_instance(record.instance_id);
  const auto before = cluster->node("A").instance(record.instance_id).sim;

  auto outcome = cluster->node("A").migrate_instance(record.instance_id, "B");
  REQUIRE(outcome.committed);
  const auto after = cluster->node("B").instance(outcome.target_instance_id).sim;
  CHECK(before == after);
  CHECK(cluster->node("B").archives() == std::vector<std::string>{archive_id});
}

TEST_CASE("backup push stores the archive remotely without an instance") {
  auto cluster = std::make_unique<Cluster>(
      std::vector<Cluster::NodeSpec>{
          {"A",
           [] {
             gateway::NodeConfig c;
             c.backup_interval = SimTime::from_seconds(10);
             c.backup_push_to = "B";
             return c;
           }(),
           nullptr},
          {"B", {}, nullptr}},
      testutil::registry_json());

  auto record = cluster->node("A").handle_trigger("sleep", {});
  cluster->advance_clock(SimTime::from_seconds(10));  // backup tick + push

  auto remote = cluster->node("B").archives();
  REQUIRE(remote.size() == 1);
  CHECK(cluster->node("B").instances().empty());

  // disaster recovery: the backup restores on the other node
  cluster->node("A").checkpoint_instance(record.instance_id);
  cluster->node("A").reap_instance(record.instance_id);
  const std::string revived = cluster->node("B").restore_archive(remote[0]);
  auto inst = cluster->node("B").instance(revived);
  CHECK(inst.state.kind == StateKind::Blocked);

  cluster->advance_clock(SimTime::from_seconds(50));
  inst = cluster->node("B").instance(revived);
  CHECK(inst.state.kind == StateKind::Terminated);
  CHECK(to_string(*inst.response) == "slept");
}

TEST_CASE("offload planning selects the blocked instance for the freest peer") {
  auto cluster = two_nodes();
  const std::string src = counter_at(*cluster, 2);
  (void)src;
  std::vector<policy::NodeInfo> peers = {cluster->node("B").info()};

  // usage is far below the watermark: nothing to do
  CHECK_FALSE(cluster->node("A").evaluate_offload(peers));

  // shrink capacity so the one blocked instance exceeds the watermark
  gateway::NodeConfig tight;
  tight.memory.node_capacity = 1048576;  // the instance fills 100%
  harness::Cluster small(
      {{"A", tight, nullptr}, {"B", {}, nullptr}}, testutil::registry_json());
  auto record = small.node("A").handle_trigger("counter", {});
  auto plan = small.node("A").evaluate_offload(
      std::vector<policy::NodeInfo>{small.node("B").info()});
  REQUIRE(plan);
  CHECK(plan->instance_id == record.instance_id);
  CHECK(plan->target_node == "B");

  auto outcome = small.node("A").migrate_instance(plan->instance_id, "B");
  CHECK(outcome.committed);
}
