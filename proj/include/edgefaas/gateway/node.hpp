#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>

#include "edgefaas/gateway/config.hpp"
#include "edgefaas/gateway/registry.hpp"
#include "edgefaas/lifecycle/machine.hpp"
#include "edgefaas/migration/channel.hpp"
#include "edgefaas/proxy/sleep_proxy.hpp"
#include "edgefaas/store/store.hpp"

namespace edgefaas::gateway {

struct InvocationRecord {
  std::string request_id;
  std::string function_id;
  std::string instance_id;

  enum class Path : std::uint8_t { Cold, WarmResume, RestoreFromCheckpoint };
  Path path = Path::Cold;

  double path_charge = 0;       // entry cost of the chosen path
  double charged_latency = 0;   // sum of every transition charged in-request

  enum class Outcome : std::uint8_t { Responded, Suspended, Failed };
  Outcome outcome = Outcome::Responded;
  Bytes response;

  nlohmann::json to_json() const;
};

const char* path_name(InvocationRecord::Path p);
const char* outcome_name(InvocationRecord::Outcome o);

struct TraceEvent {
  std::string node;
  std::string kind;      // transition | wake | packet | wire | invoke
  std::string instance;
  std::string detail;

  std::string str() const {
    return node + " " + kind + " " + instance + " " + detail;
  }
};

using TraceSink = std::function<void(const TraceEvent&)>;

struct InjectOutcome {
  bool matched = false;
  std::string instance_id;
  bool woke = false;
};

struct MigrationOutcome {
  bool committed = false;
  std::string reason;               // abort reason when not committed
  std::string target_instance_id;   // set on commit
  std::uint64_t wire_bytes = 0;
};

// One transfer connection to a peer. The handle owns whatever keeps the
// peer side alive (a thread for in-process conduits, a socket otherwise).
class OutboundChannel {
 public:
  virtual ~OutboundChannel() = default;
  virtual migration::Channel& channel() = 0;
  virtual std::uint64_t wire_bytes() const = 0;
};

using ChannelFactory =
    std::function<std::unique_ptr<OutboundChannel>(const Peer& peer)>;

struct NodeStats {
  std::vector<InvocationRecord> invocations;
  std::uint64_t memory_usage = 0;
  std::uint64_t memory_capacity = 0;
  std::uint64_t dropped_packets = 0;
  std::uint64_t wakes = 0;
  std::uint64_t migrations_out = 0;
  std::uint64_t migrations_in = 0;
  std::uint64_t backups_written = 0;
  double total_charged_s = 0;

  nlohmann::json to_json() const;
};

// A single edge node: route table, instance table, lifecycle owner, sleep
// proxy, checkpoint store and migration endpoints. All public entry
// points serialize on one internal mutex; per-instance transitions are
// therefore single-writer by construction.
class Node {
 public:
  struct Options {
    std::string node_id = "node";
    std::filesystem::path data_dir;
    NodeConfig config;
  };

  explicit Node(Options opts);

  const std::string& node_id() const { return node_id_; }
  const NodeConfig& config() const { return config_; }

  void load_registry(const nlohmann::json& j);
  bool registry_loaded() const;
  const FunctionRegistry& registry() const { return registry_; }

  // --- trigger path ---------------------------------------------------
  InvocationRecord handle_trigger(const std::string& route, Bytes payload);

  // --- admin ----------------------------------------------------------
  std::vector<lifecycle::Instance> instances() const;
  lifecycle::Instance instance(const std::string& instance_id) const;
  nlohmann::json instance_view(const std::string& instance_id) const;

  std::string checkpoint_instance(const std::string& instance_id);
  std::string restore_archive(const std::string& archive_id);
  // Resumes a suspended instance in place (Checkpointed -> restore,
  // Paused -> unpause, Blocked -> re-evaluate); runs the continuation.
  void resume_instance(const std::string& instance_id);
  void pause_instance(const std::string& instance_id);
  void unpause_instance(const std::string& instance_id);
  void reap_instance(const std::string& instance_id);
  InjectOutcome inject_packet(const Addr& src, const Addr& dst, Bytes payload);
  MigrationOutcome migrate_instance(const std::string& instance_id,
                                    const std::string& target_node);
  std::vector<std::string> run_backup_tick();
  std::optional<policy::OffloadPlan> evaluate_offload(
      std::span<const policy::NodeInfo> peers) const;

  void advance_clock(SimTime dt);
  SimTime now() const;

  NodeStats stats() const;
  policy::NodeInfo info() const;
  std::vector<std::string> archives() const;
  store::CheckpointStore& checkpoint_store() { return store_; }

  // --- migration target side -------------------------------------------
  // Runs the server half of the transfer protocol over one connection.
  void serve_migration(migration::Channel& ch);

  void set_channel_factory(ChannelFactory f) { channel_factory_ = std::move(f); }
  void set_trace_sink(TraceSink sink) { trace_sink_ = std::move(sink); }

  // Test hook: runs between wake-rule registration and the checkpoint
  // write, i.e. while the instance is Checkpointing.
  void set_mid_suspend_hook(std::function<void()> hook) {
    mid_suspend_hook_ = std::move(hook);
  }

 private:
  struct RunCharge {
    double* path_charge = nullptr;
    InvocationRecord* record = nullptr;
  };

  lifecycle::Instance& require_instance(const std::string& id);
  const lifecycle::Instance& require_instance(const std::string& id) const;
  lifecycle::Instance make_instance(const lifecycle::FunctionSpec& spec);
  Addr alloc_port();

  void trace(const std::string& kind, const std::string& instance,
             const std::string& detail);
  void apply_transition(lifecycle::Instance& inst, lifecycle::Event ev,
                        const lifecycle::TransitionArgs& args,
                        InvocationRecord* record);
  void set_state(lifecycle::Instance& inst, lifecycle::Instance updated,
                 double cost, InvocationRecord* record);

  // Run continuation: executes the program, settles the outcome
  // (respond / block+verdict / fail), registers wake rules.
  void run_and_settle(lifecycle::Instance& inst, InvocationRecord* record);
  // After Unpause: re-enters Blocked when the recorded reason still holds
  // (a sleep deadline lives in the reason, not the program counter).
  void continue_after_resume(lifecycle::Instance& inst,
                             InvocationRecord* record);
  void settle_block(lifecycle::Instance& inst, sim::BlockReason reason,
                    InvocationRecord* record);
  void handle_wake(const proxy::WakeAction& action);
  void drain_proxy_into(lifecycle::Instance& inst);

  void checkpoint_locked(lifecycle::Instance& inst,
                         std::optional<sim::BlockReason> reason,
                         InvocationRecord* record);
  void pause_locked(lifecycle::Instance& inst,
                    std::optional<sim::BlockReason> reason,
                    InvocationRecord* record);
  void restore_locked(lifecycle::Instance& inst, const store::Archive& archive,
                      InvocationRecord* record);
  void reap_locked(lifecycle::Instance& inst);

  store::Manifest make_manifest(const lifecycle::Instance& inst,
                                const std::vector<proxy::WakeRule>& rules);
  std::string write_checkpoint(const lifecycle::Instance& inst);

  void ensure_capacity(std::uint64_t extra_bytes);
  void idle_reaper();
  void do_backups();
  std::uint64_t usage_locked() const;
  void journal(const std::string& phase, const std::string& instance_id,
               const std::string& archive_id, const std::string& target);

  void push_backup(const std::string& archive_id, const Peer& peer);
  std::optional<sim::BlockReason> reason_from_rules(
      const std::vector<proxy::WakeRule>& rules) const;

  std::string node_id_;
  std::filesystem::path data_dir_;
  NodeConfig config_;
  lifecycle::Machine machine_;
  FunctionRegistry registry_;
  store::CheckpointStore store_;
  proxy::SleepProxy proxy_;

  std::map<std::string, lifecycle::Instance> instances_;
  std::vector<InvocationRecord> records_;

  SimTime clock_{};
  std::uint64_t next_instance_ = 1;
  std::uint64_t next_request_ = 1;
  std::uint64_t next_seq_ = 1;
  std::uint16_t next_port_ = 5000;

  std::uint64_t migrations_out_ = 0;
  std::uint64_t migrations_in_ = 0;
  std::uint64_t backups_written_ = 0;
  double total_charged_s_ = 0;
  std::string last_archive_id_;

  ChannelFactory channel_factory_;
  TraceSink trace_sink_;
  std::function<void()> mid_suspend_hook_;

  mutable std::recursive_mutex mu_;
};

}  // namespace edgefaas::gateway
