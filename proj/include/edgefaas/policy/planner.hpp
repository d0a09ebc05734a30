#pragma once

#include <set>
#include <string>
#include <vector>

#include "edgefaas/policy/models.hpp"

namespace edgefaas::policy {

struct NodeInfo {
  std::string node_id;
  Addr address;
  std::uint64_t free_capacity = 0;
  std::set<std::string> base_images;
};

enum class ActionKind : std::uint8_t { Checkpoint, Reap, MigrateOut };

struct EvictionAction {
  ActionKind kind = ActionKind::Checkpoint;
  std::string instance_id;
  std::uint64_t frees = 0;
  double cost_s = 0;
};

struct EvictionPlan {
  std::vector<EvictionAction> actions;
  std::uint64_t freed = 0;
  double cost_s = 0;
};

// Minimal-cost action sequence freeing at least `needed` bytes.
// Candidates: expired Paused instances can be reaped (free); Blocked,
// Paused and idle Running instances can be checkpointed. Pause is never
// planned (it frees nothing). Throws InsufficientCandidates when the
// target is unreachable.
EvictionPlan plan_eviction(std::span<const lifecycle::Instance> instances,
                           const MemoryModel& model, std::uint64_t needed,
                           const CostModel& costs, SimTime now);

struct OffloadPlan {
  std::string instance_id;
  std::string target_node;
};

// When local usage exceeds the high watermark, picks the largest eligible
// Blocked/Checkpointed instance and the peer with the most free capacity
// (ties by node id). Empty when nothing qualifies.
std::optional<OffloadPlan> plan_offload(
    std::uint64_t local_usage, const MemoryModel& model,
    std::span<const NodeInfo> peers,
    std::span<const lifecycle::Instance> instances);

// Verdict applied when a run blocks: keep the instance in memory, pause
// it, or checkpoint it. FunctionSpec.on_block wins; otherwise the node
// default; "stay" escalates to checkpoint above the high watermark.
enum class SuspendVerdict : std::uint8_t { Stay, Pause, Checkpoint };

SuspendVerdict on_block_verdict(const lifecycle::FunctionSpec& spec,
                                SuspendVerdict node_default,
                                std::uint64_t usage, const MemoryModel& model);

}  // namespace edgefaas::policy
