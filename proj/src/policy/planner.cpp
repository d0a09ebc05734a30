#include "edgefaas/policy/planner.hpp"

#include <algorithm>

namespace edgefaas::policy {

namespace {

using lifecycle::Instance;
using lifecycle::StateKind;

bool expired(const Instance& inst, SimTime now) {
  return now - inst.last_active_at >= inst.idle_timeout;
}

int priority(StateKind k) {
  switch (k) {
    case StateKind::Blocked: return 0;
    case StateKind::Paused: return 1;
    case StateKind::Running: return 2;
    default: return 3;
  }
}

struct Candidate {
  EvictionAction action;
  int prio;
  SimTime last_active;
};

// Takes exactly `count` candidates, preferring earlier ones whenever the
// remaining slots (filled with the largest remaining frees) can still
// reach the target. `count` comes from min_count_for, so a feasible
// choice always exists.
std::vector<size_t> pick_lexicographic(const std::vector<Candidate>& cands,
                                       size_t count, std::uint64_t target) {
  std::vector<size_t> chosen;
  std::uint64_t got = 0;
  for (size_t i = 0; i < cands.size() && chosen.size() < count; ++i) {
    const size_t slots_after = count - chosen.size() - 1;
    std::vector<std::uint64_t> rest;
    for (size_t j = i + 1; j < cands.size(); ++j)
      rest.push_back(cands[j].action.frees);
    std::sort(rest.rbegin(), rest.rend());
    std::uint64_t best_rest = 0;
    for (size_t j = 0; j < slots_after && j < rest.size(); ++j)
      best_rest += rest[j];
    if (got + cands[i].action.frees + best_rest >= target) {
      chosen.push_back(i);
      got += cands[i].action.frees;
    }
  }
  return chosen;
}

// Smallest k such that the k largest frees sum to at least target.
std::optional<size_t> min_count_for(const std::vector<Candidate>& cands,
                                    std::uint64_t target) {
  if (target == 0) return 0;
  std::vector<std::uint64_t> frees;
  for (const auto& c : cands) frees.push_back(c.action.frees);
  std::sort(frees.rbegin(), frees.rend());
  std::uint64_t sum = 0;
  for (size_t k = 0; k < frees.size(); ++k) {
    sum += frees[k];
    if (sum >= target) return k + 1;
  }
  return std::nullopt;
}

}  // namespace

EvictionPlan plan_eviction(std::span<const Instance> instances,
                           const MemoryModel& model, std::uint64_t needed,
                           const CostModel& costs, SimTime now) {
  if (needed == 0) fail(Errc::ConfigError, "plan_eviction needs a target > 0");

  std::vector<Candidate> reaps;
  std::vector<Candidate> ckpts;
  for (const Instance& inst : instances) {
    const StateKind k = inst.state.kind;
    const std::uint64_t charge = model.charge(k, inst.memory_declared);
    if (k == StateKind::Paused && expired(inst, now)) {
      if (charge > 0)
        reaps.push_back({{ActionKind::Reap, inst.instance_id, charge, 0.0},
                         priority(k), inst.last_active_at});
      continue;
    }
    const bool eligible = k == StateKind::Blocked || k == StateKind::Paused ||
                          (k == StateKind::Running && inst.last_active_at < now);
    if (!eligible) continue;
    const std::uint64_t frees =
        charge > model.checkpointed_bytes ? charge - model.checkpointed_bytes : 0;
    if (frees == 0) continue;
    ckpts.push_back({{ActionKind::Checkpoint, inst.instance_id, frees,
                      costs.checkpoint},
                     priority(k), inst.last_active_at});
  }

  auto by_priority = [](const Candidate& a, const Candidate& b) {
    return std::tie(a.prio, a.last_active.us, a.action.instance_id) <
           std::tie(b.prio, b.last_active.us, b.action.instance_id);
  };
  std::sort(reaps.begin(), reaps.end(), by_priority);
  std::sort(ckpts.begin(), ckpts.end(), by_priority);

  std::uint64_t reap_total = 0;
  for (const auto& c : reaps) reap_total += c.action.frees;

  // Cost is carried by checkpoints alone, so minimize their count first,
  // assuming every reap (free) is available.
  const std::uint64_t ckpt_target = needed > reap_total ? needed - reap_total : 0;
  auto kc = min_count_for(ckpts, ckpt_target);
  if (!kc)
    fail(Errc::InsufficientCandidates,
         "eviction cannot free " + std::to_string(needed) + " bytes");

  auto ckpt_idx = pick_lexicographic(ckpts, *kc, ckpt_target);
  std::uint64_t ckpt_freed = 0;
  for (size_t i : ckpt_idx) ckpt_freed += ckpts[i].action.frees;

  // Now the cheapest reap set covering the remainder.
  const std::uint64_t reap_target = needed > ckpt_freed ? needed - ckpt_freed : 0;
  auto kr = min_count_for(reaps, reap_target);
  if (!kr)
    fail(Errc::InsufficientCandidates,
         "eviction cannot free " + std::to_string(needed) + " bytes");
  auto reap_idx = pick_lexicographic(reaps, *kr, reap_target);

  EvictionPlan plan;
  for (size_t i : reap_idx) {
    plan.actions.push_back(reaps[i].action);
    plan.freed += reaps[i].action.frees;
  }
  for (size_t i : ckpt_idx) {
    plan.actions.push_back(ckpts[i].action);
    plan.freed += ckpts[i].action.frees;
    plan.cost_s += ckpts[i].action.cost_s;
  }
  return plan;
}

std::optional<OffloadPlan> plan_offload(
    std::uint64_t local_usage, const MemoryModel& model,
    std::span<const NodeInfo> peers,
    std::span<const Instance> instances) {
  if (local_usage <= model.watermark_bytes()) return std::nullopt;

  const Instance* best_inst = nullptr;
  const NodeInfo* best_peer = nullptr;
  for (const Instance& inst : instances) {
    const StateKind k = inst.state.kind;
    if (k != StateKind::Blocked && k != StateKind::Checkpointed) continue;
    const std::uint64_t charge = model.running_charge(inst.memory_declared);
    const NodeInfo* peer = nullptr;
    for (const NodeInfo& p : peers) {
      if (p.free_capacity < charge) continue;
      if (!peer || p.free_capacity > peer->free_capacity ||
          (p.free_capacity == peer->free_capacity &&
           p.node_id < peer->node_id))
        peer = &p;
    }
    if (!peer) continue;
    if (!best_inst ||
        charge > model.running_charge(best_inst->memory_declared) ||
        (charge == model.running_charge(best_inst->memory_declared) &&
         inst.instance_id < best_inst->instance_id)) {
      best_inst = &inst;
      best_peer = peer;
    }
  }
  if (!best_inst) return std::nullopt;
  return OffloadPlan{best_inst->instance_id, best_peer->node_id};
}

SuspendVerdict on_block_verdict(const lifecycle::FunctionSpec& spec,
                                SuspendVerdict node_default,
                                std::uint64_t usage,
                                const MemoryModel& model) {
  using OnBlock = lifecycle::FunctionSpec::OnBlock;
  switch (spec.on_block) {
    case OnBlock::Stay: return SuspendVerdict::Stay;
    case OnBlock::Pause: return SuspendVerdict::Pause;
    case OnBlock::Checkpoint: return SuspendVerdict::Checkpoint;
    case OnBlock::Default: break;
  }
  if (node_default != SuspendVerdict::Stay) return node_default;
  if (usage > model.watermark_bytes()) return SuspendVerdict::Checkpoint;
  return SuspendVerdict::Stay;
}

}  // namespace edgefaas::policy
