#include "edgefaas/policy/models.hpp"

namespace edgefaas::policy {

void CostModel::validate() const {
  for (double v : {start_cold, pause, unpause, checkpoint, create_container,
                   start_from_checkpoint}) {
    if (v < 0) fail(Errc::ConfigError, "cost model entries must be >= 0");
  }
}

std::uint64_t MemoryModel::charge(lifecycle::StateKind kind,
                                  std::uint64_t declared) const {
  using lifecycle::StateKind;
  switch (kind) {
    case StateKind::ColdStarting:
    case StateKind::Running:
    case StateKind::Blocked:
    case StateKind::Checkpointing:  // still resident while the write runs
    case StateKind::Restoring:
      return running_charge(declared);
    case StateKind::Paused:
      return paused_charge(declared);
    case StateKind::Checkpointed:
    case StateKind::MigratingOut:  // archive-only
      return checkpointed_bytes;
    case StateKind::Registered:
    case StateKind::Terminated:
    case StateKind::Failed:
      return 0;
  }
  return 0;
}

std::uint64_t memory_usage(std::span<const lifecycle::Instance> instances,
                           const MemoryModel& model) {
  std::uint64_t total = 0;
  for (const auto& inst : instances)
    total += model.charge(inst.state.kind, inst.memory_declared);
  return total;
}

}  // namespace edgefaas::policy
