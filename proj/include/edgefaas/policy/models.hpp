#pragma once

#include <optional>
#include <span>

#include "edgefaas/lifecycle/types.hpp"

namespace edgefaas::policy {

// Transition latencies in seconds. Defaults are the measured values the
// runtime charges for each lifecycle operation; all configurable.
struct CostModel {
  double start_cold = 1.463;
  double pause = 0.857;
  double unpause = 0.850;
  double checkpoint = 1.716;
  double create_container = 0.438;
  double start_from_checkpoint = 1.763;

  double restore() const { return create_container + start_from_checkpoint; }

  void validate() const;  // throws ConfigError on negative entries
};

// Per-state memory charges. Paused defaults to the running charge (pausing
// frees nothing); checkpointed instances live on disk and charge zero.
struct MemoryModel {
  std::uint64_t node_capacity = 512ull << 20;
  double high_watermark = 0.8;
  std::optional<std::uint64_t> running_override;   // default: memory_declared
  std::optional<std::uint64_t> paused_override;    // default: running charge
  std::uint64_t checkpointed_bytes = 0;

  std::uint64_t running_charge(std::uint64_t declared) const {
    return running_override ? *running_override : declared;
  }
  std::uint64_t paused_charge(std::uint64_t declared) const {
    return paused_override ? *paused_override : running_charge(declared);
  }
  // Charge for an instance in the given lifecycle state.
  std::uint64_t charge(lifecycle::StateKind kind, std::uint64_t declared) const;

  std::uint64_t watermark_bytes() const {
    return static_cast<std::uint64_t>(high_watermark *
                                      static_cast<double>(node_capacity));
  }
};

std::uint64_t memory_usage(std::span<const lifecycle::Instance> instances,
                           const MemoryModel& model);

}  // namespace edgefaas::policy
