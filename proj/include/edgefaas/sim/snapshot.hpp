#pragma once

#include <span>

#include "edgefaas/sim/state.hpp"

namespace edgefaas::sim {

// Canonical snapshot encoding, format version 1:
//   magic "EFSN" (4 bytes), version byte, then five length-prefixed
//   sections: pc, vars (sorted by name), sockets (sorted by id, with full
//   buffers and logs), clock, seed. All integers little-endian fixed
//   width. Identical states produce identical bytes.
inline constexpr std::uint8_t kSnapshotVersion = 1;

Bytes snapshot(const SimState& state);

// Exact inverse of snapshot(). Throws CorruptSnapshot on bad magic,
// unknown version, or any structural violation (overrun, trailing bytes,
// invalid enum values). Whole-archive integrity is the store's job.
SimState resume(std::span<const std::uint8_t> blob);

}  // namespace edgefaas::sim
