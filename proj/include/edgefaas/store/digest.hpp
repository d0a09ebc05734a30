#pragma once

#include <array>
#include <span>
#include <string>

#include "edgefaas/common.hpp"

namespace edgefaas::store {

inline constexpr const char* kDigestAlgo = "sha256";

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> a,
              std::span<const std::uint8_t> b = {});

std::string hex(const Digest& d);
Digest from_hex(const std::string& s);

}  // namespace edgefaas::store
