#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "edgefaas/common.hpp"

namespace edgefaas::proxy {

// Wake on a packet whose (src, dst) match. dst is always the suspended
// instance's local 4-tuple end and must be exact; src may be a wildcard.
struct PacketRule {
  std::optional<Addr> src;  // nullopt = wildcard
  Addr dst;
  std::string instance_id;
  std::string socket_id;

  bool operator==(const PacketRule&) const = default;
};

// Wake when the simulated clock reaches wake_at.
struct TimerRule {
  SimTime wake_at{};
  std::string instance_id;

  bool operator==(const TimerRule&) const = default;
};

using WakeRule = std::variant<PacketRule, TimerRule>;

inline const std::string& rule_instance(const WakeRule& r) {
  if (const auto* p = std::get_if<PacketRule>(&r)) return p->instance_id;
  return std::get<TimerRule>(r).instance_id;
}

nlohmann::json rule_to_json(const WakeRule& r);
WakeRule rule_from_json(const nlohmann::json& j);
std::string rule_str(const WakeRule& r);

struct SimPacket {
  Addr src;
  Addr dst;
  Bytes payload;
  std::uint64_t seq = 0;  // assigned by the injector, strictly increasing
};

struct Delivery {
  std::string socket_id;
  Bytes payload;
  std::uint64_t seq = 0;
};

struct WakeAction {
  enum class Trigger : std::uint8_t { Packet, Timer };
  std::string instance_id;
  std::vector<Delivery> deliveries;  // buffered at fire time
  Trigger trigger = Trigger::Packet;
};

}  // namespace edgefaas::proxy
