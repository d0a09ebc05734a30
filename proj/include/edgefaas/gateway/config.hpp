#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "edgefaas/policy/models.hpp"
#include "edgefaas/policy/planner.hpp"

namespace edgefaas::gateway {

struct Peer {
  std::string node_id;
  Addr address;

  // "node_id@host:port"
  static Peer parse(const std::string& s);
  std::string str() const { return node_id + "@" + address.str(); }
};

struct NodeConfig {
  policy::CostModel costs;
  policy::MemoryModel memory;

  SimTime idle_timeout_default = SimTime::from_seconds(60);
  policy::SuspendVerdict suspend_on_block = policy::SuspendVerdict::Stay;

  std::vector<Peer> peers;

  std::uint64_t migration_chunk_size = 64 * 1024;
  int migration_timeout_s = 30;

  SimTime backup_interval{};      // 0 disables periodic backups
  std::string backup_push_to;     // peer node_id, empty = local only
  int backup_retain = 3;

  static NodeConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const Peer* find_peer(const std::string& node_id) const;
};

}  // namespace edgefaas::gateway
