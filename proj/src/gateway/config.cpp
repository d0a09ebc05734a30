#include "edgefaas/gateway/config.hpp"

namespace edgefaas::gateway {

Peer Peer::parse(const std::string& s) {
  auto at = s.find('@');
  if (at == std::string::npos || at == 0)
    fail(Errc::ConfigError, "peer must be node_id@host:port, got '" + s + "'");
  Peer p;
  p.node_id = s.substr(0, at);
  p.address = Addr::parse(s.substr(at + 1));
  return p;
}

namespace {

policy::SuspendVerdict verdict_from_string(const std::string& s) {
  if (s == "stay") return policy::SuspendVerdict::Stay;
  if (s == "pause") return policy::SuspendVerdict::Pause;
  if (s == "checkpoint") return policy::SuspendVerdict::Checkpoint;
  fail(Errc::ConfigError, "bad suspend_on_block '" + s + "'");
}

std::string verdict_to_string(policy::SuspendVerdict v) {
  switch (v) {
    case policy::SuspendVerdict::Stay: return "stay";
    case policy::SuspendVerdict::Pause: return "pause";
    case policy::SuspendVerdict::Checkpoint: return "checkpoint";
  }
  return "stay";
}

}  // namespace

NodeConfig NodeConfig::from_json(const nlohmann::json& j) {
  NodeConfig c;
  if (j.contains("costs")) {
    const auto& k = j["costs"];
    auto get = [&](const char* name, double def) {
      return k.contains(name) ? k[name].get<double>() : def;
    };
    c.costs.start_cold = get("start_cold", c.costs.start_cold);
    c.costs.pause = get("pause", c.costs.pause);
    c.costs.unpause = get("unpause", c.costs.unpause);
    c.costs.checkpoint = get("checkpoint", c.costs.checkpoint);
    c.costs.create_container = get("create_container", c.costs.create_container);
    c.costs.start_from_checkpoint =
        get("start_from_checkpoint", c.costs.start_from_checkpoint);
  }
  c.costs.validate();
  if (j.contains("memory")) {
    const auto& k = j["memory"];
    if (k.contains("capacity"))
      c.memory.node_capacity = k["capacity"].get<std::uint64_t>();
    if (k.contains("high_watermark"))
      c.memory.high_watermark = k["high_watermark"].get<double>();
    if (k.contains("running_bytes"))
      c.memory.running_override = k["running_bytes"].get<std::uint64_t>();
    if (k.contains("paused_bytes"))
      c.memory.paused_override = k["paused_bytes"].get<std::uint64_t>();
    if (k.contains("checkpointed_bytes"))
      c.memory.checkpointed_bytes = k["checkpointed_bytes"].get<std::uint64_t>();
    if (c.memory.high_watermark <= 0 || c.memory.high_watermark > 1)
      fail(Errc::ConfigError, "high_watermark must be in (0, 1]");
  }
  if (j.contains("policy")) {
    const auto& k = j["policy"];
    if (k.contains("idle_timeout_default"))
      c.idle_timeout_default =
          SimTime::from_seconds(k["idle_timeout_default"].get<double>());
    if (k.contains("suspend_on_block"))
      c.suspend_on_block =
          verdict_from_string(k["suspend_on_block"].get<std::string>());
  }
  if (j.contains("peers"))
    for (const auto& p : j["peers"])
      c.peers.push_back(Peer::parse(p.get<std::string>()));
  if (j.contains("migration")) {
    const auto& k = j["migration"];
    if (k.contains("chunk_size"))
      c.migration_chunk_size = k["chunk_size"].get<std::uint64_t>();
    if (k.contains("timeout_s"))
      c.migration_timeout_s = k["timeout_s"].get<int>();
    if (c.migration_chunk_size == 0)
      fail(Errc::ConfigError, "migration chunk_size must be > 0");
  }
  if (j.contains("backup")) {
    const auto& k = j["backup"];
    if (k.contains("interval_s"))
      c.backup_interval = SimTime::from_seconds(k["interval_s"].get<double>());
    if (k.contains("push_to"))
      c.backup_push_to = k["push_to"].get<std::string>();
    if (k.contains("retain")) c.backup_retain = k["retain"].get<int>();
  }
  return c;
}

nlohmann::json NodeConfig::to_json() const {
  nlohmann::json peers = nlohmann::json::array();
  for (const auto& p : this->peers) peers.push_back(p.str());
  return {
      {"costs",
       {{"start_cold", costs.start_cold},
        {"pause", costs.pause},
        {"unpause", costs.unpause},
        {"checkpoint", costs.checkpoint},
        {"create_container", costs.create_container},
        {"start_from_checkpoint", costs.start_from_checkpoint}}},
      {"memory",
       {{"capacity", memory.node_capacity},
        {"high_watermark", memory.high_watermark},
        {"checkpointed_bytes", memory.checkpointed_bytes}}},
      {"policy",
       {{"idle_timeout_default", idle_timeout_default.seconds()},
        {"suspend_on_block", verdict_to_string(suspend_on_block)}}},
      {"peers", peers},
      {"migration",
       {{"chunk_size", migration_chunk_size},
        {"timeout_s", migration_timeout_s}}},
      {"backup",
       {{"interval_s", backup_interval.seconds()},
        {"push_to", backup_push_to},
        {"retain", backup_retain}}},
  };
}

const Peer* NodeConfig::find_peer(const std::string& node_id) const {
  for (const auto& p : peers)
    if (p.node_id == node_id) return &p;
  return nullptr;
}

}  // namespace edgefaas::gateway
