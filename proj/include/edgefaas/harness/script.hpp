#pragma once

#include "edgefaas/harness/cluster.hpp"

namespace edgefaas::harness {

// One scenario event. Instances are referenced through aliases bound by
// earlier trigger/migrate events ("$name").
struct ScriptEvent {
  enum class Kind : std::uint8_t {
    AdvanceClock,
    Trigger,
    InjectPacket,
    Checkpoint,
    Restore,
    Migrate,
    Crash,
    ExpectState,
    ExpectVar,
    ExpectResponse,
  };
  Kind kind = Kind::AdvanceClock;

  SimTime dt{};              // AdvanceClock
  std::string node;          // Trigger/InjectPacket/Restore(by archive)
  std::string route;         // Trigger
  std::string payload;       // Trigger/InjectPacket
  std::string alias;         // binds the instance of Trigger/Migrate
  std::string instance;      // "$alias" reference
  std::string src, dst;      // InjectPacket; dst may be "$alias:socket"
  std::string state;         // ExpectState ("Blocked", "Blocked(Sleep)", ...)
  std::string var;           // ExpectVar
  std::int64_t value = 0;    // ExpectVar
  std::string text;          // ExpectResponse
  std::string target;        // Migrate target node
  int after_frames = -1;     // Crash
};

struct Script {
  std::vector<std::string> nodes;
  std::vector<ScriptEvent> events;

  static Script from_json(const nlohmann::json& j);
  static Script from_file(const std::filesystem::path& path);
};

struct ScriptResult {
  // alias -> (node_id, instance_id)
  std::map<std::string, std::pair<std::string, std::string>> bindings;
  std::string last_migration;  // "committed" or "aborted: <reason>"
};

// Executes the script against the cluster; throws ExpectationFailed with
// the first divergence. Every node named by the script must exist.
ScriptResult run_script(Cluster& cluster, const Script& script);

}  // namespace edgefaas::harness
