#include "edgefaas/harness/script.hpp"

#include <fstream>

namespace edgefaas::harness {

Script Script::from_json(const nlohmann::json& j) {
  Script s;
  if (j.contains("nodes"))
    for (const auto& n : j["nodes"]) s.nodes.push_back(n.get<std::string>());
  for (const auto& e : j.at("events")) {
    ScriptEvent ev;
    if (e.contains("advance_clock")) {
      ev.kind = ScriptEvent::Kind::AdvanceClock;
      ev.dt = SimTime::from_seconds(e["advance_clock"].at("seconds").get<double>());
    } else if (e.contains("trigger")) {
      const auto& t = e["trigger"];
      ev.kind = ScriptEvent::Kind::Trigger;
      ev.node = t.at("node").get<std::string>();
      ev.route = t.at("route").get<std::string>();
      if (t.contains("payload")) ev.payload = t["payload"].get<std::string>();
      if (t.contains("as")) ev.alias = t["as"].get<std::string>();
    } else if (e.contains("inject_packet")) {
      const auto& t = e["inject_packet"];
      ev.kind = ScriptEvent::Kind::InjectPacket;
      ev.node = t.at("node").get<std::string>();
      ev.src = t.at("src").get<std::string>();
      ev.dst = t.at("dst").get<std::string>();
      ev.payload = t.at("payload").get<std::string>();
    } else if (e.contains("checkpoint")) {
      ev.kind = ScriptEvent::Kind::Checkpoint;
      ev.instance = e["checkpoint"].at("instance").get<std::string>();
    } else if (e.contains("restore")) {
      ev.kind = ScriptEvent::Kind::Restore;
      ev.instance = e["restore"].at("instance").get<std::string>();
    } else if (e.contains("migrate")) {
      const auto& t = e["migrate"];
      ev.kind = ScriptEvent::Kind::Migrate;
      ev.instance = t.at("instance").get<std::string>();
      ev.target = t.at("to").get<std::string>();
      if (t.contains("as")) ev.alias = t["as"].get<std::string>();
    } else if (e.contains("crash")) {
      ev.kind = ScriptEvent::Kind::Crash;
      ev.after_frames = e["crash"].at("after_frames").get<int>();
    } else if (e.contains("expect_state")) {
      const auto& t = e["expect_state"];
      ev.kind = ScriptEvent::Kind::ExpectState;
      ev.instance = t.at("instance").get<std::string>();
      ev.state = t.at("state").get<std::string>();
    } else if (e.contains("expect_var")) {
      const auto& t = e["expect_var"];
      ev.kind = ScriptEvent::Kind::ExpectVar;
      ev.instance = t.at("instance").get<std::string>();
      ev.var = t.at("name").get<std::string>();
      ev.value = t.at("value").get<std::int64_t>();
    } else if (e.contains("expect_response")) {
      const auto& t = e["expect_response"];
      ev.kind = ScriptEvent::Kind::ExpectResponse;
      ev.instance = t.at("instance").get<std::string>();
      ev.text = t.at("value").get<std::string>();
    } else {
      fail(Errc::ConfigError, "unknown script event: " + e.dump());
    }
    s.events.push_back(std::move(ev));
  }
  return s;
}

Script Script::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot open script " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

namespace {

struct Binding {
  std::string node;
  std::string instance;
};

class Runner {
 public:
  Runner(Cluster& cluster, const Script& script)
      : cluster_(cluster), script_(script) {}

  ScriptResult run() {
    for (size_t i = 0; i < script_.events.size(); ++i) {
      const ScriptEvent& e = script_.events[i];
      try {
        step(e);
      } catch (const Error& err) {
        if (err.code() == Errc::ExpectationFailed) throw;
        fail(Errc::ExpectationFailed,
             "event " + std::to_string(i) + " raised " + err.what());
      }
    }
    ScriptResult out;
    for (const auto& [alias, b] : bindings_)
      out.bindings[alias] = {b.node, b.instance};
    out.last_migration = last_migration_;
    return out;
  }

 private:
  Binding resolve(const std::string& ref) const {
    if (ref.empty() || ref[0] != '$')
      fail(Errc::ExpectationFailed, "instance refs must be $alias, got " + ref);
    auto it = bindings_.find(ref.substr(1));
    if (it == bindings_.end())
      fail(Errc::ExpectationFailed, "unbound alias " + ref);
    return it->second;
  }

  Addr resolve_dst(const std::string& dst) const {
    // "$alias:socket" resolves to that socket's local end
    if (!dst.empty() && dst[0] == '$') {
      auto colon = dst.rfind(':');
      if (colon == std::string::npos)
        fail(Errc::ExpectationFailed, "bad dst ref " + dst);
      Binding b = resolve(dst.substr(0, colon));
      const std::string socket = dst.substr(colon + 1);
      auto view = cluster_.node(b.node).instance_view(b.instance);
      if (!view["sockets"].contains(socket))
        fail(Errc::ExpectationFailed,
             "instance " + b.instance + " has no socket " + socket);
      return Addr::parse(view["sockets"][socket]["local"].get<std::string>());
    }
    return Addr::parse(dst);
  }

  static bool state_matches(const std::string& expected,
                            const std::string& actual) {
    if (expected == actual) return true;
    // "Blocked" matches "Blocked(...)", "Blocked(Sleep)" matches
    // "Blocked(Sleep(wake_at=...))"
    if (actual.rfind(expected, 0) != 0) return false;
    return expected.find('(') != std::string::npos ||
           actual.size() == expected.size() || actual[expected.size()] == '(';
  }

  void step(const ScriptEvent& e) {
    using Kind = ScriptEvent::Kind;
    switch (e.kind) {
      case Kind::AdvanceClock:
        cluster_.advance_clock(e.dt);
        break;

      case Kind::Trigger: {
        auto record =
            cluster_.node(e.node).handle_trigger(e.route, to_bytes(e.payload));
        if (!e.alias.empty())
          bindings_[e.alias] = Binding{e.node, record.instance_id};
        break;
      }

      case Kind::InjectPacket: {
        cluster_.node(e.node).inject_packet(Addr::parse(e.src),
                                            resolve_dst(e.dst),
                                            to_bytes(e.payload));
        break;
      }

      case Kind::Checkpoint: {
        Binding b = resolve(e.instance);
        cluster_.node(b.node).checkpoint_instance(b.instance);
        break;
      }

      case Kind::Restore: {
        Binding b = resolve(e.instance);
        cluster_.node(b.node).resume_instance(b.instance);
        break;
      }

      case Kind::Migrate: {
        Binding b = resolve(e.instance);
        auto outcome =
            cluster_.node(b.node).migrate_instance(b.instance, e.target);
        if (outcome.committed) {
          last_migration_ = "committed";
          if (!e.alias.empty())
            bindings_[e.alias] = Binding{e.target, outcome.target_instance_id};
        } else {
          last_migration_ = "aborted: " + outcome.reason;
        }
        break;
      }

      case Kind::Crash:
        cluster_.set_kill_after_frames(e.after_frames);
        break;

      case Kind::ExpectState: {
        Binding b = resolve(e.instance);
        const std::string actual =
            cluster_.node(b.node).instance(b.instance).state.str();
        if (!state_matches(e.state, actual))
          fail(Errc::ExpectationFailed, b.instance + " expected state " +
                                            e.state + ", actual " + actual);
        break;
      }

      case Kind::ExpectVar: {
        Binding b = resolve(e.instance);
        auto inst = cluster_.node(b.node).instance(b.instance);
        auto it = inst.sim.vars.find(e.var);
        const std::int64_t actual =
            it == inst.sim.vars.end() ? 0 : it->second;
        if (actual != e.value)
          fail(Errc::ExpectationFailed,
               b.instance + " expected " + e.var + "=" + std::to_string(e.value) +
                   ", actual " + std::to_string(actual));
        break;
      }

      case Kind::ExpectResponse: {
        Binding b = resolve(e.instance);
        auto inst = cluster_.node(b.node).instance(b.instance);
        const std::string actual =
            inst.response ? to_string(*inst.response) : "";
        if (actual != e.text)
          fail(Errc::ExpectationFailed, b.instance + " expected response '" +
                                            e.text + "', actual '" + actual + "'");
        break;
      }
    }
  }

  Cluster& cluster_;
  const Script& script_;
  std::map<std::string, Binding> bindings_;
  std::string last_migration_;
};

}  // namespace

ScriptResult run_script(Cluster& cluster, const Script& script) {
  Runner runner(cluster, script);
  return runner.run();
}

}  // namespace edgefaas::harness
