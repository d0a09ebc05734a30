// edgefaas: single-node edge FaaS daemon + operator CLI.
//
// `edgefaas serve` runs the daemon (HTTP gateway + migration listener);
// every other subcommand is a thin client over the admin/trigger APIs.
// Exit codes: 0 success, 1 API error, 2 transport error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "edgefaas/gateway/http_api.hpp"
#include "edgefaas/gateway/node.hpp"
#include "edgefaas/harness/script.hpp"

using nlohmann::json;
using namespace edgefaas;

namespace {

constexpr int kExitApiError = 1;
constexpr int kExitTransport = 2;

struct ClientOptions {
  std::string addr = "127.0.0.1:7070";
  std::string output = "table";
  int timeout_s = 30;
};

class ApiClient {
 public:
  explicit ApiClient(const ClientOptions& opts) : opts_(opts) {
    const Addr a = Addr::parse(opts.addr);
    client_ = std::make_unique<httplib::Client>(a.host, a.port);
    client_->set_connection_timeout(opts.timeout_s);
    client_->set_read_timeout(opts.timeout_s);
  }

  json get(const std::string& path) {
    auto res = client_->Get(path);
    return unwrap(path, res);
  }

  json post(const std::string& path, const json& body) {
    auto res = client_->Post(path, body.dump(), "application/json");
    return unwrap(path, res);
  }

  // Returns (status, body, instance header).
  std::tuple<int, std::string, std::string> trigger(const std::string& route,
                                                    const std::string& payload) {
    auto res = client_->Post("/fn/" + route, payload, "application/octet-stream");
    if (!res) {
      std::cerr << "error: cannot reach " << opts_.addr << "\n";
      std::exit(kExitTransport);
    }
    std::string instance;
    if (res->has_header("X-Instance-Id"))
      instance = res->get_header_value("X-Instance-Id");
    return {res->status, res->body, instance};
  }

 private:
  json unwrap(const std::string& path, const httplib::Result& res) {
    if (!res) {
      std::cerr << "error: cannot reach " << opts_.addr << " (" << path << ")\n";
      std::exit(kExitTransport);
    }
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception&) {
      body = json{{"raw", res->body}};
    }
    if (res->status >= 400) {
      std::cerr << "API error " << res->status << ": " << body.dump() << "\n";
      std::exit(kExitApiError);
    }
    return body;
  }

  ClientOptions opts_;
  std::unique_ptr<httplib::Client> client_;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(kExitApiError);
  }
  json j;
  in >> j;
  return j;
}

void print_cost_table(const json& costs, std::ostream& os) {
  struct Row {
    const char* label;
    const char* key;
  };
  static const Row rows[] = {
      {"Starting a container", "start_cold"},
      {"Pause", "pause"},
      {"Unpause", "unpause"},
      {"Create a checkpoint and save it to disk", "checkpoint"},
      {"Create a new container", "create_container"},
      {"Start container from the checkpoint", "start_from_checkpoint"},
  };
  os << std::left << std::setw(44) << "Task" << "Time (s)\n";
  for (const auto& row : rows) {
    os << std::left << std::setw(44) << row.label << std::fixed
       << std::setprecision(3) << costs.at(row.key).get<double>() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Scenario runner over HTTP (Crash events need the in-process harness).

class HttpScenarioRunner {
 public:
  HttpScenarioRunner(std::map<std::string, ClientOptions> nodes)
      : node_opts_(std::move(nodes)) {
    for (auto& [id, opts] : node_opts_)
      clients_.emplace(id, std::make_unique<ApiClient>(opts));
  }

  bool run(const harness::Script& script, std::ostream& os) {
    using Kind = harness::ScriptEvent::Kind;
    for (size_t i = 0; i < script.events.size(); ++i) {
      const auto& e = script.events[i];
      try {
        switch (e.kind) {
          case Kind::AdvanceClock:
            for (auto& [id, c] : clients_)
              c->post("/admin/advance-clock", {{"seconds", e.dt.seconds()}});
            break;
          case Kind::Trigger: {
            auto [status, body, instance] =
                client(e.node).trigger(e.route, e.payload);
            if (status >= 400) {
              os << "event " << i << ": trigger failed with " << status << ": "
                 << body << "\n";
              return false;
            }
            if (!e.alias.empty()) bindings_[e.alias] = {e.node, instance};
            break;
          }
          case Kind::InjectPacket: {
            client(e.node).post("/admin/inject-packet",
                                {{"src", e.src},
                                 {"dst", resolve_dst(e.dst)},
                                 {"payload", e.payload}});
            break;
          }
          case Kind::Checkpoint: {
            auto [node, id] = resolve(e.instance);
            client(node).post("/admin/checkpoint", {{"instance_id", id}});
            break;
          }
          case Kind::Restore: {
            auto [node, id] = resolve(e.instance);
            client(node).post("/admin/restore", {{"instance_id", id}});
            break;
          }
          case Kind::Migrate: {
            auto [node, id] = resolve(e.instance);
            auto out = client(node).post(
                "/admin/migrate", {{"instance_id", id}, {"target_node", e.target}});
            if (!e.alias.empty())
              bindings_[e.alias] = {e.target,
                                    out.at("target_instance_id").get<std::string>()};
            break;
          }
          case Kind::Crash:
            os << "event " << i
               << ": crash injection is only available in the in-process "
                  "harness\n";
            return false;
          case Kind::ExpectState: {
            auto view = view_of(e.instance);
            const std::string actual = view.at("state").get<std::string>();
            if (actual.rfind(e.state, 0) != 0) {
              os << "FAIL: expected state " << e.state << ", actual " << actual
                 << "\n";
              return false;
            }
            break;
          }
          case Kind::ExpectVar: {
            auto view = view_of(e.instance);
            std::int64_t actual = 0;
            if (view.at("vars").contains(e.var))
              actual = view["vars"][e.var].get<std::int64_t>();
            if (actual != e.value) {
              os << "FAIL: expected " << e.var << "=" << e.value << ", actual "
                 << actual << "\n";
              return false;
            }
            break;
          }
          case Kind::ExpectResponse: {
            auto view = view_of(e.instance);
            const std::string actual =
                view.contains("response") ? view["response"].get<std::string>()
                                          : "";
            if (actual != e.text) {
              os << "FAIL: expected response '" << e.text << "', actual '"
                 << actual << "'\n";
              return false;
            }
            break;
          }
        }
      } catch (const Error& err) {
        os << "event " << i << " failed: " << err.what() << "\n";
        return false;
      }
    }
    return true;
  }

 private:
  ApiClient& client(const std::string& node) {
    auto it = clients_.find(node);
    if (it == clients_.end()) {
      std::cerr << "error: scenario references node '" << node
                << "'; pass --node " << node << "=host:port\n";
      std::exit(kExitApiError);
    }
    return *it->second;
  }

  std::pair<std::string, std::string> resolve(const std::string& ref) {
    if (ref.empty() || ref[0] != '$') {
      std::cerr << "error: instance refs must be $alias\n";
      std::exit(kExitApiError);
    }
    auto it = bindings_.find(ref.substr(1));
    if (it == bindings_.end()) {
      std::cerr << "error: unbound alias " << ref << "\n";
      std::exit(kExitApiError);
    }
    return it->second;
  }

  json view_of(const std::string& ref) {
    auto [node, id] = resolve(ref);
    return client(node).get("/admin/instances/" + id);
  }

  std::string resolve_dst(const std::string& dst) {
    if (!dst.empty() && dst[0] == '$') {
      auto colon = dst.rfind(':');
      auto [node, id] = resolve(dst.substr(0, colon));
      auto view = client(node).get("/admin/instances/" + id);
      return view.at("sockets").at(dst.substr(colon + 1)).at("local")
          .get<std::string>();
    }
    return dst;
  }

  std::map<std::string, ClientOptions> node_opts_;
  std::map<std::string, std::unique_ptr<ApiClient>> clients_;
  std::map<std::string, std::pair<std::string, std::string>> bindings_;
};

// ---------------------------------------------------------------------------
// Daemon

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

int run_daemon(const std::string& listen, const std::string& node_id,
               int migrate_port, const std::string& registry_path,
               const std::string& data_dir, const std::string& config_path,
               bool sim_clock) {
  gateway::Node::Options opts;
  opts.node_id = node_id;
  if (!data_dir.empty()) opts.data_dir = data_dir;
  if (!config_path.empty())
    opts.config = gateway::NodeConfig::from_json(load_json_file(config_path));
  gateway::Node node(std::move(opts));

  if (!registry_path.empty()) node.load_registry(load_json_file(registry_path));

  // Outbound transfers connect to peers' migration listeners.
  node.set_channel_factory([&node](const gateway::Peer& peer)
                               -> std::unique_ptr<gateway::OutboundChannel> {
    struct TcpOutbound : gateway::OutboundChannel {
      explicit TcpOutbound(std::unique_ptr<migration::TcpChannel> ch)
          : ch_(std::move(ch)) {}
      migration::Channel& channel() override { return *ch_; }
      std::uint64_t wire_bytes() const override { return ch_->bytes_sent(); }
      std::unique_ptr<migration::TcpChannel> ch_;
    };
    return std::make_unique<TcpOutbound>(migration::TcpChannel::connect(
        peer.address, node.config().migration_timeout_s));
  });

  const Addr listen_addr = Addr::parse(listen);
  gateway::HttpApi api(node, sim_clock);

  // Migration listener + per-connection handler threads.
  migration::TcpListener listener(Addr{"0.0.0.0", static_cast<std::uint16_t>(
                                                      migrate_port)});
  std::vector<std::thread> handlers;
  std::thread accept_thread([&] {
    while (!g_stop) {
      auto ch = listener.accept(node.config().migration_timeout_s);
      if (!ch) break;
      handlers.emplace_back(
          [&node, conn = std::shared_ptr<migration::TcpChannel>(
                      std::move(ch))]() mutable {
            try {
              node.serve_migration(*conn);
            } catch (const std::exception&) {
            }
          });
    }
  });

  // Without the simulated clock the node follows wall time.
  std::thread ticker;
  if (!sim_clock) {
    ticker = std::thread([&node] {
      auto last = std::chrono::steady_clock::now();
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        const auto now = std::chrono::steady_clock::now();
        const auto us =
            std::chrono::duration_cast<std::chrono::microseconds>(now - last);
        last = now;
        node.advance_clock(SimTime::from_us(us.count()));
      }
    });
  }

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  std::cout << "edgefaas node " << node_id << " listening on "
            << listen_addr.str() << ", migration port " << listener.port()
            << (sim_clock ? ", simulated clock" : "") << std::endl;

  std::thread stopper([&] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    api.stop();
    listener.shutdown();
  });

  const bool ok = api.listen(listen_addr.host, listen_addr.port);
  g_stop = true;
  stopper.join();
  accept_thread.join();
  for (auto& h : handlers) h.join();
  if (ticker.joinable()) ticker.join();
  return ok ? 0 : kExitTransport;
}

void print_instances(const json& list, const std::string& output) {
  if (output == "json") {
    std::cout << list.dump(2) << "\n";
    return;
  }
  std::cout << std::left << std::setw(14) << "INSTANCE" << std::setw(14)
            << "FUNCTION" << std::setw(28) << "STATE" << std::setw(12)
            << "MEM" << "LAST_ACTIVE\n";
  for (const auto& inst : list) {
    std::cout << std::left << std::setw(14)
              << inst.at("instance_id").get<std::string>() << std::setw(14)
              << inst.at("function_id").get<std::string>() << std::setw(28)
              << inst.at("state").get<std::string>() << std::setw(12)
              << inst.at("memory_charge").get<std::uint64_t>()
              << inst.at("last_active_at").get<double>() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgefaas: checkpoint/restore FaaS runtime for edge nodes"};
  app.require_subcommand(1);

  ClientOptions client;
  client.addr = env_or("EDGEFAAS_ADDR", client.addr);
  app.add_option("--addr", client.addr, "daemon address (EDGEFAAS_ADDR)");
  app.add_option("--output", client.output, "output format: table|json")
      ->check(CLI::IsMember({"table", "json"}));
  app.add_option("--timeout", client.timeout_s, "request timeout seconds");

  // serve
  auto* serve = app.add_subcommand("serve", "run the node daemon");
  std::string listen = env_or("EDGEFAAS_LISTEN", "127.0.0.1:7070");
  std::string node_id = env_or("EDGEFAAS_NODE_ID", "node");
  int migrate_port = std::stoi(env_or("EDGEFAAS_MIGRATE_PORT", "0"));
  std::string registry_path, data_dir, config_path;
  bool sim_clock = false;
  serve->add_option("--listen", listen, "HTTP listen address");
  serve->add_option("--node-id", node_id, "node identity");
  serve->add_option("--migrate-port", migrate_port, "migration listener port");
  serve->add_option("--registry", registry_path, "registry JSON file");
  serve->add_option("--data-dir", data_dir, "checkpoint store root");
  serve->add_option("--config", config_path, "node config JSON file");
  serve->add_flag("--sim-clock", sim_clock,
                  "simulated clock driven by /admin/advance-clock");

  // client commands
  std::string deploy_path;
  auto* deploy = app.add_subcommand("deploy", "load a function registry");
  deploy->add_option("registry", deploy_path, "registry JSON file")->required();

  std::string invoke_route, invoke_payload;
  auto* invoke = app.add_subcommand("invoke", "trigger a function route");
  invoke->add_option("route", invoke_route)->required();
  invoke->add_option("--payload", invoke_payload);

  auto* ps = app.add_subcommand("ps", "list instances");

  std::string ckpt_instance;
  auto* checkpoint = app.add_subcommand("checkpoint", "checkpoint an instance");
  checkpoint->add_option("instance", ckpt_instance)->required();

  std::string restore_id;
  auto* restore = app.add_subcommand("restore", "restore an archive or instance");
  restore->add_option("id", restore_id, "archive id or instance id")->required();

  std::string pause_id;
  auto* pause = app.add_subcommand("pause", "pause a running instance");
  pause->add_option("instance", pause_id)->required();

  std::string unpause_id;
  auto* unpause = app.add_subcommand("unpause", "unpause an instance");
  unpause->add_option("instance", unpause_id)->required();

  std::string mig_instance, mig_target;
  auto* migrate = app.add_subcommand("migrate", "migrate an instance to a peer");
  migrate->add_option("instance", mig_instance)->required();
  migrate->add_option("node", mig_target)->required();

  std::string inj_src, inj_dst, inj_payload;
  auto* inject = app.add_subcommand("inject", "inject a simulated packet");
  inject->add_option("--src", inj_src)->required();
  inject->add_option("--dst", inj_dst)->required();
  inject->add_option("--payload", inj_payload)->required();

  auto* stats = app.add_subcommand("stats", "invocation records and counters");

  std::string scenario_name, scenarios_dir = "scenarios";
  std::vector<std::string> scenario_nodes;
  auto* scenario = app.add_subcommand("scenario", "run a scripted scenario");
  scenario->add_option("name", scenario_name, "scenario name or JSON path")
      ->required();
  scenario->add_option("--scenarios-dir", scenarios_dir);
  scenario->add_option("--node", scenario_nodes,
                       "node address binding, id=host:port (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (serve->parsed()) {
      return run_daemon(listen, node_id, migrate_port, registry_path, data_dir,
                        config_path, sim_clock);
    }

    ApiClient api(client);
    if (deploy->parsed()) {
      auto out = api.post("/admin/deploy", load_json_file(deploy_path));
      std::cout << out.dump() << "\n";
    } else if (invoke->parsed()) {
      auto [status, body, instance] = api.trigger(invoke_route, invoke_payload);
      if (status >= 400) {
        std::cerr << "API error " << status << ": " << body << "\n";
        return kExitApiError;
      }
      std::cout << body << "\n";
    } else if (ps->parsed()) {
      print_instances(api.get("/admin/instances"), client.output);
    } else if (checkpoint->parsed()) {
      std::cout << api.post("/admin/checkpoint", {{"instance_id", ckpt_instance}})
                       .dump()
                << "\n";
    } else if (restore->parsed()) {
      // 64-hex ids are archives, anything else is an instance
      const bool is_archive =
          restore_id.size() == 64 &&
          restore_id.find_first_not_of("0123456789abcdef") == std::string::npos;
      json body = is_archive ? json{{"archive_id", restore_id}}
                             : json{{"instance_id", restore_id}};
      std::cout << api.post("/admin/restore", body).dump() << "\n";
    } else if (pause->parsed()) {
      std::cout << api.post("/admin/pause", {{"instance_id", pause_id}}).dump()
                << "\n";
    } else if (unpause->parsed()) {
      std::cout << api.post("/admin/unpause", {{"instance_id", unpause_id}}).dump()
                << "\n";
    } else if (migrate->parsed()) {
      std::cout << api.post("/admin/migrate", {{"instance_id", mig_instance},
                                               {"target_node", mig_target}})
                       .dump()
                << "\n";
    } else if (inject->parsed()) {
      std::cout << api.post("/admin/inject-packet", {{"src", inj_src},
                                                     {"dst", inj_dst},
                                                     {"payload", inj_payload}})
                       .dump()
                << "\n";
    } else if (stats->parsed()) {
      auto s = api.get("/admin/stats");
      if (client.output == "json") {
        std::cout << s.dump(2) << "\n";
      } else {
        auto config = api.get("/admin/config");
        print_cost_table(config.at("costs"), std::cout);
        std::cout << "\ninvocations: " << s.at("invocations").size()
                  << ", memory " << s.at("memory_usage").get<std::uint64_t>()
                  << "/" << s.at("memory_capacity").get<std::uint64_t>()
                  << " bytes, wakes " << s.at("wakes").get<std::uint64_t>()
                  << ", dropped packets "
                  << s.at("dropped_packets").get<std::uint64_t>() << "\n";
        for (const auto& r : s.at("invocations")) {
          std::cout << r.at("request_id").get<std::string>() << "  "
                    << std::setw(24) << std::left
                    << r.at("function_id").get<std::string>() << std::setw(24)
                    << r.at("path").get<std::string>() << std::fixed
                    << std::setprecision(3)
                    << r.at("charged_latency_s").get<double>() << "s  "
                    << r.at("outcome").get<std::string>() << "\n";
        }
      }
    } else if (scenario->parsed()) {
      std::string path = scenario_name;
      if (path.find(".json") == std::string::npos)
        path = scenarios_dir + "/" + scenario_name + ".json";
      auto script = harness::Script::from_file(path);

      std::map<std::string, ClientOptions> nodes;
      for (const auto& binding : scenario_nodes) {
        auto eq = binding.find('=');
        if (eq == std::string::npos) {
          std::cerr << "error: --node expects id=host:port\n";
          return kExitApiError;
        }
        ClientOptions o = client;
        o.addr = binding.substr(eq + 1);
        nodes[binding.substr(0, eq)] = o;
      }
      if (nodes.empty()) {
        // single-node default: every script node maps to --addr
        for (const auto& id : script.nodes) nodes[id] = client;
        if (nodes.empty()) nodes["A"] = client;
      }

      HttpScenarioRunner runner(std::move(nodes));
      const bool ok = runner.run(script, std::cout);
      std::cout << (ok ? "PASS" : "FAIL") << " scenario " << scenario_name
                << "\n";
      if (ok) {
        ApiClient first(client);
        auto config = first.get("/admin/config");
        print_cost_table(config.at("costs"), std::cout);
      }
      return ok ? 0 : kExitApiError;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitApiError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitApiError;
  }
  return 0;
}
