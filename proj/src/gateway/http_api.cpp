#include "edgefaas/gateway/http_api.hpp"

#include <httplib.h>

namespace edgefaas::gateway {

namespace {

// httplib carries body bytes as std::string
Bytes body_bytes(const httplib::Request& req) {
  return Bytes(req.body.begin(), req.body.end());
}

std::string b64_decode(const std::string& in) {
  static const std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -8;
  for (char c : in) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const auto pos = alphabet.find(c);
    if (pos == std::string::npos)
      fail(Errc::ConfigError, "bad base64 payload");
    val = (val << 6) + static_cast<int>(pos);
    bits += 6;
    if (bits >= 0) {
      out.push_back(static_cast<char>((val >> bits) & 0xFF));
      bits -= 8;
    }
  }
  return out;
}

}  // namespace

int http_status_for(Errc code) {
  switch (code) {
    case Errc::RouteNotFound:
    case Errc::NotFound:
    case Errc::UnknownInstance:
      return 404;
    case Errc::IllegalTransition:
    case Errc::InstanceBusy:
    case Errc::Conflict:
    case Errc::ConflictingRule:
    case Errc::RejectNoImage:
    case Errc::RejectCapacity:
      return 409;
    case Errc::InsufficientCandidates:
      return 503;
    case Errc::ConfigError:
    case Errc::EmptyRules:
      return 400;
    default:
      return 500;
  }
}

HttpApi::HttpApi(Node& node, bool sim_clock)
    : node_(node), sim_clock_(sim_clock),
      server_(std::make_unique<httplib::Server>()) {
  route();
}

HttpApi::~HttpApi() { stop(); }

void HttpApi::route() {
  auto guard = [this](const std::function<nlohmann::json(
                          const httplib::Request&)>& fn,
                      int ok_status = 200) {
    return [fn, ok_status](const httplib::Request& req, httplib::Response& res) {
      try {
        res.status = ok_status;
        res.set_content(fn(req).dump(), "application/json");
      } catch (const Error& e) {
        res.status = http_status_for(e.code());
        res.set_content(
            nlohmann::json{{"error", errc_name(e.code())}, {"message", e.what()}}
                .dump(),
            "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(
            nlohmann::json{{"error", "BadRequest"}, {"message", e.what()}}.dump(),
            "application/json");
      }
    };
  };

  server_->Post(R"(/fn/(.+))", [this](const httplib::Request& req,
                                      httplib::Response& res) {
    try {
      auto record = node_.handle_trigger(req.matches[1].str(), body_bytes(req));
      res.set_header("X-Instance-Id", record.instance_id);
      res.set_header("X-Request-Id", record.request_id);
      if (record.outcome == InvocationRecord::Outcome::Suspended) {
        res.status = 202;
        res.set_content(nlohmann::json{{"status", "suspended"},
                                       {"instance_id", record.instance_id},
                                       {"request_id", record.request_id}}
                            .dump(),
                        "application/json");
      } else if (record.outcome == InvocationRecord::Outcome::Failed) {
        res.status = 500;
        res.set_content(nlohmann::json{{"status", "failed"},
                                       {"instance_id", record.instance_id}}
                            .dump(),
                        "application/json");
      } else {
        res.status = 200;
        res.set_content(to_string(record.response), "application/octet-stream");
      }
    } catch (const Error& e) {
      res.status = http_status_for(e.code());
      res.set_content(
          nlohmann::json{{"error", errc_name(e.code())}, {"message", e.what()}}
              .dump(),
          "application/json");
    }
  });

  server_->Get("/admin/instances", guard([this](const httplib::Request&) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& inst : node_.instances())
      out.push_back(node_.instance_view(inst.instance_id));
    return out;
  }));

  server_->Get(R"(/admin/instances/([^/]+))",
               guard([this](const httplib::Request& req) {
                 return node_.instance_view(req.matches[1].str());
               }));

  server_->Post("/admin/deploy", guard([this](const httplib::Request& req) {
    node_.load_registry(nlohmann::json::parse(req.body));
    return nlohmann::json{{"status", "deployed"}};
  }));

  server_->Post("/admin/checkpoint", guard([this](const httplib::Request& req) {
    const auto j = nlohmann::json::parse(req.body);
    const auto id = node_.checkpoint_instance(j.at("instance_id"));
    return nlohmann::json{{"archive_id", id}};
  }));

  server_->Post("/admin/restore", guard([this](const httplib::Request& req) {
    const auto j = nlohmann::json::parse(req.body);
    if (j.contains("archive_id")) {
      const auto id = node_.restore_archive(j.at("archive_id"));
      return nlohmann::json{{"instance_id", id}};
    }
    node_.resume_instance(j.at("instance_id"));
    return nlohmann::json{{"instance_id", j.at("instance_id")}};
  }));

  server_->Post("/admin/pause", guard([this](const httplib::Request& req) {
    const auto j = nlohmann::json::parse(req.body);
    node_.pause_instance(j.at("instance_id"));
    return nlohmann::json{{"status", "paused"}};
  }));

  server_->Post("/admin/unpause", guard([this](const httplib::Request& req) {
    const auto j = nlohmann::json::parse(req.body);
    node_.unpause_instance(j.at("instance_id"));
    return nlohmann::json{{"status", "unpaused"}};
  }));

  server_->Post("/admin/reap", guard([this](const httplib::Request& req) {
    const auto j = nlohmann::json::parse(req.body);
    node_.reap_instance(j.at("instance_id"));
    return nlohmann::json{{"status", "reaped"}};
  }));

  server_->Post("/admin/migrate", guard([this](const httplib::Request& req) {
    const auto j = nlohmann::json::parse(req.body);
    auto out = node_.migrate_instance(j.at("instance_id"), j.at("target_node"));
    if (!out.committed)
      fail(Errc::TargetUnreachable, "migration aborted: " + out.reason);
    return nlohmann::json{{"status", "committed"},
                          {"target_instance_id", out.target_instance_id},
                          {"wire_bytes", out.wire_bytes}};
  }));

  server_->Post("/admin/inject-packet",
                guard([this](const httplib::Request& req) {
                  const auto j = nlohmann::json::parse(req.body);
                  Bytes payload;
                  if (j.contains("payload_b64")) {
                    const std::string raw =
                        b64_decode(j.at("payload_b64").get<std::string>());
                    payload.assign(raw.begin(), raw.end());
                  } else {
                    payload = to_bytes(j.at("payload").get<std::string>());
                  }
                  auto out = node_.inject_packet(
                      Addr::parse(j.at("src").get<std::string>()),
                      Addr::parse(j.at("dst").get<std::string>()),
                      std::move(payload));
                  return nlohmann::json{{"matched", out.matched},
                                        {"instance_id", out.instance_id},
                                        {"woke", out.woke}};
                }));

  server_->Get("/admin/stats", guard([this](const httplib::Request&) {
    return node_.stats().to_json();
  }));

  server_->Get("/admin/archives", guard([this](const httplib::Request&) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& id : node_.archives()) out.push_back(id);
    return out;
  }));

  server_->Get("/admin/node-info", guard([this](const httplib::Request&) {
    const auto info = node_.info();
    nlohmann::json images = nlohmann::json::array();
    for (const auto& d : info.base_images) images.push_back(d);
    return nlohmann::json{{"node_id", node_.node_id()},
                          {"free_capacity", info.free_capacity},
                          {"base_images", images},
                          {"clock_s", node_.now().seconds()}};
  }));

  server_->Post("/admin/backup-tick", guard([this](const httplib::Request&) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& id : node_.run_backup_tick()) out.push_back(id);
    return out;
  }));

  server_->Get("/admin/config", guard([this](const httplib::Request&) {
    return node_.config().to_json();
  }));

  server_->Post("/admin/advance-clock",
                guard([this](const httplib::Request& req) {
                  if (!sim_clock_)
                    fail(Errc::Conflict,
                         "advance-clock requires the --sim-clock daemon flag");
                  const auto j = nlohmann::json::parse(req.body);
                  node_.advance_clock(
                      SimTime::from_seconds(j.at("seconds").get<double>()));
                  return nlohmann::json{{"clock_s", node_.now().seconds()}};
                }));
}

bool HttpApi::listen(const std::string& host, int port) {
  return server_->listen(host, port);
}

int HttpApi::listen_any(const std::string& host) {
  const int port = server_->bind_to_any_port(host);
  serve_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void HttpApi::stop() {
  if (server_) server_->stop();
  if (serve_thread_.joinable()) serve_thread_.join();
}

}  // namespace edgefaas::gateway
