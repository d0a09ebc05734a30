#pragma once

#include <memory>
#include <thread>

#include "edgefaas/gateway/node.hpp"

namespace httplib {
class Server;
}

namespace edgefaas::gateway {

// HTTP front door. Trigger API: POST /fn/<route>. Admin API under
// /admin/... with JSON bodies. advance-clock is only served when the
// daemon runs with the simulated clock.
class HttpApi {
 public:
  HttpApi(Node& node, bool sim_clock);
  ~HttpApi();

  // Blocks serving requests until stop() is called.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread.
  int listen_any(const std::string& host);
  void stop();

 private:
  void route();

  Node& node_;
  bool sim_clock_;
  std::unique_ptr<httplib::Server> server_;
  std::thread serve_thread_;
};

int http_status_for(Errc code);

}  // namespace edgefaas::gateway
