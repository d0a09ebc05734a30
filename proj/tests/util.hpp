#pragma once

#include <filesystem>
#include <random>

#include "edgefaas/gateway/config.hpp"
#include "edgefaas/harness/oracle.hpp"
#include "edgefaas/sim/program.hpp"

namespace testutil {

using namespace edgefaas;

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("edgefaas-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline sim::PortAllocator fixed_ports(const std::string& host = "test") {
  auto next = std::make_shared<std::uint16_t>(5000);
  return [next, host] { return Addr{host, (*next)++}; };
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}

  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen);
  }
  bool chance(double p) {
    return std::uniform_real_distribution<double>(0, 1)(gen) < p;
  }
  Bytes bytes(size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(range(0, 255));
    return b;
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(range(0, static_cast<std::int64_t>(v.size()) - 1))];
  }
};

// Random well-formed program of <= max_steps steps plus the delivery
// schedule that lets every Recv proceed.
struct GeneratedCase {
  sim::Program program;
  harness::DeliverySchedule deliveries;
};

inline GeneratedCase random_program(Rng& rng, int max_steps = 20) {
  GeneratedCase out;
  std::vector<std::string> open;
  int socket_counter = 0;
  const int steps = static_cast<int>(rng.range(1, max_steps));
  static const std::vector<std::string> vars = {"a", "b", "c"};

  for (int i = 0; i < steps; ++i) {
    const int kind = static_cast<int>(rng.range(0, 7));
    switch (kind) {
      case 0:
        out.program.push_back(sim::Step::compute(rng.range(1, 5)));
        break;
      case 1:
        out.program.push_back(
            sim::Step::sleep(SimTime::from_seconds(static_cast<double>(rng.range(1, 5)))));
        break;
      case 2: {
        std::string id = "s" + std::to_string(socket_counter++);
        out.program.push_back(sim::Step::open(
            id, Addr{"peer" + std::to_string(rng.range(1, 3)),
                     static_cast<std::uint16_t>(rng.range(80, 90))}));
        open.push_back(id);
        break;
      }
      case 3:
        if (open.empty()) {
          out.program.push_back(sim::Step::incr(rng.pick(vars)));
        } else {
          out.program.push_back(
              sim::Step::send(rng.pick(open), rng.bytes(static_cast<size_t>(rng.range(1, 12)))));
        }
        break;
      case 4:
        if (open.empty()) {
          out.program.push_back(sim::Step::compute(1));
        } else {
          const std::string sock = rng.pick(open);
          out.program.push_back(sim::Step::recv(sock));
          out.deliveries[sock].push_back(rng.bytes(static_cast<size_t>(rng.range(1, 16))));
        }
        break;
      case 5:
        out.program.push_back(sim::Step::incr(rng.pick(vars)));
        break;
      case 6:
        out.program.push_back(sim::Step::respond("v=${var:a} r=${recv:s0}"));
        break;
      case 7:
        if (!open.empty() && rng.chance(0.3)) {
          const std::string sock = rng.pick(open);
          out.program.push_back(sim::Step::close(sock));
          open.erase(std::find(open.begin(), open.end(), sock));
        } else {
          out.program.push_back(sim::Step::incr(rng.pick(vars)));
        }
        break;
    }
  }
  sim::validate_program(out.program);
  return out;
}

inline nlohmann::json registry_json() {
  return nlohmann::json::parse(R"([
    {
      "function_id": "echo",
      "route": "echo",
      "image_digest": "img-echo",
      "image_size": 1048576,
      "memory_declared": 1048576,
      "program": [
        {"op": "incr_counter", "var": "n"},
        {"op": "respond", "template": "ok n=${var:n}"}
      ]
    },
    {
      "function_id": "sleep60",
      "route": "sleep",
      "image_digest": "img-sleep",
      "image_size": 1048576,
      "memory_declared": 1048576,
      "program": [
        {"op": "sleep", "seconds": 60},
        {"op": "respond", "template": "slept"}
      ]
    },
    {
      "function_id": "tcp-auth",
      "route": "authorize",
      "image_digest": "img-auth",
      "image_size": 269484032,
      "memory_declared": 52428800,
      "program": [
        {"op": "open", "socket": "s1", "peer": "authorizer:80"},
        {"op": "send", "socket": "s1", "payload": "may-i?"},
        {"op": "recv", "socket": "s1"},
        {"op": "respond", "template": "granted:${recv:s1}"},
        {"op": "close", "socket": "s1"}
      ]
    },
    {
      "function_id": "counter",
      "route": "counter",
      "image_digest": "img-counter",
      "image_size": 1048576,
      "memory_declared": 1048576,
      "program": [
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "incr_counter", "var": "c"}, {"op": "sleep", "seconds": 1},
        {"op": "respond", "template": "count=${var:c}"}
      ]
    }
  ])");
}

}  // namespace testutil
