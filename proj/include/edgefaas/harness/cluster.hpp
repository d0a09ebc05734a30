#pragma once

#include <memory>
#include <thread>

#include "edgefaas/gateway/node.hpp"

namespace edgefaas::harness {

// Ordered, thread-safe event log shared by all nodes of a cluster.
// Traces from the target side of an in-process migration interleave
// deterministically because the transfer protocol strictly alternates.
class Trace {
 public:
  void append(const gateway::TraceEvent& e);
  std::vector<std::string> lines() const;
  std::string str() const;
  bool contains(const std::string& needle) const;
  // True when every needle appears, in order (not necessarily adjacent).
  bool contains_in_order(const std::vector<std::string>& needles) const;
  std::size_t count(const std::string& needle) const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
};

// In-process multi-node test bed: nodes share a lockstep simulated clock
// and exchange migration traffic over in-memory conduits. Deterministic;
// no wall clock, no OS randomness.
class Cluster {
 public:
  struct NodeSpec {
    std::string node_id;
    gateway::NodeConfig config;
    nlohmann::json registry;  // null: use the cluster-wide registry
  };

  Cluster(std::vector<NodeSpec> specs, const nlohmann::json& registry);
  ~Cluster();

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  gateway::Node& node(const std::string& node_id);
  std::vector<std::string> node_ids() const;

  void advance_clock(SimTime dt);
  SimTime now() const { return clock_; }

  Trace& trace() { return trace_; }

  // Fault injection: conduits created from now on kill the connection
  // once `frames` frames have crossed (-1 disables).
  void set_kill_after_frames(int frames) { kill_after_frames_ = frames; }

  // Wire bytes crossed by the most recent transfer conduit.
  std::uint64_t last_wire_bytes() const { return last_wire_bytes_; }

 private:
  std::unique_ptr<gateway::OutboundChannel> make_channel(
      const gateway::Peer& peer);

  std::filesystem::path workdir_;
  std::vector<std::string> order_;
  std::map<std::string, std::unique_ptr<gateway::Node>> nodes_;
  Trace trace_;
  SimTime clock_{};
  int kill_after_frames_ = -1;
  std::uint64_t last_wire_bytes_ = 0;
};

}  // namespace edgefaas::harness
