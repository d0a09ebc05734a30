#include "edgefaas/harness/cluster.hpp"

#include <unistd.h>

#include <atomic>

namespace edgefaas::harness {

void Trace::append(const gateway::TraceEvent& e) {
  std::lock_guard lock(mu_);
  lines_.push_back(e.str());
}

std::vector<std::string> Trace::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

std::string Trace::str() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

bool Trace::contains(const std::string& needle) const {
  std::lock_guard lock(mu_);
  for (const auto& l : lines_)
    if (l.find(needle) != std::string::npos) return true;
  return false;
}

bool Trace::contains_in_order(const std::vector<std::string>& needles) const {
  std::lock_guard lock(mu_);
  size_t at = 0;
  for (const auto& l : lines_) {
    if (at < needles.size() && l.find(needles[at]) != std::string::npos) ++at;
  }
  return at == needles.size();
}

std::size_t Trace::count(const std::string& needle) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& l : lines_)
    if (l.find(needle) != std::string::npos) ++n;
  return n;
}

namespace {

std::filesystem::path fresh_workdir() {
  static std::atomic<std::uint64_t> counter{0};
  const auto n = counter.fetch_add(1);
  auto dir = std::filesystem::temp_directory_path() /
             ("edgefaas-cluster-" + std::to_string(::getpid()) + "-" +
              std::to_string(n));
  std::filesystem::create_directories(dir);
  return dir;
}

// Owns the conduit and the thread running the target's server half.
class InProcessOutbound : public gateway::OutboundChannel {
 public:
  InProcessOutbound(gateway::Node& target, int kill_after_frames)
      : conduit_(kill_after_frames) {
    server_ = std::thread([this, &target] {
      try {
        target.serve_migration(conduit_.b());
      } catch (...) {
        // server half must never take down the harness
      }
    });
  }

  ~InProcessOutbound() override {
    conduit_.a().close();
    if (server_.joinable()) server_.join();
  }

  migration::Channel& channel() override { return conduit_.a(); }
  std::uint64_t wire_bytes() const override { return conduit_.total_bytes(); }

 private:
  migration::MemoryConduit conduit_;
  std::thread server_;
};

}  // namespace

Cluster::Cluster(std::vector<NodeSpec> specs, const nlohmann::json& registry)
    : workdir_(fresh_workdir()) {
  // every node knows every other node as a peer
  for (auto& spec : specs) {
    for (const auto& other : specs) {
      if (other.node_id == spec.node_id) continue;
      if (!spec.config.find_peer(other.node_id))
        spec.config.peers.push_back(
            gateway::Peer{other.node_id, Addr{"127.0.0.1", 0}});
    }
  }
  for (auto& spec : specs) {
    gateway::Node::Options opts;
    opts.node_id = spec.node_id;
    opts.config = spec.config;
    opts.data_dir = workdir_ / spec.node_id;
    auto node = std::make_unique<gateway::Node>(std::move(opts));
    node->set_trace_sink([this](const gateway::TraceEvent& e) { trace_.append(e); });
    node->set_channel_factory(
        [this](const gateway::Peer& peer) { return make_channel(peer); });
    node->load_registry(spec.registry.is_null() ? registry : spec.registry);
    order_.push_back(spec.node_id);
    nodes_.emplace(spec.node_id, std::move(node));
  }
}

Cluster::~Cluster() {
  nodes_.clear();
  std::error_code ec;
  std::filesystem::remove_all(workdir_, ec);
}

gateway::Node& Cluster::node(const std::string& node_id) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) fail(Errc::NotFound, "no node " + node_id);
  return *it->second;
}

std::vector<std::string> Cluster::node_ids() const { return order_; }

void Cluster::advance_clock(SimTime dt) {
  clock_ += dt;
  for (const auto& id : order_) nodes_.at(id)->advance_clock(dt);
}

std::unique_ptr<gateway::OutboundChannel> Cluster::make_channel(
    const gateway::Peer& peer) {
  auto it = nodes_.find(peer.node_id);
  if (it == nodes_.end())
    fail(Errc::TargetUnreachable, "peer " + peer.node_id + " not in cluster");
  auto handle =
      std::make_unique<InProcessOutbound>(*it->second, kill_after_frames_);
  auto* raw = handle.get();
  // remember byte counts for the only-checkpoint-moves assertions
  last_wire_bytes_ = 0;
  struct Watch : gateway::OutboundChannel {
    Watch(std::unique_ptr<InProcessOutbound> inner, std::uint64_t* out)
        : inner_(std::move(inner)), out_(out) {}
    ~Watch() override { *out_ = inner_->wire_bytes(); }
    migration::Channel& channel() override { return inner_->channel(); }
    std::uint64_t wire_bytes() const override { return inner_->wire_bytes(); }
    std::unique_ptr<InProcessOutbound> inner_;
    std::uint64_t* out_;
  };
  (void)raw;
  return std::make_unique<Watch>(std::move(handle), &last_wire_bytes_);
}

}  // namespace edgefaas::harness
