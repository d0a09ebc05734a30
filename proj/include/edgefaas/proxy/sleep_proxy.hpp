#pragma once

#include <map>
#include <optional>

#include "edgefaas/proxy/rules.hpp"

namespace edgefaas::proxy {

// The single shared watcher for all suspended instances on a node. Holds
// wake rules, buffers inbound payloads for suspended sockets, and fires
// at most one WakeAction per suspension epoch.
//
// Epoch protocol: register_rules() opens an epoch in the "suspending"
// window; matches during the window buffer and defer the wake;
// confirm_suspended() closes the window and emits any deferred wake.
// take_buffered() hands the buffered bytes over at resume time and ends
// the epoch. Re-registration is last-writer-wins and opens a new epoch.
class SleepProxy {
 public:
  std::uint64_t register_rules(const std::string& instance_id,
                               std::vector<WakeRule> rules);

  // Marks the suspension complete. Returns the deferred WakeAction if a
  // match (packet or due timer) arrived during the suspending window.
  std::optional<WakeAction> confirm_suspended(const std::string& instance_id,
                                              SimTime now);

  // Pure lookup: which (instance, socket) would this packet wake?
  std::optional<std::pair<std::string, std::string>> match(
      const SimPacket& packet) const;

  // Buffers a matching packet and returns a WakeAction exactly once per
  // epoch. Non-matching packets are dropped (counted).
  std::optional<WakeAction> ingest(const SimPacket& packet, SimTime now);

  // Fires every confirmed TimerRule with wake_at <= now, each at most
  // once, in wake_at order. `now` must be nondecreasing across calls.
  std::vector<WakeAction> timer_tick(SimTime now);

  // Drains buffered deliveries (seq order) and ends the epoch.
  std::vector<Delivery> take_buffered(const std::string& instance_id);

  void unregister(const std::string& instance_id);
  bool registered(const std::string& instance_id) const;

  std::uint64_t dropped_count() const { return dropped_; }
  std::uint64_t wake_count() const { return wakes_; }

 private:
  struct Epoch {
    std::uint64_t watch_id = 0;
    std::vector<WakeRule> rules;
    bool confirmed = false;
    bool fired = false;
    bool pending_packet_wake = false;
    std::vector<Delivery> buffered;
  };

  WakeAction fire(Epoch& e, const std::string& instance_id,
                  WakeAction::Trigger t);
  std::optional<SimTime> due_timer(const Epoch& e, SimTime now) const;

  std::map<std::string, Epoch> epochs_;  // instance_id -> epoch
  std::uint64_t next_watch_id_ = 1;
  std::uint64_t dropped_ = 0;
  std::uint64_t wakes_ = 0;
  SimTime last_tick_{};
};

}  // namespace edgefaas::proxy
