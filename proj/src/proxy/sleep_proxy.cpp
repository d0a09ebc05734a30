#include "edgefaas/proxy/sleep_proxy.hpp"

#include <algorithm>

namespace edgefaas::proxy {

std::uint64_t SleepProxy::register_rules(const std::string& instance_id,
                                         std::vector<WakeRule> rules) {
  if (rules.empty())
    fail(Errc::EmptyRules, "no wake rules for instance " + instance_id);
  for (const WakeRule& r : rules) {
    const auto* pr = std::get_if<PacketRule>(&r);
    if (!pr) continue;
    for (const auto& [other_id, epoch] : epochs_) {
      if (other_id == instance_id) continue;  // replaced below
      for (const WakeRule& existing : epoch.rules) {
        const auto* er = std::get_if<PacketRule>(&existing);
        if (er && er->dst == pr->dst)
          fail(Errc::ConflictingRule,
               "dst " + pr->dst.str() + " already claimed by " + other_id);
      }
    }
  }
  Epoch e;
  e.watch_id = next_watch_id_++;
  e.rules = std::move(rules);
  epochs_[instance_id] = std::move(e);  // last-writer-wins, fresh epoch
  return epochs_[instance_id].watch_id;
}

std::optional<std::pair<std::string, std::string>> SleepProxy::match(
    const SimPacket& packet) const {
  for (const auto& [instance_id, epoch] : epochs_) {
    for (const WakeRule& r : epoch.rules) {
      const auto* pr = std::get_if<PacketRule>(&r);
      if (!pr) continue;
      if (pr->dst != packet.dst) continue;
      if (pr->src && *pr->src != packet.src) continue;
      return std::make_pair(instance_id, pr->socket_id);
    }
  }
  return std::nullopt;
}

WakeAction SleepProxy::fire(Epoch& e, const std::string& instance_id,
                            WakeAction::Trigger t) {
  e.fired = true;
  ++wakes_;
  WakeAction a;
  a.instance_id = instance_id;
  a.deliveries = e.buffered;
  a.trigger = t;
  return a;
}

std::optional<WakeAction> SleepProxy::ingest(const SimPacket& packet,
                                             SimTime /*now*/) {
  auto m = match(packet);
  if (!m) {
    ++dropped_;
    return std::nullopt;
  }
  auto& [instance_id, socket_id] = *m;
  Epoch& e = epochs_.at(instance_id);
  e.buffered.push_back(Delivery{socket_id, packet.payload, packet.seq});
  if (e.fired) return std::nullopt;  // already woken this epoch
  if (!e.confirmed) {
    // packet raced the checkpoint write; defer until suspension completes
    e.pending_packet_wake = true;
    return std::nullopt;
  }
  return fire(e, instance_id, WakeAction::Trigger::Packet);
}

std::optional<SimTime> SleepProxy::due_timer(const Epoch& e,
                                             SimTime now) const {
  std::optional<SimTime> best;
  for (const WakeRule& r : e.rules) {
    const auto* tr = std::get_if<TimerRule>(&r);
    if (!tr || tr->wake_at > now) continue;
    if (!best || tr->wake_at < *best) best = tr->wake_at;
  }
  return best;
}

std::optional<WakeAction> SleepProxy::confirm_suspended(
    const std::string& instance_id, SimTime now) {
  auto it = epochs_.find(instance_id);
  if (it == epochs_.end()) return std::nullopt;
  Epoch& e = it->second;
  e.confirmed = true;
  if (e.fired) return std::nullopt;
  if (e.pending_packet_wake) {
    e.pending_packet_wake = false;
    return fire(e, instance_id, WakeAction::Trigger::Packet);
  }
  if (due_timer(e, now))
    return fire(e, instance_id, WakeAction::Trigger::Timer);
  return std::nullopt;
}

std::vector<WakeAction> SleepProxy::timer_tick(SimTime now) {
  if (now < last_tick_)
    fail(Errc::IllegalTransition, "timer_tick clock went backwards");
  last_tick_ = now;

  std::vector<std::pair<SimTime, std::string>> due;
  for (auto& [instance_id, e] : epochs_) {
    if (!e.confirmed || e.fired) continue;
    if (auto at = due_timer(e, now)) due.emplace_back(*at, instance_id);
  }
  std::sort(due.begin(), due.end());

  std::vector<WakeAction> actions;
  for (auto& [at, instance_id] : due) {
    Epoch& e = epochs_.at(instance_id);
    actions.push_back(fire(e, instance_id, WakeAction::Trigger::Timer));
    std::erase_if(e.rules, [&](const WakeRule& r) {
      const auto* tr = std::get_if<TimerRule>(&r);
      return tr && tr->wake_at <= now;
    });
  }
  return actions;
}

std::vector<Delivery> SleepProxy::take_buffered(
    const std::string& instance_id) {
  auto it = epochs_.find(instance_id);
  if (it == epochs_.end()) return {};
  std::vector<Delivery> out = std::move(it->second.buffered);
  std::sort(out.begin(), out.end(),
            [](const Delivery& a, const Delivery& b) { return a.seq < b.seq; });
  epochs_.erase(it);
  return out;
}

void SleepProxy::unregister(const std::string& instance_id) {
  epochs_.erase(instance_id);
}

bool SleepProxy::registered(const std::string& instance_id) const {
  return epochs_.count(instance_id) > 0;
}

}  // namespace edgefaas::proxy
