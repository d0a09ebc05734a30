#include "edgefaas/proxy/rules.hpp"

namespace edgefaas::proxy {

nlohmann::json rule_to_json(const WakeRule& r) {
  if (const auto* p = std::get_if<PacketRule>(&r)) {
    return {{"type", "packet"},
            {"src", p->src ? p->src->str() : "*"},
            {"dst", p->dst.str()},
            {"instance_id", p->instance_id},
            {"socket_id", p->socket_id}};
  }
  const auto& t = std::get<TimerRule>(r);
  return {{"type", "timer"},
          {"wake_at_us", t.wake_at.us},
          {"instance_id", t.instance_id}};
}

WakeRule rule_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "packet") {
    PacketRule p;
    const std::string src = j.at("src").get<std::string>();
    if (src != "*") p.src = Addr::parse(src);
    p.dst = Addr::parse(j.at("dst").get<std::string>());
    p.instance_id = j.at("instance_id").get<std::string>();
    p.socket_id = j.at("socket_id").get<std::string>();
    return p;
  }
  if (type == "timer") {
    TimerRule t;
    t.wake_at = SimTime::from_us(j.at("wake_at_us").get<std::int64_t>());
    t.instance_id = j.at("instance_id").get<std::string>();
    return t;
  }
  fail(Errc::ConfigError, "unknown wake rule type '" + type + "'");
}

std::string rule_str(const WakeRule& r) {
  if (const auto* p = std::get_if<PacketRule>(&r)) {
    return "PacketRule(" + (p->src ? p->src->str() : std::string("*")) + "->" +
           p->dst.str() + ", " + p->instance_id + "/" + p->socket_id + ")";
  }
  const auto& t = std::get<TimerRule>(r);
  return "TimerRule(wake_at=" + std::to_string(t.wake_at.seconds()) + ", " +
         t.instance_id + ")";
}

}  // namespace edgefaas::proxy
