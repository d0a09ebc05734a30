#include "edgefaas/gateway/node.hpp"

#include <algorithm>
#include <fstream>

#include "edgefaas/sim/snapshot.hpp"

namespace edgefaas::gateway {

using lifecycle::Event;
using lifecycle::Instance;
using lifecycle::InstanceState;
using lifecycle::StateKind;

const char* path_name(InvocationRecord::Path p) {
  switch (p) {
    case InvocationRecord::Path::Cold: return "Cold";
    case InvocationRecord::Path::WarmResume: return "WarmResume";
    case InvocationRecord::Path::RestoreFromCheckpoint:
      return "RestoreFromCheckpoint";
  }
  return "?";
}

const char* outcome_name(InvocationRecord::Outcome o) {
  switch (o) {
    case InvocationRecord::Outcome::Responded: return "Responded";
    case InvocationRecord::Outcome::Suspended: return "Suspended";
    case InvocationRecord::Outcome::Failed: return "Failed";
  }
  return "?";
}

nlohmann::json InvocationRecord::to_json() const {
  return {{"request_id", request_id},
          {"function_id", function_id},
          {"instance_id", instance_id},
          {"path", path_name(path)},
          {"path_charge_s", path_charge},
          {"charged_latency_s", charged_latency},
          {"outcome", outcome_name(outcome)},
          {"response", to_string(response)}};
}

nlohmann::json NodeStats::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : invocations) recs.push_back(r.to_json());
  return {{"invocations", recs},
          {"memory_usage", memory_usage},
          {"memory_capacity", memory_capacity},
          {"dropped_packets", dropped_packets},
          {"wakes", wakes},
          {"migrations_out", migrations_out},
          {"migrations_in", migrations_in},
          {"backups_written", backups_written},
          {"total_charged_s", total_charged_s}};
}

Node::Node(Options opts)
    : node_id_(std::move(opts.node_id)),
      data_dir_(std::move(opts.data_dir)),
      config_(std::move(opts.config)),
      machine_(config_.costs),
      store_(data_dir_.empty() ? std::filesystem::temp_directory_path() /
                                     ("edgefaas-" + node_id_)
                               : data_dir_) {
  if (data_dir_.empty())
    data_dir_ = store_.root();
  config_.costs.validate();
}

void Node::load_registry(const nlohmann::json& j) {
  std::lock_guard lock(mu_);
  registry_.load(j);
}

bool Node::registry_loaded() const {
  std::lock_guard lock(mu_);
  return registry_.loaded();
}

SimTime Node::now() const {
  std::lock_guard lock(mu_);
  return clock_;
}

void Node::trace(const std::string& kind, const std::string& instance,
                 const std::string& detail) {
  if (trace_sink_) trace_sink_(TraceEvent{node_id_, kind, instance, detail});
}

Instance& Node::require_instance(const std::string& id) {
  auto it = instances_.find(id);
  if (it == instances_.end())
    fail(Errc::UnknownInstance, "no instance " + id);
  return it->second;
}

const Instance& Node::require_instance(const std::string& id) const {
  auto it = instances_.find(id);
  if (it == instances_.end())
    fail(Errc::UnknownInstance, "no instance " + id);
  return it->second;
}

Addr Node::alloc_port() { return Addr{node_id_, next_port_++}; }

Instance Node::make_instance(const lifecycle::FunctionSpec& spec) {
  Instance inst;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "i%06llu",
                static_cast<unsigned long long>(next_instance_++));
  inst.instance_id = node_id_ + "-" + buf;
  inst.function_id = spec.function_id;
  inst.home_node = node_id_;
  inst.created_at = clock_;
  inst.last_active_at = clock_;
  inst.memory_declared = spec.memory_declared;
  inst.idle_timeout = spec.use_default_idle_timeout ? config_.idle_timeout_default
                                                    : spec.idle_timeout;
  inst.sim.rng_seed = next_instance_;
  inst.sim.clock_at_snapshot = clock_;
  return inst;
}

void Node::set_state(Instance& inst, Instance updated, double cost,
                     InvocationRecord* record) {
  const std::string from = inst.state.str();
  const std::string to = updated.state.str();
  updated.cumulative_cost_s += cost;
  total_charged_s_ += cost;
  if (record) record->charged_latency += cost;
  inst = std::move(updated);
  if (from != to) trace("transition", inst.instance_id, from + " -> " + to);
}

void Node::apply_transition(Instance& inst, Event ev,
                            const lifecycle::TransitionArgs& args,
                            InvocationRecord* record) {
  auto out = machine_.apply(inst, ev, clock_, args);
  set_state(inst, std::move(out.instance), out.cost_s, record);
}

std::uint64_t Node::usage_locked() const {
  std::uint64_t total = 0;
  for (const auto& [id, inst] : instances_)
    total += config_.memory.charge(inst.state.kind, inst.memory_declared);
  return total;
}

// --------------------------------------------------------------------------
// Trigger path

InvocationRecord Node::handle_trigger(const std::string& route, Bytes payload) {
  std::lock_guard lock(mu_);
  const lifecycle::FunctionSpec* spec = registry_.find_route(route);
  if (!spec) fail(Errc::RouteNotFound, "no function registered at " + route);

  InvocationRecord record;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "r%06llu",
                static_cast<unsigned long long>(next_request_++));
  record.request_id = buf;
  record.function_id = spec->function_id;

  // Path selection: warm resume beats restore beats cold, whenever the
  // respective instance exists.
  Instance* paused = nullptr;
  Instance* checkpointed = nullptr;
  bool busy = false;
  for (auto& [id, inst] : instances_) {
    if (inst.function_id != spec->function_id) continue;
    switch (inst.state.kind) {
      case StateKind::Paused:
        if (!paused) paused = &inst;
        break;
      case StateKind::Checkpointed:
        if (!checkpointed) checkpointed = &inst;
        break;
      case StateKind::Terminated:
      case StateKind::Failed:
        break;
      default:
        busy = true;
        break;
    }
  }

  if (paused) {
    record.path = InvocationRecord::Path::WarmResume;
    record.instance_id = paused->instance_id;
    record.path_charge = config_.costs.unpause;
    trace("invoke", paused->instance_id,
          record.request_id + " WarmResume " + route);
    apply_transition(*paused, Event::Unpause, {}, &record);
    drain_proxy_into(*paused);
    continue_after_resume(*paused, &record);
  } else if (checkpointed) {
    record.path = InvocationRecord::Path::RestoreFromCheckpoint;
    record.instance_id = checkpointed->instance_id;
    record.path_charge = config_.costs.restore();
    trace("invoke", checkpointed->instance_id,
          record.request_id + " RestoreFromCheckpoint " + route);
    store::Archive archive;
    try {
      archive = store_.read_archive(checkpointed->state.archive_id);
    } catch (const Error& e) {
      apply_transition(*checkpointed, Event::Fail, {.cause = e.what()},
                       &record);
      record.outcome = InvocationRecord::Outcome::Failed;
      records_.push_back(record);
      throw;
    }
    restore_locked(*checkpointed, archive, &record);
    if (checkpointed->state.kind == StateKind::Running) {
      run_and_settle(*checkpointed, &record);
    } else {
      record.outcome = InvocationRecord::Outcome::Suspended;
    }
  } else if (busy && !spec->reentrant) {
    fail(Errc::InstanceBusy,
         "a live instance of " + spec->function_id + " exists");
  } else {
    record.path = InvocationRecord::Path::Cold;
    record.path_charge = config_.costs.start_cold;
    ensure_capacity(config_.memory.running_charge(spec->memory_declared));
    Instance fresh = make_instance(*spec);
    auto [it, ok] = instances_.emplace(fresh.instance_id, std::move(fresh));
    Instance& inst = it->second;
    record.instance_id = inst.instance_id;
    trace("invoke", inst.instance_id, record.request_id + " Cold " + route);
    apply_transition(inst, Event::Invoke, {}, &record);
    apply_transition(inst, Event::Complete, {}, &record);
    run_and_settle(inst, &record);
  }

  // Trigger payloads are carried to programs as injected packets; the body
  // is accepted for parity with real gateways.
  (void)payload;
  records_.push_back(record);
  return record;
}

void Node::run_and_settle(Instance& inst, InvocationRecord* record) {
  if (inst.state.kind != StateKind::Running)
    fail(Errc::IllegalTransition,
         "run_and_settle from " + inst.state.str());

  sim::RunResult result;
  try {
    result = sim::run_until_block(inst.sim, registry_.function(inst.function_id).program,
                                  clock_, [this] { return alloc_port(); });
  } catch (const Error& e) {
    apply_transition(inst, Event::Fail, {.cause = e.what()}, record);
    if (record) record->outcome = InvocationRecord::Outcome::Failed;
    proxy_.unregister(inst.instance_id);
    return;
  }

  inst.sim = std::move(result.state);
  if (!result.responses.empty()) {
    inst.response = result.responses.back();
    if (record) record->response = result.responses.back();
    trace("respond", inst.instance_id, to_string(*inst.response));
  }

  if (result.outcome == sim::RunOutcome::Completed) {
    set_state(inst, lifecycle::mark_completed(inst, clock_), 0, record);
    if (record) record->outcome = InvocationRecord::Outcome::Responded;
    proxy_.unregister(inst.instance_id);
    return;
  }

  settle_block(inst, *result.reason, record);
  if (record) record->outcome = InvocationRecord::Outcome::Suspended;
}

void Node::continue_after_resume(Instance& inst, InvocationRecord* record) {
  std::optional<sim::BlockReason> reason = inst.suspended_reason;
  inst.suspended_reason.reset();
  if (reason && sim::still_blocked(*reason, inst.sim, clock_)) {
    settle_block(inst, *reason, record);
    if (record) record->outcome = InvocationRecord::Outcome::Suspended;
    return;
  }
  run_and_settle(inst, record);
}

void Node::settle_block(Instance& inst, sim::BlockReason reason,
                        InvocationRecord* record) {
  const auto verdict = policy::on_block_verdict(
      registry_.function(inst.function_id), config_.suspend_on_block,
      usage_locked(), config_.memory);

  switch (verdict) {
    case policy::SuspendVerdict::Stay: {
      set_state(inst, lifecycle::mark_blocked(inst, reason, clock_), 0, record);
      auto rules = lifecycle::derive_wake_rules(inst, reason);
      inst.wake_rules = rules;
      if (!rules.empty()) {
        proxy_.register_rules(inst.instance_id, std::move(rules));
        if (auto wake = proxy_.confirm_suspended(inst.instance_id, clock_)) {
          trace("wake", inst.instance_id, "immediate");
          handle_wake(*wake);
        }
      }
      break;
    }
    case policy::SuspendVerdict::Pause:
      pause_locked(inst, reason, record);
      break;
    case policy::SuspendVerdict::Checkpoint:
      checkpoint_locked(inst, reason, record);
      break;
  }
}

// --------------------------------------------------------------------------
// Suspension

void Node::pause_locked(Instance& inst, std::optional<sim::BlockReason> reason,
                        InvocationRecord* record) {
  if (inst.state.kind == StateKind::Blocked && !reason)
    reason = inst.state.reason;
  auto rules = lifecycle::derive_wake_rules(inst, reason);
  if (!rules.empty()) proxy_.register_rules(inst.instance_id, rules);
  if (mid_suspend_hook_) mid_suspend_hook_();

  try {
    auto out = lifecycle::suspend_for_block(machine_, inst, reason,
                                            lifecycle::SuspendMode::Pause,
                                            clock_);
    set_state(inst, std::move(out.instance), out.cost_s, record);
  } catch (const Error&) {
    proxy_.unregister(inst.instance_id);
    throw;
  }
  if (auto wake = proxy_.confirm_suspended(inst.instance_id, clock_)) {
    trace("wake", inst.instance_id, "immediate");
    handle_wake(*wake);
  }
}

void Node::checkpoint_locked(Instance& inst,
                             std::optional<sim::BlockReason> reason,
                             InvocationRecord* record) {
  if (inst.state.kind == StateKind::Blocked && !reason)
    reason = inst.state.reason;
  if (inst.state.kind == StateKind::Paused && !reason)
    reason = inst.suspended_reason;

  auto rules = lifecycle::derive_wake_rules(inst, reason);
  const bool was_blocked = inst.state.kind == StateKind::Blocked;
  if (!rules.empty()) proxy_.register_rules(inst.instance_id, rules);
  if (mid_suspend_hook_) mid_suspend_hook_();

  inst.sim.clock_at_snapshot = clock_;
  try {
    auto out = lifecycle::suspend_for_block(
        machine_, inst, reason, lifecycle::SuspendMode::Checkpoint, clock_,
        [this](const Instance& snap) { return write_checkpoint(snap); });
    set_state(inst, std::move(out.instance), out.cost_s, record);
  } catch (const Error&) {
    // leave the wake registration consistent with the unchanged state
    if (was_blocked && !rules.empty()) {
      proxy_.register_rules(inst.instance_id, rules);
      proxy_.confirm_suspended(inst.instance_id, clock_);
    } else {
      proxy_.unregister(inst.instance_id);
    }
    throw;
  }
  if (auto wake = proxy_.confirm_suspended(inst.instance_id, clock_)) {
    trace("wake", inst.instance_id, "immediate");
    handle_wake(*wake);
  }
}

store::Manifest Node::make_manifest(const Instance& inst,
                                    const std::vector<proxy::WakeRule>& rules) {
  store::Manifest m;
  m.function_id = inst.function_id;
  m.instance_id = inst.instance_id;
  m.image_digest = registry_.function(inst.function_id).image_digest;
  m.wake_rules = rules;
  m.created_at = clock_;
  m.origin_node = node_id_;
  return m;
}

std::string Node::write_checkpoint(const Instance& inst) {
  const store::Manifest manifest = make_manifest(inst, inst.wake_rules);
  const Bytes blob = sim::snapshot(inst.sim);
  const std::string id = store_.write_archive(manifest, blob);
  last_archive_id_ = id;
  trace("checkpoint", inst.instance_id, id);
  return id;
}

// --------------------------------------------------------------------------
// Restore / wake

std::optional<sim::BlockReason> Node::reason_from_rules(
    const std::vector<proxy::WakeRule>& rules) const {
  for (const auto& r : rules) {
    if (const auto* t = std::get_if<proxy::TimerRule>(&r))
      return sim::BlockReason::sleep_until(t->wake_at);
    if (const auto* p = std::get_if<proxy::PacketRule>(&r))
      return sim::BlockReason::net_recv(p->socket_id);
  }
  return std::nullopt;
}

void Node::drain_proxy_into(Instance& inst) {
  auto deliveries = proxy_.take_buffered(inst.instance_id);
  for (const auto& d : deliveries) {
    sim::deliver(inst.sim, d.socket_id, d.payload);
    trace("deliver", inst.instance_id,
          d.socket_id + " " + std::to_string(d.payload.size()) + "B seq=" +
              std::to_string(d.seq));
  }
}

void Node::restore_locked(Instance& inst, const store::Archive& archive,
                          InvocationRecord* record) {
  apply_transition(inst, Event::Restore, {}, record);
  inst.sim = sim::resume(archive.state_blob);
  drain_proxy_into(inst);
  apply_transition(inst, Event::Complete, {}, record);
  if (inst.state.kind == StateKind::Blocked) {
    auto rules = lifecycle::derive_wake_rules(inst, inst.state.reason);
    inst.wake_rules = rules;
    if (!rules.empty()) {
      proxy_.register_rules(inst.instance_id, std::move(rules));
      if (auto wake = proxy_.confirm_suspended(inst.instance_id, clock_)) {
        trace("wake", inst.instance_id, "immediate");
        handle_wake(*wake);
      }
    }
  }
}

void Node::handle_wake(const proxy::WakeAction& action) {
  auto it = instances_.find(action.instance_id);
  if (it == instances_.end()) return;
  Instance& inst = it->second;
  trace("wake", inst.instance_id,
        action.trigger == proxy::WakeAction::Trigger::Timer ? "timer" : "packet");

  switch (inst.state.kind) {
    case StateKind::Blocked: {
      drain_proxy_into(inst);
      set_state(inst, lifecycle::mark_woken(inst, clock_), 0, nullptr);
      run_and_settle(inst, nullptr);
      break;
    }
    case StateKind::Paused: {
      apply_transition(inst, Event::Unpause, {}, nullptr);
      drain_proxy_into(inst);
      continue_after_resume(inst, nullptr);
      break;
    }
    case StateKind::Checkpointed: {
      store::Archive archive;
      try {
        archive = store_.read_archive(inst.state.archive_id);
      } catch (const Error& e) {
        apply_transition(inst, Event::Fail, {.cause = e.what()}, nullptr);
        proxy_.unregister(inst.instance_id);
        return;
      }
      restore_locked(inst, archive, nullptr);
      if (inst.state.kind == StateKind::Running) run_and_settle(inst, nullptr);
      break;
    }
    default:
      trace("wake", inst.instance_id,
            "ignored in state " + inst.state.str());
      break;
  }
}

// --------------------------------------------------------------------------
// Admin operations

std::vector<Instance> Node::instances() const {
  std::lock_guard lock(mu_);
  std::vector<Instance> out;
  out.reserve(instances_.size());
  for (const auto& [id, inst] : instances_) out.push_back(inst);
  return out;
}

Instance Node::instance(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  return require_instance(instance_id);
}

nlohmann::json Node::instance_view(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  const Instance& inst = require_instance(instance_id);
  nlohmann::json vars = nlohmann::json::object();
  for (const auto& [k, v] : inst.sim.vars) vars[k] = v;
  nlohmann::json sockets = nlohmann::json::object();
  for (const auto& [id, sock] : inst.sim.sockets) {
    sockets[id] = {{"local", sock.local.str()},
                   {"remote", sock.remote.str()},
                   {"status", sock.status == sim::SocketStatus::Open ? "open"
                                                                     : "closed"},
                   {"buffered", sock.recv_buffer.size()},
                   {"recv_log", to_string(sock.recv_log)},
                   {"sent_log", to_string(sock.sent_log)}};
  }
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : inst.wake_rules) rules.push_back(proxy::rule_to_json(r));
  nlohmann::json j = {{"instance_id", inst.instance_id},
                      {"function_id", inst.function_id},
                      {"state", inst.state.str()},
                      {"vars", vars},
                      {"sockets", sockets},
                      {"wake_rules", rules},
                      {"home_node", inst.home_node},
                      {"created_at", inst.created_at.seconds()},
                      {"last_active_at", inst.last_active_at.seconds()},
                      {"memory_charge",
                       config_.memory.charge(inst.state.kind, inst.memory_declared)},
                      {"cumulative_cost_s", inst.cumulative_cost_s}};
  if (inst.response) j["response"] = to_string(*inst.response);
  if (inst.state.kind == StateKind::Checkpointed)
    j["archive_id"] = inst.state.archive_id;
  return j;
}

std::string Node::checkpoint_instance(const std::string& instance_id) {
  std::lock_guard lock(mu_);
  Instance& inst = require_instance(instance_id);
  checkpoint_locked(inst, std::nullopt, nullptr);
  // a racing wake may already have restored it; report the written archive
  return inst.state.kind == StateKind::Checkpointed ? inst.state.archive_id
                                                    : last_archive_id_;
}

void Node::resume_instance(const std::string& instance_id) {
  std::lock_guard lock(mu_);
  Instance& inst = require_instance(instance_id);
  switch (inst.state.kind) {
    case StateKind::Checkpointed: {
      store::Archive archive = store_.read_archive(inst.state.archive_id);
      restore_locked(inst, archive, nullptr);
      if (inst.state.kind == StateKind::Running) run_and_settle(inst, nullptr);
      break;
    }
    case StateKind::Paused: {
      apply_transition(inst, Event::Unpause, {}, nullptr);
      drain_proxy_into(inst);
      continue_after_resume(inst, nullptr);
      break;
    }
    case StateKind::Blocked: {
      if (inst.state.reason &&
          sim::still_blocked(*inst.state.reason, inst.sim, clock_))
        fail(Errc::IllegalTransition,
             "instance still blocked on " + inst.state.reason->str());
      drain_proxy_into(inst);
      set_state(inst, lifecycle::mark_woken(inst, clock_), 0, nullptr);
      run_and_settle(inst, nullptr);
      break;
    }
    default:
      fail(Errc::IllegalTransition, "resume from " + inst.state.str());
  }
}

void Node::pause_instance(const std::string& instance_id) {
  std::lock_guard lock(mu_);
  Instance& inst = require_instance(instance_id);
  pause_locked(inst, std::nullopt, nullptr);
}

void Node::unpause_instance(const std::string& instance_id) {
  std::lock_guard lock(mu_);
  Instance& inst = require_instance(instance_id);
  apply_transition(inst, Event::Unpause, {}, nullptr);
  drain_proxy_into(inst);
  continue_after_resume(inst, nullptr);
}

void Node::reap_instance(const std::string& instance_id) {
  std::lock_guard lock(mu_);
  Instance& inst = require_instance(instance_id);
  reap_locked(inst);
}

void Node::reap_locked(Instance& inst) {
  apply_transition(inst, Event::Reap, {}, nullptr);
  proxy_.unregister(inst.instance_id);
}

std::string Node::restore_archive(const std::string& archive_id) {
  std::lock_guard lock(mu_);
  store::Archive archive = store_.read_archive(archive_id);

  const auto* spec = registry_.find_function(archive.manifest.function_id);
  if (!spec)
    fail(Errc::RejectNoImage,
         "function " + archive.manifest.function_id + " not registered here");
  if (spec->image_digest != archive.manifest.image_digest)
    fail(Errc::RejectNoImage,
         "image digest mismatch for " + archive.manifest.function_id);
  for (const auto& [id, other] : instances_) {
    if (other.function_id == spec->function_id && !other.state.absorbing())
      fail(Errc::Conflict,
           "live instance " + id + " of " + spec->function_id + " exists");
  }

  ensure_capacity(config_.memory.running_charge(spec->memory_declared));

  Instance inst = make_instance(*spec);
  inst.state = InstanceState::checkpointed(archive_id);
  inst.suspended_reason = reason_from_rules(archive.manifest.wake_rules);
  inst.wake_rules = archive.manifest.wake_rules;
  auto [it, ok] = instances_.emplace(inst.instance_id, std::move(inst));
  Instance& stored = it->second;
  trace("restore", stored.instance_id, archive_id);

  restore_locked(stored, archive, nullptr);
  if (stored.state.kind == StateKind::Running) run_and_settle(stored, nullptr);
  return stored.instance_id;
}

InjectOutcome Node::inject_packet(const Addr& src, const Addr& dst,
                                  Bytes payload) {
  std::lock_guard lock(mu_);
  proxy::SimPacket pkt;
  pkt.src = src;
  pkt.dst = dst;
  pkt.payload = std::move(payload);
  pkt.seq = next_seq_++;
  trace("packet", "", src.str() + " -> " + dst.str() + " " +
                          std::to_string(pkt.payload.size()) + "B");

  InjectOutcome out;
  auto matched = proxy_.match(pkt);
  if (matched) {
    out.matched = true;
    out.instance_id = matched->first;
  }
  if (auto action = proxy_.ingest(pkt, clock_)) {
    out.woke = true;
    handle_wake(*action);
  }
  return out;
}

void Node::advance_clock(SimTime dt) {
  std::lock_guard lock(mu_);
  if (dt.us < 0) fail(Errc::ConfigError, "clock cannot go backwards");
  clock_ += dt;
  trace("clock", "", "now=" + std::to_string(clock_.seconds()));

  for (const auto& action : proxy_.timer_tick(clock_)) handle_wake(action);
  idle_reaper();
  if (config_.backup_interval.us > 0) do_backups();
}

void Node::idle_reaper() {
  for (auto& [id, inst] : instances_) {
    const SimTime idle = clock_ - inst.last_active_at;
    if (inst.state.kind == StateKind::Paused && idle >= inst.idle_timeout &&
        inst.idle_timeout.us >= 0) {
      trace("reap", id, "idle " + std::to_string(idle.seconds()) + "s");
      reap_locked(inst);
    } else if (inst.state.kind == StateKind::Running &&
               idle >= inst.idle_timeout && idle.us > 0) {
      trace("reap", id, "idle running");
      apply_transition(inst, Event::Pause, {}, nullptr);
      reap_locked(inst);
    }
    // Checkpointed instances are exempt: they hold no memory.
  }
}

void Node::ensure_capacity(std::uint64_t extra_bytes) {
  const std::uint64_t usage = usage_locked();
  if (usage + extra_bytes <= config_.memory.node_capacity) return;
  const std::uint64_t needed = usage + extra_bytes - config_.memory.node_capacity;

  std::vector<Instance> view;
  view.reserve(instances_.size());
  for (const auto& [id, inst] : instances_) view.push_back(inst);
  auto plan = policy::plan_eviction(view, config_.memory, needed,
                                    config_.costs, clock_);
  trace("evict", "",
        "need " + std::to_string(needed) + "B, " +
            std::to_string(plan.actions.size()) + " actions");
  for (const auto& action : plan.actions) {
    Instance& inst = require_instance(action.instance_id);
    switch (action.kind) {
      case policy::ActionKind::Reap:
        reap_locked(inst);
        break;
      case policy::ActionKind::Checkpoint:
        checkpoint_locked(inst, std::nullopt, nullptr);
        break;
      case policy::ActionKind::MigrateOut:
        break;  // never planned for eviction
    }
  }
}

std::vector<std::string> Node::run_backup_tick() {
  std::lock_guard lock(mu_);
  if (config_.backup_interval.us <= 0)
    fail(Errc::ConfigError, "backups are disabled");
  std::vector<store::CheckpointStore::BackupItem> items;
  for (const auto& [id, inst] : instances_) {
    const StateKind k = inst.state.kind;
    if (k != StateKind::Running && k != StateKind::Blocked &&
        k != StateKind::Paused)
      continue;
    std::optional<sim::BlockReason> reason;
    if (k == StateKind::Blocked) reason = inst.state.reason;
    if (k == StateKind::Paused) reason = inst.suspended_reason;
    auto rules = lifecycle::derive_wake_rules(inst, reason);
    store::CheckpointStore::BackupItem item;
    item.manifest = make_manifest(inst, rules);
    sim::SimState snap_state = inst.sim;
    snap_state.clock_at_snapshot = clock_;
    item.blob = sim::snapshot(snap_state);
    items.push_back(std::move(item));
  }
  auto written = store_.backup_tick(items, clock_, config_.backup_interval);
  backups_written_ += written.size();
  for (const auto& id : written) trace("backup", "", id);

  if (!config_.backup_push_to.empty() && !written.empty()) {
    const Peer* peer = config_.find_peer(config_.backup_push_to);
    if (peer) {
      for (const auto& id : written) {
        try {
          push_backup(id, *peer);
        } catch (const Error& e) {
          trace("backup", "", std::string("push failed: ") + e.what());
        }
      }
    }
  }

  std::set<std::string> pinned;
  for (const auto& [id, inst] : instances_)
    if (!inst.state.archive_id.empty()) pinned.insert(inst.state.archive_id);
  store_.gc(config_.backup_retain, pinned);
  return written;
}

void Node::do_backups() {
  try {
    run_backup_tick();
  } catch (const Error& e) {
    trace("backup", "", std::string("tick failed: ") + e.what());
  }
}

NodeStats Node::stats() const {
  std::lock_guard lock(mu_);
  NodeStats s;
  s.invocations = records_;
  s.memory_usage = usage_locked();
  s.memory_capacity = config_.memory.node_capacity;
  s.dropped_packets = proxy_.dropped_count();
  s.wakes = proxy_.wake_count();
  s.migrations_out = migrations_out_;
  s.migrations_in = migrations_in_;
  s.backups_written = backups_written_;
  s.total_charged_s = total_charged_s_;
  return s;
}

policy::NodeInfo Node::info() const {
  std::lock_guard lock(mu_);
  policy::NodeInfo info;
  info.node_id = node_id_;
  const std::uint64_t usage = usage_locked();
  info.free_capacity = config_.memory.node_capacity > usage
                           ? config_.memory.node_capacity - usage
                           : 0;
  info.base_images = registry_.base_images();
  return info;
}

std::vector<std::string> Node::archives() const {
  std::lock_guard lock(mu_);
  return store_.list();
}

std::optional<policy::OffloadPlan> Node::evaluate_offload(
    std::span<const policy::NodeInfo> peers) const {
  std::lock_guard lock(mu_);
  std::vector<Instance> view;
  view.reserve(instances_.size());
  for (const auto& [id, inst] : instances_) view.push_back(inst);
  return policy::plan_offload(usage_locked(), config_.memory, peers, view);
}

void Node::journal(const std::string& phase, const std::string& instance_id,
                   const std::string& archive_id, const std::string& target) {
  std::ofstream out(data_dir_ / "migration_journal.jsonl", std::ios::app);
  nlohmann::json j = {{"at_us", clock_.us},
                      {"phase", phase},
                      {"instance_id", instance_id},
                      {"archive_id", archive_id},
                      {"target", target}};
  out << j.dump() << "\n";
  out.flush();
}

}  // namespace edgefaas::gateway
