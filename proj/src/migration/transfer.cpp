// Source and target halves of the checkpoint transfer protocol:
//   Offer -> Accept|Reject* -> Chunk* -> Complete -> Restored|Abort
// The source commits on Restored; every other outcome aborts and leaves
// the instance Checkpointed locally with its archive intact.

#include "edgefaas/gateway/node.hpp"
#include "edgefaas/sim/snapshot.hpp"

namespace edgefaas::gateway {

using lifecycle::Event;
using lifecycle::Instance;
using lifecycle::InstanceState;
using lifecycle::StateKind;

namespace {

struct ClientResult {
  bool committed = false;
  std::string reason;
  std::string target_instance_id;
};

// Streams one archive over an open channel and waits for the verdict.
ClientResult run_transfer_client(migration::Channel& ch,
                                 const store::Archive& archive,
                                 const std::string& kind,
                                 std::uint64_t chunk_size) {
  ClientResult result;
  const std::string manifest_bytes = archive.manifest.canonical();
  const Bytes payload =
      migration::encode_archive_payload(manifest_bytes, archive.state_blob);

  migration::Offer offer;
  offer.archive_id = archive.archive_id;
  offer.image_digest = archive.manifest.image_digest;
  offer.payload_size = payload.size();
  offer.kind = kind;
  ch.send(migration::make_offer(offer));

  auto reply = ch.recv();
  if (!reply) {
    result.reason = "connection lost awaiting Accept";
    return result;
  }
  switch (reply->type) {
    case migration::MsgType::Accept:
      break;
    case migration::MsgType::RejectNoImage:
      result.reason = "RejectNoImage";
      return result;
    case migration::MsgType::RejectCapacity:
      result.reason = "RejectCapacity";
      return result;
    case migration::MsgType::Abort:
      result.reason = migration::parse_abort(*reply).reason;
      return result;
    default:
      result.reason = std::string("unexpected ") +
                      migration::msg_type_name(reply->type);
      return result;
  }

  for (std::uint64_t off = 0; off < payload.size(); off += chunk_size) {
    migration::Chunk c;
    c.offset = off;
    const std::uint64_t n = std::min<std::uint64_t>(chunk_size,
                                                    payload.size() - off);
    c.data.assign(payload.begin() + static_cast<std::ptrdiff_t>(off),
                  payload.begin() + static_cast<std::ptrdiff_t>(off + n));
    ch.send(migration::make_chunk(c));
  }
  ch.send(migration::make_complete(archive.checksum));

  auto verdict = ch.recv();
  if (!verdict) {
    result.reason = "connection lost awaiting Restored";
    return result;
  }
  if (verdict->type == migration::MsgType::Restored) {
    result.committed = true;
    result.target_instance_id = migration::parse_restored(*verdict).instance_id;
    return result;
  }
  if (verdict->type == migration::MsgType::Abort) {
    result.reason = migration::parse_abort(*verdict).reason;
    return result;
  }
  result.reason =
      std::string("unexpected ") + migration::msg_type_name(verdict->type);
  return result;
}

}  // namespace

MigrationOutcome Node::migrate_instance(const std::string& instance_id,
                                        const std::string& target_node) {
  store::Archive archive;
  Peer peer;
  {
    std::lock_guard lock(mu_);
    if (target_node == node_id_)
      fail(Errc::Conflict, "cannot migrate to self");
    const Peer* p = config_.find_peer(target_node);
    if (!p) fail(Errc::TargetUnreachable, "unknown peer " + target_node);
    peer = *p;
    if (!channel_factory_)
      fail(Errc::TargetUnreachable, "no transfer route configured");

    Instance& inst = require_instance(instance_id);
    // Checkpoint first when needed; migration only ever moves archives.
    if (inst.state.kind == StateKind::Blocked ||
        inst.state.kind == StateKind::Paused) {
      checkpoint_locked(inst, std::nullopt, nullptr);
    }
    if (inst.state.kind != StateKind::Checkpointed)
      fail(Errc::IllegalTransition,
           "migrate from " + inst.state.str());

    archive = store_.read_archive(inst.state.archive_id);
    journal("start", instance_id, archive.archive_id, target_node);
    apply_transition(inst, Event::MigrateStart, {}, nullptr);
    // The flow is unclaimed while the transfer runs; the rules travel in
    // the manifest and re-arm on whichever side ends up owning it.
    proxy_.unregister(instance_id);
  }

  ClientResult result;
  std::uint64_t wire_bytes = 0;
  try {
    auto handle = channel_factory_(peer);
    result = run_transfer_client(handle->channel(), archive, "migrate",
                                 config_.migration_chunk_size);
    handle->channel().close();
    wire_bytes = handle->wire_bytes();
  } catch (const Error& e) {
    result.committed = false;
    result.reason = e.what();
  }

  std::lock_guard lock(mu_);
  Instance& inst = require_instance(instance_id);
  MigrationOutcome out;
  out.wire_bytes = wire_bytes;
  if (result.committed) {
    journal("commit", instance_id, archive.archive_id, target_node);
    apply_transition(inst, Event::MigrateCommit, {}, nullptr);
    ++migrations_out_;
    out.committed = true;
    out.target_instance_id = result.target_instance_id;
    trace("migrate", instance_id,
          "committed -> " + target_node + "/" + result.target_instance_id);
  } else {
    journal("abort", instance_id, archive.archive_id, target_node);
    apply_transition(inst, Event::MigrateAbort, {}, nullptr);
    out.reason = result.reason;
    trace("migrate", instance_id, "aborted: " + result.reason);
    if (!inst.wake_rules.empty()) {
      proxy_.register_rules(instance_id, inst.wake_rules);
      if (auto wake = proxy_.confirm_suspended(instance_id, clock_))
        handle_wake(*wake);
    }
  }
  return out;
}

void Node::push_backup(const std::string& archive_id, const Peer& peer) {
  if (!channel_factory_)
    fail(Errc::TargetUnreachable, "no transfer route configured");
  store::Archive archive;
  {
    std::lock_guard lock(mu_);
    archive = store_.read_archive(archive_id);
  }
  auto handle = channel_factory_(peer);
  auto result = run_transfer_client(handle->channel(), archive, "backup",
                                    config_.migration_chunk_size);
  handle->channel().close();
  if (!result.committed)
    fail(Errc::TargetUnreachable, "backup push failed: " + result.reason);
}

void Node::serve_migration(migration::Channel& ch) {
  auto abort_with = [&](const std::string& reason) {
    try {
      ch.send(migration::make_abort({reason}));
    } catch (const Error&) {
    }
    ch.close();
  };

  std::optional<migration::Frame> first;
  try {
    first = ch.recv();
  } catch (const Error&) {
    ch.close();
    return;
  }
  if (!first) {
    ch.close();
    return;
  }

  migration::Offer offer;
  try {
    offer = migration::parse_offer(*first);
  } catch (const Error& e) {
    abort_with(std::string("protocol-error: ") + e.what());
    return;
  }

  // Validate the offer against the local registry and memory model.
  std::uint64_t incoming_charge = 0;
  {
    std::lock_guard lock(mu_);
    bool image_known = false;
    for (const auto& [fid, spec] : registry_.functions()) {
      if (spec.image_digest != offer.image_digest) continue;
      image_known = true;
      incoming_charge = std::max(
          incoming_charge, config_.memory.running_charge(spec.memory_declared));
    }
    if (!image_known) {
      try {
        ch.send(migration::make_reject_no_image());
      } catch (const Error&) {
      }
      ch.close();
      return;
    }
    if (offer.kind == "migrate" &&
        usage_locked() + incoming_charge > config_.memory.node_capacity) {
      try {
        ch.send(migration::make_reject_capacity());
      } catch (const Error&) {
      }
      ch.close();
      return;
    }
  }

  try {
    ch.send(migration::make_accept());
  } catch (const Error&) {
    ch.close();
    return;
  }

  // Receive the chunk stream; partial transfers leave nothing behind.
  Bytes payload;
  payload.reserve(offer.payload_size);
  store::Digest declared{};
  bool complete = false;
  while (!complete) {
    std::optional<migration::Frame> f;
    try {
      f = ch.recv();
    } catch (const Error& e) {
      abort_with(std::string("protocol-error: ") + e.what());
      return;
    }
    if (!f) {
      ch.close();  // connection died mid-stream
      return;
    }
    if (f->type == migration::MsgType::Chunk) {
      migration::Chunk c;
      try {
        c = migration::parse_chunk(*f);
      } catch (const Error& e) {
        abort_with(std::string("protocol-error: ") + e.what());
        return;
      }
      if (c.offset != payload.size() ||
          payload.size() + c.data.size() > offer.payload_size) {
        abort_with("protocol-error: chunk offsets not contiguous");
        return;
      }
      payload.insert(payload.end(), c.data.begin(), c.data.end());
    } else if (f->type == migration::MsgType::Complete) {
      try {
        declared = migration::parse_complete(*f);
      } catch (const Error& e) {
        abort_with(std::string("protocol-error: ") + e.what());
        return;
      }
      complete = true;
    } else {
      abort_with(std::string("protocol-error: unexpected ") +
                 migration::msg_type_name(f->type));
      return;
    }
  }

  if (payload.size() != offer.payload_size) {
    abort_with("protocol-error: short payload");
    return;
  }

  std::string manifest_bytes;
  Bytes blob;
  try {
    std::tie(manifest_bytes, blob) = migration::decode_archive_payload(payload);
  } catch (const Error& e) {
    abort_with(std::string("protocol-error: ") + e.what());
    return;
  }
  const store::Digest computed = store::sha256(
      {reinterpret_cast<const std::uint8_t*>(manifest_bytes.data()),
       manifest_bytes.size()},
      blob);
  if (computed != declared || store::hex(computed) != offer.archive_id) {
    abort_with("checksum-mismatch");
    return;
  }

  store::Manifest manifest;
  try {
    manifest = store::Manifest::from_json(nlohmann::json::parse(manifest_bytes));
  } catch (const std::exception& e) {
    abort_with(std::string("bad-manifest: ") + e.what());
    return;
  }

  std::string new_instance_id;
  bool pre_existing = false;
  {
    std::lock_guard lock(mu_);
    const auto* spec = registry_.find_function(manifest.function_id);
    if (!spec || spec->image_digest != manifest.image_digest) {
      abort_with("no-image: function " + manifest.function_id +
                 " not deployable here");
      return;
    }
    pre_existing = store_.contains(offer.archive_id);
    try {
      store_.write_archive(manifest, blob);
    } catch (const Error& e) {
      abort_with(std::string("store-failure: ") + e.what());
      return;
    }

    if (offer.kind == "migrate") {
      for (const auto& [id, other] : instances_) {
        if (other.function_id == spec->function_id && !other.state.absorbing()) {
          if (!pre_existing) store_.remove(offer.archive_id);
          abort_with("instance-conflict: " + id + " is live");
          return;
        }
      }
      Instance inst = make_instance(*spec);
      inst.state = InstanceState::checkpointed(offer.archive_id);
      inst.suspended_reason = reason_from_rules(manifest.wake_rules);
      inst.wake_rules = manifest.wake_rules;
      auto [it, ok] = instances_.emplace(inst.instance_id, std::move(inst));
      Instance& stored = it->second;
      new_instance_id = stored.instance_id;
      trace("migrate-in", new_instance_id, offer.archive_id);

      store::Archive archive;
      archive.archive_id = offer.archive_id;
      archive.manifest = manifest;
      archive.state_blob = blob;
      archive.checksum = computed;
      try {
        restore_locked(stored, archive, nullptr);
        if (stored.state.kind == StateKind::Running)
          run_and_settle(stored, nullptr);
      } catch (const Error& e) {
        proxy_.unregister(new_instance_id);
        instances_.erase(new_instance_id);
        if (!pre_existing) store_.remove(offer.archive_id);
        abort_with(std::string("restore-failure: ") + e.what());
        return;
      }
      ++migrations_in_;
    }
  }

  try {
    ch.send(migration::make_restored({new_instance_id}));
    ch.close();
  } catch (const Error&) {
    // Restored never reached the source: the source will keep the
    // instance, so undo the local restore to preserve one-owner.
    std::lock_guard lock(mu_);
    if (!new_instance_id.empty()) {
      proxy_.unregister(new_instance_id);
      instances_.erase(new_instance_id);
      --migrations_in_;
      trace("migrate-in", new_instance_id, "rolled back");
    }
    if (!pre_existing) store_.remove(offer.archive_id);
    ch.close();
  }
}

}  // namespace edgefaas::gateway
