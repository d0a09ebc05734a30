#include "edgefaas/migration/wire.hpp"

#include <cstring>

namespace edgefaas::migration {

const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Offer: return "Offer";
    case MsgType::Accept: return "Accept";
    case MsgType::RejectNoImage: return "RejectNoImage";
    case MsgType::RejectCapacity: return "RejectCapacity";
    case MsgType::Chunk: return "Chunk";
    case MsgType::Complete: return "Complete";
    case MsgType::Restored: return "Restored";
    case MsgType::Abort: return "Abort";
  }
  return "?";
}

Bytes encode_frame(const Frame& f) {
  Bytes out;
  out.reserve(5 + f.payload.size());
  out.push_back(static_cast<std::uint8_t>(f.type));
  const auto len = static_cast<std::uint32_t>(f.payload.size());
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

std::optional<Frame> decode_frame(const ReadExact& read_exact) {
  std::uint8_t head[5];
  if (!read_exact(head, 5)) return std::nullopt;
  const auto type = head[0];
  if (type < 1 || type > 8)
    fail(Errc::ProtocolError, "unknown frame type " + std::to_string(type));
  const std::uint32_t len = (std::uint32_t(head[1]) << 24) |
                            (std::uint32_t(head[2]) << 16) |
                            (std::uint32_t(head[3]) << 8) | std::uint32_t(head[4]);
  if (len > kMaxFrame)
    fail(Errc::ProtocolError, "frame too large: " + std::to_string(len));
  Frame f;
  f.type = static_cast<MsgType>(type);
  f.payload.resize(len);
  if (len > 0 && !read_exact(f.payload.data(), len))
    fail(Errc::ProtocolError, "frame truncated");
  return f;
}

namespace {

Frame json_frame(MsgType t, const nlohmann::json& j) {
  Frame f;
  f.type = t;
  const std::string s = j.dump();
  f.payload = to_bytes(s);
  return f;
}

nlohmann::json parse_json(const Frame& f, MsgType expected) {
  if (f.type != expected)
    fail(Errc::ProtocolError, std::string("expected ") + msg_type_name(expected) +
                                  ", got " + msg_type_name(f.type));
  try {
    return nlohmann::json::parse(to_string(f.payload));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ProtocolError, std::string("bad frame payload: ") + e.what());
  }
}

}  // namespace

Frame make_offer(const Offer& o) {
  return json_frame(MsgType::Offer, {{"archive_id", o.archive_id},
                                     {"image_digest", o.image_digest},
                                     {"payload_size", o.payload_size},
                                     {"kind", o.kind}});
}

Frame make_accept() { return Frame{MsgType::Accept, {}}; }
Frame make_reject_no_image() { return Frame{MsgType::RejectNoImage, {}}; }
Frame make_reject_capacity() { return Frame{MsgType::RejectCapacity, {}}; }

Frame make_chunk(const Chunk& c) {
  Frame f;
  f.type = MsgType::Chunk;
  f.payload.reserve(8 + c.data.size());
  for (int i = 7; i >= 0; --i)
    f.payload.push_back(static_cast<std::uint8_t>(c.offset >> (8 * i)));
  f.payload.insert(f.payload.end(), c.data.begin(), c.data.end());
  return f;
}

Frame make_complete(const store::Digest& checksum) {
  Frame f;
  f.type = MsgType::Complete;
  f.payload.assign(checksum.begin(), checksum.end());
  return f;
}

Frame make_restored(const Restored& r) {
  return json_frame(MsgType::Restored, {{"instance_id", r.instance_id}});
}

Frame make_abort(const Abort& a) {
  return json_frame(MsgType::Abort, {{"reason", a.reason}});
}

Offer parse_offer(const Frame& f) {
  const auto j = parse_json(f, MsgType::Offer);
  Offer o;
  o.archive_id = j.at("archive_id").get<std::string>();
  o.image_digest = j.at("image_digest").get<std::string>();
  o.payload_size = j.at("payload_size").get<std::uint64_t>();
  o.kind = j.at("kind").get<std::string>();
  if (o.kind != "migrate" && o.kind != "backup")
    fail(Errc::ProtocolError, "unknown offer kind '" + o.kind + "'");
  return o;
}

Chunk parse_chunk(const Frame& f) {
  if (f.type != MsgType::Chunk) fail(Errc::ProtocolError, "expected Chunk");
  if (f.payload.size() < 8) fail(Errc::ProtocolError, "chunk too short");
  Chunk c;
  for (int i = 0; i < 8; ++i) c.offset = (c.offset << 8) | f.payload[i];
  c.data.assign(f.payload.begin() + 8, f.payload.end());
  return c;
}

store::Digest parse_complete(const Frame& f) {
  if (f.type != MsgType::Complete)
    fail(Errc::ProtocolError, "expected Complete");
  if (f.payload.size() != 32)
    fail(Errc::ProtocolError, "complete checksum must be 32 bytes");
  store::Digest d{};
  std::memcpy(d.data(), f.payload.data(), 32);
  return d;
}

Restored parse_restored(const Frame& f) {
  const auto j = parse_json(f, MsgType::Restored);
  return Restored{j.at("instance_id").get<std::string>()};
}

Abort parse_abort(const Frame& f) {
  const auto j = parse_json(f, MsgType::Abort);
  return Abort{j.at("reason").get<std::string>()};
}

Bytes encode_archive_payload(const std::string& canonical_manifest,
                             const Bytes& blob) {
  Bytes out;
  const auto len = static_cast<std::uint32_t>(canonical_manifest.size());
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.insert(out.end(), canonical_manifest.begin(), canonical_manifest.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

std::pair<std::string, Bytes> decode_archive_payload(const Bytes& payload) {
  if (payload.size() < 4)
    fail(Errc::ProtocolError, "archive payload too short");
  const std::uint32_t len = std::uint32_t(payload[0]) |
                            (std::uint32_t(payload[1]) << 8) |
                            (std::uint32_t(payload[2]) << 16) |
                            (std::uint32_t(payload[3]) << 24);
  if (4 + std::size_t(len) > payload.size())
    fail(Errc::ProtocolError, "archive payload manifest overruns");
  std::string manifest(payload.begin() + 4, payload.begin() + 4 + len);
  Bytes blob(payload.begin() + 4 + len, payload.end());
  return {std::move(manifest), std::move(blob)};
}

}  // namespace edgefaas::migration
