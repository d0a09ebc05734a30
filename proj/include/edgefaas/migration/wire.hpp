#pragma once

#include <functional>
#include <memory>
#include <optional>

#include <json.hpp>

#include "edgefaas/common.hpp"
#include "edgefaas/store/digest.hpp"

namespace edgefaas::migration {

// Frame: 1-byte type tag, 4-byte big-endian payload length, payload.
enum class MsgType : std::uint8_t {
  Offer = 1,
  Accept = 2,
  RejectNoImage = 3,
  RejectCapacity = 4,
  Chunk = 5,
  Complete = 6,
  Restored = 7,
  Abort = 8,
};

const char* msg_type_name(MsgType t);

struct Frame {
  MsgType type = MsgType::Abort;
  Bytes payload;
};

inline constexpr std::size_t kMaxFrame = 64u << 20;

Bytes encode_frame(const Frame& f);

// Reads one frame through `read_exact(dst, n)`, which must fill dst with
// exactly n bytes or return false (EOF/error).
using ReadExact = std::function<bool(std::uint8_t*, std::size_t)>;
std::optional<Frame> decode_frame(const ReadExact& read_exact);

// Typed payloads. Offer/Restored/Abort carry canonical JSON; Chunk is a
// u64 big-endian offset followed by raw bytes; Complete is the 32-byte
// digest; Accept and the Rejects are empty.
struct Offer {
  std::string archive_id;
  std::string image_digest;
  std::uint64_t payload_size = 0;
  std::string kind = "migrate";  // "migrate" | "backup"
};

struct Chunk {
  std::uint64_t offset = 0;
  Bytes data;
};

struct Restored {
  std::string instance_id;
};

struct Abort {
  std::string reason;
};

Frame make_offer(const Offer& o);
Frame make_accept();
Frame make_reject_no_image();
Frame make_reject_capacity();
Frame make_chunk(const Chunk& c);
Frame make_complete(const store::Digest& checksum);
Frame make_restored(const Restored& r);
Frame make_abort(const Abort& a);

Offer parse_offer(const Frame& f);
Chunk parse_chunk(const Frame& f);
store::Digest parse_complete(const Frame& f);
Restored parse_restored(const Frame& f);
Abort parse_abort(const Frame& f);

// The archive payload streamed in chunks: [u32 LE manifest length]
// [canonical manifest JSON] [state blob].
Bytes encode_archive_payload(const std::string& canonical_manifest,
                             const Bytes& blob);
std::pair<std::string, Bytes> decode_archive_payload(const Bytes& payload);

}  // namespace edgefaas::migration
