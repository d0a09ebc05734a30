#include "edgefaas/sim/snapshot.hpp"

#include <bit>
#include <cstring>

namespace edgefaas::sim {

namespace {

constexpr char kMagic[4] = {'E', 'F', 'S', 'N'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void bytes(const Bytes& b) {
    u32(static_cast<std::uint32_t>(b.size()));
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  Bytes take() { return std::move(buf_); }

 private:
  void raw(const void* p, size_t n) {
    // little-endian hosts only; static_assert guards the assumption
    static_assert(std::endian::native == std::endian::little);
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  Bytes buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() { return read_le<std::uint16_t>(); }
  std::uint32_t u32() { return read_le<std::uint32_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(read_le<std::uint64_t>()); }
  std::uint64_t u64() { return read_le<std::uint64_t>(); }
  Bytes bytes() {
    auto n = u32();
    auto s = take(n);
    return Bytes(s.begin(), s.end());
  }
  std::string str() {
    auto n = u32();
    auto s = take(n);
    return std::string(s.begin(), s.end());
  }
  bool done() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }
  Reader sub(size_t n) {
    auto s = take(n);
    return Reader(s);
  }

 private:
  template <typename T>
  T read_le() {
    auto s = take(sizeof(T));
    T v;
    std::memcpy(&v, s.data(), sizeof(T));
    static_assert(std::endian::native == std::endian::little);
    return v;
  }
  std::span<const std::uint8_t> take(size_t n) {
    if (pos_ + n > data_.size())
      fail(Errc::CorruptSnapshot, "snapshot truncated");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> data_;
  size_t pos_ = 0;
};

Bytes section(Writer w) {
  Bytes body = w.take();
  Writer out;
  out.u32(static_cast<std::uint32_t>(body.size()));
  Bytes head = out.take();
  head.insert(head.end(), body.begin(), body.end());
  return head;
}

void append(Bytes& dst, const Bytes& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

Bytes snapshot(const SimState& state) {
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kSnapshotVersion);

  {  // pc
    Writer w;
    w.u32(state.pc);
    append(out, section(std::move(w)));
  }
  {  // vars, sorted by name (std::map iterates sorted)
    Writer w;
    w.u32(static_cast<std::uint32_t>(state.vars.size()));
    for (const auto& [name, value] : state.vars) {
      w.str(name);
      w.i64(value);
    }
    append(out, section(std::move(w)));
  }
  {  // sockets, sorted by id, with full buffers and logs
    Writer w;
    w.u32(static_cast<std::uint32_t>(state.sockets.size()));
    for (const auto& [id, sock] : state.sockets) {
      w.str(id);
      w.str(sock.local.host);
      w.u16(sock.local.port);
      w.str(sock.remote.host);
      w.u16(sock.remote.port);
      w.u8(static_cast<std::uint8_t>(sock.status));
      w.u32(static_cast<std::uint32_t>(sock.recv_buffer.size()));
      for (const Bytes& msg : sock.recv_buffer) w.bytes(msg);
      w.bytes(sock.sent_log);
      w.bytes(sock.recv_log);
    }
    append(out, section(std::move(w)));
  }
  {  // clock
    Writer w;
    w.i64(state.clock_at_snapshot.us);
    append(out, section(std::move(w)));
  }
  {  // seed
    Writer w;
    w.u64(state.rng_seed);
    append(out, section(std::move(w)));
  }
  return out;
}

SimState resume(std::span<const std::uint8_t> blob) {
  Reader r(blob);
  if (r.remaining() < 5) fail(Errc::CorruptSnapshot, "snapshot too short");
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(Errc::CorruptSnapshot, "bad magic");
  const auto version = r.u8();
  if (version != kSnapshotVersion)
    fail(Errc::CorruptSnapshot,
         "unknown snapshot version " + std::to_string(version));

  SimState st;
  {
    Reader s = r.sub(r.u32());
    st.pc = s.u32();
    if (!s.done()) fail(Errc::CorruptSnapshot, "pc section trailing bytes");
  }
  {
    Reader s = r.sub(r.u32());
    const auto count = s.u32();
    std::string prev;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = s.str();
      if (i > 0 && name <= prev)
        fail(Errc::CorruptSnapshot, "vars not strictly sorted");
      std::int64_t value = s.i64();
      st.vars.emplace(name, value);
      prev = std::move(name);
    }
    if (!s.done()) fail(Errc::CorruptSnapshot, "vars section trailing bytes");
  }
  {
    Reader s = r.sub(r.u32());
    const auto count = s.u32();
    std::string prev;
    for (std::uint32_t i = 0; i < count; ++i) {
      SocketState sock;
      sock.id = s.str();
      if (i > 0 && sock.id <= prev)
        fail(Errc::CorruptSnapshot, "sockets not strictly sorted");
      prev = sock.id;
      sock.local.host = s.str();
      sock.local.port = s.u16();
      sock.remote.host = s.str();
      sock.remote.port = s.u16();
      const auto status = s.u8();
      if (status != 1 && status != 2)
        fail(Errc::CorruptSnapshot, "bad socket status");
      sock.status = static_cast<SocketStatus>(status);
      const auto msgs = s.u32();
      for (std::uint32_t m = 0; m < msgs; ++m)
        sock.recv_buffer.push_back(s.bytes());
      sock.sent_log = s.bytes();
      sock.recv_log = s.bytes();
      st.sockets.emplace(sock.id, std::move(sock));
    }
    if (!s.done()) fail(Errc::CorruptSnapshot, "sockets section trailing bytes");
  }
  {
    Reader s = r.sub(r.u32());
    st.clock_at_snapshot = SimTime::from_us(s.i64());
    if (!s.done()) fail(Errc::CorruptSnapshot, "clock section trailing bytes");
  }
  {
    Reader s = r.sub(r.u32());
    st.rng_seed = s.u64();
    if (!s.done()) fail(Errc::CorruptSnapshot, "seed section trailing bytes");
  }
  if (!r.done()) fail(Errc::CorruptSnapshot, "trailing bytes after sections");
  return st;
}

}  // namespace edgefaas::sim
