#include "edgefaas/migration/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace edgefaas::migration {

// ---------------------------------------------------------------------------
// MemoryConduit

struct MemoryConduit::Shared {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> to_a;
  std::deque<Frame> to_b;
  bool killed = false;
  bool closed_a = false;
  bool closed_b = false;
  int kill_after_frames = -1;
  std::uint64_t frames = 0;
  std::uint64_t bytes = 0;
};

class MemoryConduit::End : public Channel {
 public:
  End(std::shared_ptr<Shared> s, bool is_a) : s_(std::move(s)), is_a_(is_a) {}

  void send(const Frame& f) override {
    std::unique_lock lock(s_->mu);
    if (s_->killed || (is_a_ ? s_->closed_b : s_->closed_a))
      fail(Errc::TargetUnreachable, "connection lost");
    if (s_->kill_after_frames >= 0 &&
        s_->frames >= static_cast<std::uint64_t>(s_->kill_after_frames)) {
      s_->killed = true;
      s_->cv.notify_all();
      fail(Errc::TargetUnreachable, "connection killed by fault injection");
    }
    ++s_->frames;
    s_->bytes += encode_frame(f).size();
    (is_a_ ? s_->to_b : s_->to_a).push_back(f);
    s_->cv.notify_all();
  }

  std::optional<Frame> recv() override {
    std::unique_lock lock(s_->mu);
    auto& queue = is_a_ ? s_->to_a : s_->to_b;
    s_->cv.wait(lock, [&] {
      return !queue.empty() || s_->killed ||
             (is_a_ ? s_->closed_b : s_->closed_a);
    });
    if (!queue.empty()) {
      Frame f = std::move(queue.front());
      queue.pop_front();
      return f;
    }
    return std::nullopt;  // killed or peer closed: EOF
  }

  void close() override {
    std::unique_lock lock(s_->mu);
    (is_a_ ? s_->closed_a : s_->closed_b) = true;
    s_->cv.notify_all();
  }

  std::uint64_t bytes_sent() const override {
    std::unique_lock lock(s_->mu);
    return s_->bytes;
  }

 private:
  std::shared_ptr<Shared> s_;
  bool is_a_;
};

MemoryConduit::MemoryConduit(int kill_after_frames)
    : shared_(std::make_shared<Shared>()) {
  shared_->kill_after_frames = kill_after_frames;
  a_ = std::make_unique<End>(shared_, true);
  b_ = std::make_unique<End>(shared_, false);
}

MemoryConduit::~MemoryConduit() = default;

Channel& MemoryConduit::a() { return *a_; }
Channel& MemoryConduit::b() { return *b_; }

std::uint64_t MemoryConduit::total_bytes() const {
  std::unique_lock lock(shared_->mu);
  return shared_->bytes;
}

std::uint64_t MemoryConduit::total_frames() const {
  std::unique_lock lock(shared_->mu);
  return shared_->frames;
}

// ---------------------------------------------------------------------------
// TcpChannel

namespace {

void set_timeout(int fd, int timeout_s) {
  timeval tv{};
  tv.tv_sec = timeout_s;
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

}  // namespace

TcpChannel::TcpChannel(int fd, int timeout_s) : fd_(fd) {
  int one = 1;
  setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  set_timeout(fd_, timeout_s);
}

TcpChannel::~TcpChannel() { close(); }

std::unique_ptr<TcpChannel> TcpChannel::connect(const Addr& addr,
                                                int timeout_s) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(addr.port);
  if (getaddrinfo(addr.host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    fail(Errc::TargetUnreachable, "cannot resolve " + addr.str());
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) fail(Errc::TargetUnreachable, "cannot connect to " + addr.str());
  return std::make_unique<TcpChannel>(fd, timeout_s);
}

void TcpChannel::send(const Frame& f) {
  const Bytes data = encode_frame(f);
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n =
        ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) fail(Errc::TargetUnreachable, "send failed");
    off += static_cast<std::size_t>(n);
  }
  bytes_sent_ += data.size();
}

std::optional<Frame> TcpChannel::recv() {
  auto read_exact = [this](std::uint8_t* dst, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
      const ssize_t r = ::recv(fd_, dst + off, n - off, 0);
      if (r <= 0) return false;
      off += static_cast<std::size_t>(r);
    }
    return true;
  };
  return decode_frame(read_exact);
}

void TcpChannel::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

// ---------------------------------------------------------------------------
// TcpListener

TcpListener::TcpListener(const Addr& bind_addr) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(Errc::IoFailure, "socket() failed");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(bind_addr.port);
  if (bind_addr.host.empty() || bind_addr.host == "0.0.0.0") {
    sa.sin_addr.s_addr = INADDR_ANY;
  } else if (inet_pton(AF_INET, bind_addr.host.c_str(), &sa.sin_addr) != 1) {
    sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  }
  if (bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    ::close(fd_);
    fail(Errc::IoFailure, "bind to " + bind_addr.str() + " failed");
  }
  if (listen(fd_, 16) != 0) {
    ::close(fd_);
    fail(Errc::IoFailure, "listen failed");
  }
  socklen_t len = sizeof(sa);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
}

TcpListener::~TcpListener() { shutdown(); }

std::unique_ptr<TcpChannel> TcpListener::accept(int timeout_s) {
  if (fd_ < 0) return nullptr;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return nullptr;
  return std::make_unique<TcpChannel>(fd, timeout_s);
}

void TcpListener::shutdown() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace edgefaas::migration
