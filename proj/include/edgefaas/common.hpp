#pragma once

#include <cstdint>
#include <compare>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgefaas {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

// Simulated time. Functions never read wall time; the owner of the node
// (harness, admin API or the wall-clock ticker) advances it. Microsecond
// ticks keep snapshot encoding fixed-width and comparisons exact.
struct SimTime {
  std::int64_t us = 0;

  static constexpr SimTime from_us(std::int64_t v) { return SimTime{v}; }
  static constexpr SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
  }
  double seconds() const { return static_cast<double>(us) / 1e6; }

  constexpr auto operator<=>(const SimTime&) const = default;
  constexpr SimTime operator+(SimTime o) const { return SimTime{us + o.us}; }
  constexpr SimTime operator-(SimTime o) const { return SimTime{us - o.us}; }
  SimTime& operator+=(SimTime o) {
    us += o.us;
    return *this;
  }
};

// Logical network address used by the simulated sockets and packets.
struct Addr {
  std::string host;
  std::uint16_t port = 0;

  auto operator<=>(const Addr&) const = default;

  std::string str() const { return host + ":" + std::to_string(port); }

  // Parses "host:port". Throws on malformed input.
  static Addr parse(const std::string& s);
};

enum class Errc {
  IllegalTransition,
  UnknownInstance,
  UnknownSocket,
  InvalidSocket,
  StepLimitExceeded,
  CorruptSnapshot,
  NotFound,
  ChecksumMismatch,
  StorageFull,
  IoFailure,
  EmptyRules,
  ConflictingRule,
  RouteNotFound,
  InstanceBusy,
  Conflict,
  InsufficientCandidates,
  RejectNoImage,
  RejectCapacity,
  TransferChecksumMismatch,
  TargetUnreachable,
  Timeout,
  ProtocolError,
  ExpectationFailed,
  ConfigError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace edgefaas
