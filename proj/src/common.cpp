#include "edgefaas/common.hpp"

namespace edgefaas {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::UnknownInstance: return "UnknownInstance";
    case Errc::UnknownSocket: return "UnknownSocket";
    case Errc::InvalidSocket: return "InvalidSocket";
    case Errc::StepLimitExceeded: return "StepLimitExceeded";
    case Errc::CorruptSnapshot: return "CorruptSnapshot";
    case Errc::NotFound: return "NotFound";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::StorageFull: return "StorageFull";
    case Errc::IoFailure: return "IoFailure";
    case Errc::EmptyRules: return "EmptyRules";
    case Errc::ConflictingRule: return "ConflictingRule";
    case Errc::RouteNotFound: return "RouteNotFound";
    case Errc::InstanceBusy: return "InstanceBusy";
    case Errc::Conflict: return "Conflict";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::RejectNoImage: return "RejectNoImage";
    case Errc::RejectCapacity: return "RejectCapacity";
    case Errc::TransferChecksumMismatch: return "TransferChecksumMismatch";
    case Errc::TargetUnreachable: return "TargetUnreachable";
    case Errc::Timeout: return "Timeout";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::ExpectationFailed: return "ExpectationFailed";
    case Errc::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

Addr Addr::parse(const std::string& s) {
  auto pos = s.rfind(':');
  if (pos == std::string::npos || pos == 0 || pos + 1 >= s.size())
    fail(Errc::ConfigError, "bad address '" + s + "', expected host:port");
  Addr a;
  a.host = s.substr(0, pos);
  int port = 0;
  try {
    port = std::stoi(s.substr(pos + 1));
  } catch (const std::exception&) {
    fail(Errc::ConfigError, "bad port in address '" + s + "'");
  }
  if (port < 0 || port > 65535)
    fail(Errc::ConfigError, "port out of range in '" + s + "'");
  a.port = static_cast<std::uint16_t>(port);
  return a;
}

}  // namespace edgefaas
