#include "edgefaas/sim/interpreter.hpp"

namespace edgefaas::sim {

std::string BlockReason::str() const {
  if (kind == Kind::Sleep)
    return "Sleep(wake_at=" + std::to_string(wake_at.seconds()) + ")";
  return "NetRecv(" + socket_id + ")";
}

namespace {

SocketState& open_socket(SimState& st, const std::string& id) {
  auto it = st.sockets.find(id);
  if (it == st.sockets.end())
    fail(Errc::InvalidSocket, "socket '" + id + "' does not exist");
  if (it->second.status != SocketStatus::Open)
    fail(Errc::InvalidSocket, "socket '" + id + "' is closed");
  return it->second;
}

}  // namespace

Bytes render_template(const std::string& tmpl, const SimState& state) {
  Bytes out;
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '$' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      size_t end = tmpl.find('}', i + 2);
      if (end == std::string::npos) {
        out.push_back(static_cast<std::uint8_t>(tmpl[i++]));
        continue;
      }
      std::string ref = tmpl.substr(i + 2, end - i - 2);
      if (ref.rfind("var:", 0) == 0) {
        auto it = state.vars.find(ref.substr(4));
        std::string v = std::to_string(it == state.vars.end() ? 0 : it->second);
        out.insert(out.end(), v.begin(), v.end());
      } else if (ref.rfind("recv:", 0) == 0) {
        auto it = state.sockets.find(ref.substr(5));
        if (it != state.sockets.end())
          out.insert(out.end(), it->second.recv_log.begin(),
                     it->second.recv_log.end());
      } else {
        // unknown placeholder: keep literally
        std::string lit = "${" + ref + "}";
        out.insert(out.end(), lit.begin(), lit.end());
      }
      i = end + 1;
    } else {
      out.push_back(static_cast<std::uint8_t>(tmpl[i++]));
    }
  }
  return out;
}

RunResult run_until_block(SimState state, const Program& program, SimTime clock,
                          const PortAllocator& alloc_port,
                          const RunLimits& limits) {
  RunResult res;
  state.clock_at_snapshot = clock;
  while (state.pc < program.size()) {
    if (++res.ticks > limits.max_ticks)
      fail(Errc::StepLimitExceeded,
           "run exceeded " + std::to_string(limits.max_ticks) + " ticks");
    const Step& step = program[state.pc];
    switch (step.op) {
      case StepOp::Compute:
        res.ticks += step.units;
        if (res.ticks > limits.max_ticks)
          fail(Errc::StepLimitExceeded,
               "run exceeded " + std::to_string(limits.max_ticks) + " ticks");
        ++state.pc;
        break;

      case StepOp::Sleep: {
        // pc moves past the step now; the deadline travels in the block
        // reason (and from there into wake rules and the manifest).
        ++state.pc;
        if (step.duration.us > 0) {
          res.state = std::move(state);
          res.outcome = RunOutcome::Blocked;
          res.reason = BlockReason::sleep_until(clock + step.duration);
          return res;
        }
        break;
      }

      case StepOp::Open: {
        if (state.sockets.count(step.socket))
          fail(Errc::InvalidSocket, "socket '" + step.socket + "' already open");
        SocketState sock;
        sock.id = step.socket;
        sock.local = alloc_port();
        sock.remote = step.peer;
        sock.status = SocketStatus::Open;
        state.sockets.emplace(step.socket, std::move(sock));
        ++state.pc;
        break;
      }

      case StepOp::Send: {
        SocketState& sock = open_socket(state, step.socket);
        sock.sent_log.insert(sock.sent_log.end(), step.payload.begin(),
                             step.payload.end());
        ++state.pc;
        break;
      }

      case StepOp::Recv: {
        SocketState& sock = open_socket(state, step.socket);
        if (sock.recv_buffer.empty()) {
          res.state = std::move(state);
          res.outcome = RunOutcome::Blocked;
          res.reason = BlockReason::net_recv(step.socket);
          return res;
        }
        Bytes payload = std::move(sock.recv_buffer.front());
        sock.recv_buffer.pop_front();
        sock.recv_log.insert(sock.recv_log.end(), payload.begin(),
                             payload.end());
        ++state.pc;
        break;
      }

      case StepOp::IncrCounter:
        ++state.vars[step.var];
        ++state.pc;
        break;

      case StepOp::Respond:
        res.responses.push_back(render_template(step.tmpl, state));
        ++state.pc;
        break;

      case StepOp::Close: {
        SocketState& sock = open_socket(state, step.socket);
        sock.status = SocketStatus::Closed;
        sock.recv_buffer.clear();
        ++state.pc;
        break;
      }
    }
  }
  res.state = std::move(state);
  res.outcome = RunOutcome::Completed;
  return res;
}

void deliver(SimState& state, const std::string& socket_id, Bytes payload) {
  auto it = state.sockets.find(socket_id);
  if (it == state.sockets.end())
    fail(Errc::InvalidSocket, "deliver to unknown socket '" + socket_id + "'");
  if (it->second.status != SocketStatus::Open)
    fail(Errc::InvalidSocket, "deliver to closed socket '" + socket_id + "'");
  it->second.recv_buffer.push_back(std::move(payload));
}

bool still_blocked(const BlockReason& reason, const SimState& state,
                   SimTime now) {
  switch (reason.kind) {
    case BlockReason::Kind::Sleep:
      return now < reason.wake_at;
    case BlockReason::Kind::NetRecv: {
      auto it = state.sockets.find(reason.socket_id);
      if (it == state.sockets.end()) return false;
      return it->second.recv_buffer.empty();
    }
  }
  return false;
}

}  // namespace edgefaas::sim
