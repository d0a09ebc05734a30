#include "edgefaas/harness/oracle.hpp"

namespace edgefaas::harness {

namespace {

// Deliberately re-implemented: the oracle must not share rendering code
// with the interpreter it checks.
Bytes oracle_render(const std::string& tmpl, const sim::SimState& st) {
  Bytes out;
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '$' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      const size_t end = tmpl.find('}', i + 2);
      if (end == std::string::npos) {
        out.push_back(static_cast<std::uint8_t>(tmpl[i++]));
        continue;
      }
      const std::string ref = tmpl.substr(i + 2, end - i - 2);
      std::string text;
      if (ref.rfind("var:", 0) == 0) {
        auto it = st.vars.find(ref.substr(4));
        text = std::to_string(it == st.vars.end() ? 0 : it->second);
      } else if (ref.rfind("recv:", 0) == 0) {
        auto it = st.sockets.find(ref.substr(5));
        if (it != st.sockets.end())
          text.assign(it->second.recv_log.begin(), it->second.recv_log.end());
      } else {
        text = "${" + ref + "}";
      }
      out.insert(out.end(), text.begin(), text.end());
      i = end + 1;
    } else {
      out.push_back(static_cast<std::uint8_t>(tmpl[i++]));
    }
  }
  return out;
}

}  // namespace

OracleOutcome oracle_uninterrupted(const sim::Program& program,
                                   DeliverySchedule deliveries,
                                   SimTime start_clock,
                                   const sim::PortAllocator& alloc_port) {
  OracleOutcome out;
  sim::SimState& st = out.state;
  st.clock_at_snapshot = start_clock;
  SimTime clock = start_clock;

  while (st.pc < program.size()) {
    const sim::Step& step = program[st.pc];
    switch (step.op) {
      case sim::StepOp::Compute:
        ++st.pc;
        break;

      case sim::StepOp::Sleep:
        clock += step.duration;  // uninterrupted: the wait simply elapses
        ++st.pc;
        break;

      case sim::StepOp::Open: {
        sim::SocketState sock;
        sock.id = step.socket;
        sock.local = alloc_port();
        sock.remote = step.peer;
        st.sockets.emplace(step.socket, std::move(sock));
        ++st.pc;
        break;
      }

      case sim::StepOp::Send: {
        auto& sock = st.sockets.at(step.socket);
        sock.sent_log.insert(sock.sent_log.end(), step.payload.begin(),
                             step.payload.end());
        ++st.pc;
        break;
      }

      case sim::StepOp::Recv: {
        auto& sock = st.sockets.at(step.socket);
        if (sock.recv_buffer.empty()) {
          auto& pending = deliveries[step.socket];
          if (pending.empty()) {
            out.completed = false;  // would block forever
            st.clock_at_snapshot = clock;
            return out;
          }
          sock.recv_buffer.push_back(std::move(pending.front()));
          pending.pop_front();
        }
        Bytes payload = std::move(sock.recv_buffer.front());
        sock.recv_buffer.pop_front();
        sock.recv_log.insert(sock.recv_log.end(), payload.begin(),
                             payload.end());
        ++st.pc;
        break;
      }

      case sim::StepOp::IncrCounter:
        ++st.vars[step.var];
        ++st.pc;
        break;

      case sim::StepOp::Respond:
        out.responses.push_back(oracle_render(step.tmpl, st));
        ++st.pc;
        break;

      case sim::StepOp::Close: {
        auto& sock = st.sockets.at(step.socket);
        sock.status = sim::SocketStatus::Closed;
        sock.recv_buffer.clear();
        ++st.pc;
        break;
      }
    }
  }
  out.completed = true;
  st.clock_at_snapshot = clock;
  return out;
}

}  // namespace edgefaas::harness
