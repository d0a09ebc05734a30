#include "edgefaas/sim/program.hpp"

#include <set>

namespace edgefaas::sim {

Step Step::compute(std::int64_t units) {
  Step s;
  s.op = StepOp::Compute;
  s.units = units;
  return s;
}

Step Step::sleep(SimTime d) {
  Step s;
  s.op = StepOp::Sleep;
  s.duration = d;
  return s;
}

Step Step::open(std::string socket, Addr peer) {
  Step s;
  s.op = StepOp::Open;
  s.socket = std::move(socket);
  s.peer = std::move(peer);
  return s;
}

Step Step::send(std::string socket, Bytes payload) {
  Step s;
  s.op = StepOp::Send;
  s.socket = std::move(socket);
  s.payload = std::move(payload);
  return s;
}

Step Step::recv(std::string socket) {
  Step s;
  s.op = StepOp::Recv;
  s.socket = std::move(socket);
  return s;
}

Step Step::incr(std::string var) {
  Step s;
  s.op = StepOp::IncrCounter;
  s.var = std::move(var);
  return s;
}

Step Step::respond(std::string tmpl) {
  Step s;
  s.op = StepOp::Respond;
  s.tmpl = std::move(tmpl);
  return s;
}

Step Step::close(std::string socket) {
  Step s;
  s.op = StepOp::Close;
  s.socket = std::move(socket);
  return s;
}

void validate_program(const Program& p) {
  std::set<std::string> open_handles;
  std::set<std::string> closed_handles;
  for (size_t i = 0; i < p.size(); ++i) {
    const Step& s = p[i];
    auto where = [&] { return "step " + std::to_string(i); };
    switch (s.op) {
      case StepOp::Compute:
        if (s.units <= 0)
          fail(Errc::ConfigError, where() + ": compute units must be > 0");
        break;
      case StepOp::Sleep:
        if (s.duration.us < 0)
          fail(Errc::ConfigError, where() + ": negative sleep");
        break;
      case StepOp::Open:
        if (s.socket.empty())
          fail(Errc::ConfigError, where() + ": open needs a socket handle");
        if (open_handles.count(s.socket) || closed_handles.count(s.socket))
          fail(Errc::ConfigError,
               where() + ": socket handle '" + s.socket + "' reused");
        open_handles.insert(s.socket);
        break;
      case StepOp::Send:
      case StepOp::Recv:
        if (!open_handles.count(s.socket))
          fail(Errc::ConfigError, where() + ": socket '" + s.socket +
                                      "' not open at this point");
        break;
      case StepOp::Close:
        if (!open_handles.count(s.socket))
          fail(Errc::ConfigError, where() + ": socket '" + s.socket +
                                      "' not open at this point");
        open_handles.erase(s.socket);
        closed_handles.insert(s.socket);
        break;
      case StepOp::IncrCounter:
        if (s.var.empty())
          fail(Errc::ConfigError, where() + ": incr_counter needs a var name");
        break;
      case StepOp::Respond:
        break;
    }
  }
}

Program program_from_json(const nlohmann::json& j) {
  if (!j.is_array()) fail(Errc::ConfigError, "program must be a JSON array");
  Program p;
  for (const auto& e : j) {
    const std::string op = e.at("op").get<std::string>();
    if (op == "compute") {
      p.push_back(Step::compute(e.at("units").get<std::int64_t>()));
    } else if (op == "sleep") {
      p.push_back(Step::sleep(SimTime::from_seconds(e.at("seconds").get<double>())));
    } else if (op == "open") {
      p.push_back(Step::open(e.at("socket").get<std::string>(),
                             Addr::parse(e.at("peer").get<std::string>())));
    } else if (op == "send") {
      p.push_back(Step::send(e.at("socket").get<std::string>(),
                             to_bytes(e.at("payload").get<std::string>())));
    } else if (op == "recv") {
      p.push_back(Step::recv(e.at("socket").get<std::string>()));
    } else if (op == "incr_counter") {
      p.push_back(Step::incr(e.at("var").get<std::string>()));
    } else if (op == "respond") {
      p.push_back(Step::respond(e.at("template").get<std::string>()));
    } else if (op == "close") {
      p.push_back(Step::close(e.at("socket").get<std::string>()));
    } else {
      fail(Errc::ConfigError, "unknown program op '" + op + "'");
    }
  }
  validate_program(p);
  return p;
}

nlohmann::json program_to_json(const Program& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Step& s : p) {
    nlohmann::json e;
    switch (s.op) {
      case StepOp::Compute:
        e = {{"op", "compute"}, {"units", s.units}};
        break;
      case StepOp::Sleep:
        e = {{"op", "sleep"}, {"seconds", s.duration.seconds()}};
        break;
      case StepOp::Open:
        e = {{"op", "open"}, {"socket", s.socket}, {"peer", s.peer.str()}};
        break;
      case StepOp::Send:
        e = {{"op", "send"}, {"socket", s.socket}, {"payload", to_string(s.payload)}};
        break;
      case StepOp::Recv:
        e = {{"op", "recv"}, {"socket", s.socket}};
        break;
      case StepOp::IncrCounter:
        e = {{"op", "incr_counter"}, {"var", s.var}};
        break;
      case StepOp::Respond:
        e = {{"op", "respond"}, {"template", s.tmpl}};
        break;
      case StepOp::Close:
        e = {{"op", "close"}, {"socket", s.socket}};
        break;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

}  // namespace edgefaas::sim
