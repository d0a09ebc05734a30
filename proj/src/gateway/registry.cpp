#include "edgefaas/gateway/registry.hpp"

namespace edgefaas::gateway {

using lifecycle::FunctionSpec;

lifecycle::FunctionSpec function_spec_from_json(const nlohmann::json& j) {
  FunctionSpec spec;
  spec.function_id = j.at("function_id").get<std::string>();
  spec.route = j.at("route").get<std::string>();
  spec.image_digest = j.at("image_digest").get<std::string>();
  spec.image_size = j.at("image_size").get<std::uint64_t>();
  spec.memory_declared = j.at("memory_declared").get<std::uint64_t>();
  if (j.contains("idle_timeout")) {
    spec.idle_timeout = SimTime::from_seconds(j["idle_timeout"].get<double>());
    spec.use_default_idle_timeout = false;
    if (spec.idle_timeout.us < 0)
      fail(Errc::ConfigError, spec.function_id + ": idle_timeout must be >= 0");
  }
  spec.program = sim::program_from_json(j.at("program"));
  if (j.contains("reentrant")) spec.reentrant = j["reentrant"].get<bool>();
  if (j.contains("on_block")) {
    const std::string v = j["on_block"].get<std::string>();
    if (v == "stay") spec.on_block = FunctionSpec::OnBlock::Stay;
    else if (v == "pause") spec.on_block = FunctionSpec::OnBlock::Pause;
    else if (v == "checkpoint") spec.on_block = FunctionSpec::OnBlock::Checkpoint;
    else fail(Errc::ConfigError, spec.function_id + ": bad on_block '" + v + "'");
  }
  if (spec.function_id.empty() || spec.route.empty())
    fail(Errc::ConfigError, "function_id and route are required");
  if (spec.image_size == 0)
    fail(Errc::ConfigError, spec.function_id + ": image_size must be > 0");
  if (spec.memory_declared == 0)
    fail(Errc::ConfigError, spec.function_id + ": memory_declared must be > 0");
  return spec;
}

nlohmann::json function_spec_to_json(const FunctionSpec& spec) {
  nlohmann::json j = {{"function_id", spec.function_id},
                      {"route", spec.route},
                      {"image_digest", spec.image_digest},
                      {"image_size", spec.image_size},
                      {"memory_declared", spec.memory_declared},
                      {"reentrant", spec.reentrant},
                      {"program", sim::program_to_json(spec.program)}};
  if (!spec.use_default_idle_timeout)
    j["idle_timeout"] = spec.idle_timeout.seconds();
  switch (spec.on_block) {
    case FunctionSpec::OnBlock::Stay: j["on_block"] = "stay"; break;
    case FunctionSpec::OnBlock::Pause: j["on_block"] = "pause"; break;
    case FunctionSpec::OnBlock::Checkpoint: j["on_block"] = "checkpoint"; break;
    case FunctionSpec::OnBlock::Default: break;
  }
  return j;
}

void FunctionRegistry::load(const nlohmann::json& j) {
  if (loaded_) fail(Errc::Conflict, "registry already loaded");
  if (!j.is_array()) fail(Errc::ConfigError, "registry must be a JSON array");
  std::map<std::string, FunctionSpec> functions;
  std::map<std::string, std::string> routes;
  for (const auto& e : j) {
    FunctionSpec spec = function_spec_from_json(e);
    if (functions.count(spec.function_id))
      fail(Errc::ConfigError, "duplicate function_id " + spec.function_id);
    if (routes.count(spec.route))
      fail(Errc::ConfigError, "duplicate route " + spec.route);
    routes[spec.route] = spec.function_id;
    functions[spec.function_id] = std::move(spec);
  }
  functions_ = std::move(functions);
  routes_ = std::move(routes);
  loaded_ = true;
}

const FunctionSpec* FunctionRegistry::find_route(const std::string& route) const {
  auto it = routes_.find(route);
  if (it == routes_.end()) return nullptr;
  return &functions_.at(it->second);
}

const FunctionSpec& FunctionRegistry::function(
    const std::string& function_id) const {
  auto it = functions_.find(function_id);
  if (it == functions_.end())
    fail(Errc::NotFound, "unknown function " + function_id);
  return it->second;
}

const FunctionSpec* FunctionRegistry::find_function(
    const std::string& function_id) const {
  auto it = functions_.find(function_id);
  return it == functions_.end() ? nullptr : &it->second;
}

std::set<std::string> FunctionRegistry::base_images() const {
  std::set<std::string> images;
  for (const auto& [id, spec] : functions_) images.insert(spec.image_digest);
  return images;
}

}  // namespace edgefaas::gateway
