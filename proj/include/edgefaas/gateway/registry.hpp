#pragma once

#include <map>
#include <set>

#include <json.hpp>

#include "edgefaas/lifecycle/types.hpp"

namespace edgefaas::gateway {

lifecycle::FunctionSpec function_spec_from_json(const nlohmann::json& j);
nlohmann::json function_spec_to_json(const lifecycle::FunctionSpec& spec);

// Route table + function specs, loaded once from the registry file (a JSON
// list of function specs). Immutable after load.
class FunctionRegistry {
 public:
  void load(const nlohmann::json& j);  // Conflict if already loaded
  bool loaded() const { return loaded_; }

  const lifecycle::FunctionSpec* find_route(const std::string& route) const;
  const lifecycle::FunctionSpec& function(const std::string& function_id) const;
  const lifecycle::FunctionSpec* find_function(
      const std::string& function_id) const;

  const std::map<std::string, lifecycle::FunctionSpec>& functions() const {
    return functions_;
  }
  std::set<std::string> base_images() const;

 private:
  std::map<std::string, lifecycle::FunctionSpec> functions_;  // by id
  std::map<std::string, std::string> routes_;                 // route -> id
  bool loaded_ = false;
};

}  // namespace edgefaas::gateway
