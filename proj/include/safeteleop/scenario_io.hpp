#pragma once

#include <string>

#include <json.hpp>

#include "safeteleop/harness.hpp"

namespace safeteleop {

/// Scenario files: JSON with sections scene, map, model, filter, teleop, run.
/// Field reference in docs/formats.md. Missing fields take library defaults.
/// Throws ScenarioError on malformed input.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

nlohmann::json to_json(const Scenario& scenario);
nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace safeteleop
