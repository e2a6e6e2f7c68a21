#include "safeteleop/scenario_io.hpp"

#include <fstream>
#include <numbers>

namespace safeteleop {

using nlohmann::json;

namespace {

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ScenarioError("expected a 3-element array, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Matrix3d mat3(const json& j) {
  Eigen::Matrix3d m;
  if (j.is_array() && j.size() == 3 && j[0].is_array()) {
    for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[r]).transpose();
  } else if (j.is_array() && j.size() == 9) {
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = j[i].get<double>();
  } else {
    throw ScenarioError("expected a 3x3 matrix, got " + j.dump());
  }
  return m;
}

json mat3_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec3_json(m.row(r).transpose()));
  return rows;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Primitive primitive_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "box") return Box{vec3(j.at("center")), vec3(j.at("size"))};
  if (type == "sphere") return Sphere{vec3(j.at("center")), j.at("radius").get<double>()};
  if (type == "plane") {
    GroundPlane g;
    if (j.contains("height")) g.height = j["height"].get<double>();
    else if (j.contains("center")) g.height = vec3(j["center"]).z();
    return g;
  }
  throw ScenarioError("unknown primitive type '" + type + "'");
}

json primitive_json(const Primitive& p) {
  if (const auto* b = std::get_if<Box>(&p)) return {{"type", "box"}, {"center", vec3_json(b->center)}, {"size", vec3_json(b->size)}};
  if (const auto* s = std::get_if<Sphere>(&p))
    return {{"type", "sphere"}, {"center", vec3_json(s->center)}, {"radius", s->radius}};
  const auto& g = std::get<GroundPlane>(p);
  return {{"type", "plane"}, {"center", json::array({0.0, 0.0, g.height})}};
}

}  // namespace

Scene scene_from_json(const json& j) {
  Scene scene;
  const json& list = j.is_array() ? j : j.value("primitives", json::array());
  for (const json& p : list) scene.primitives.push_back(primitive_from_json(p));
  return scene;
}

json to_json(const Scene& scene) {
  json list = json::array();
  for (const Primitive& p : scene.primitives) list.push_back(primitive_json(p));
  return {{"primitives", list}};
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  try {
    if (j.contains("scene")) s.scene = scene_from_json(j["scene"]);

    if (j.contains("map")) {
      const json& m = j["map"];
      if (m.contains("origin")) s.map.origin = vec3(m["origin"]);
      if (m.contains("extent")) s.map.extent = vec3(m["extent"]);
      read(m, "resolution", s.map.resolution);
      read(m, "log_odds_hit", s.map.log_odds_hit);
      read(m, "log_odds_miss", s.map.log_odds_miss);
      read(m, "log_odds_min", s.map.log_odds_min);
      read(m, "log_odds_max", s.map.log_odds_max);
      read(m, "occupied_band", s.map.occupied_band);
      read(m, "truncation", s.truncation);
    }

    if (j.contains("model")) {
      const json& m = j["model"];
      const std::string preset = m.value("preset", std::string("perfect"));
      if (preset == "lag") s.model = ClosedLoopModel<double>::lag(m.value("gain", 0.5));
      else if (preset != "perfect") throw ScenarioError("unknown model preset '" + preset + "'");
      if (m.contains("A")) s.model.A = mat3(m["A"]);
      if (m.contains("B")) s.model.B = mat3(m["B"]);
      read(m, "eps_true", s.model.noise_bound);
      read(m, "dt", s.model.step_dt);
      read(m, "seed", s.model_seed);
      read(m, "est_sigma", s.estimation_sigma);
    }

    if (j.contains("filter")) {
      const json& f = j["filter"];
      read(f, "p1", s.filter.p1);
      read(f, "p2", s.filter.p2);
      read(f, "eps", s.filter.epsilon);
      read(f, "robot_radius", s.filter.robot_radius);
      read(f, "grad_epsilon", s.filter.grad_epsilon);
    }

    if (j.contains("teleop")) {
      const json& t = j["teleop"];
      const std::string mode = t.value("mode", std::string("scripted"));
      if (mode != "scripted" && mode != "interactive") throw ScenarioError("unknown teleop mode '" + mode + "'");
      s.teleop.interactive = mode == "interactive";
      if (j.contains("run") && j["run"].contains("start")) s.start = vec3(j["run"]["start"]);
      for (const json& w : t.value("waypoints", json::array())) {
        Waypoint wp;
        wp.k = w.at("k").get<std::int64_t>();
        wp.position = vec3(w.at("position"));
        if (w.contains("yaw")) wp.yaw = w["yaw"].get<double>();
        // "ramp": n spreads the move from the previous reference over n ticks.
        const std::int64_t ramp = w.value("ramp", std::int64_t{1});
        if (ramp < 1) throw ScenarioError("waypoint ramp must be at least 1");
        const Eigen::Vector3d from = s.teleop.waypoints.empty() ? s.start : s.teleop.waypoints.back().position;
        for (std::int64_t i = 1; i < ramp; ++i)
          s.teleop.waypoints.push_back({wp.k + i - 1, from + (wp.position - from) * (double(i) / ramp), {}});
        wp.k += ramp - 1;
        s.teleop.waypoints.push_back(wp);
      }
    }

    if (j.contains("run")) {
      const json& r = j["run"];
      if (r.contains("start")) s.start = vec3(r["start"]);
      read(r, "start_yaw", s.start_yaw);
      read(r, "steps", s.steps);
      read(r, "seed", s.seed);
      if (r.contains("warmup")) {
        const json& w = r["warmup"];
        if (w.is_string()) {
          if (w == "sphere") s.warmup = Scenario::full_sphere_warmup();
          else if (w != "none") throw ScenarioError("warmup must be 'sphere', 'none' or a list of views");
        } else {
          for (const json& v : w) s.warmup.push_back({v.value("yaw", 0.0), v.value("pitch", 0.0)});
        }
      }
      if (r.contains("camera")) {
        const json& c = r["camera"];
        read(c, "width", s.camera.width);
        read(c, "height", s.camera.height);
        read(c, "hfov_deg", s.camera.hfov_deg);
        read(c, "max_range", s.camera.max_range);
        read(c, "noise_sigma_rel", s.camera.noise_sigma_rel);
        const std::string nr = c.value("no_return", std::string("max_range"));
        if (nr == "max_range") s.camera.no_return = NoReturnPolicy::MaxRange;
        else if (nr == "invalid") s.camera.no_return = NoReturnPolicy::Invalid;
        else throw ScenarioError("no_return must be 'max_range' or 'invalid'");
      }
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ScenarioError("cannot open scenario '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ScenarioError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

json to_json(const Scenario& s) {
  json j;
  j["scene"] = to_json(s.scene);
  j["map"] = {{"origin", vec3_json(s.map.origin)},     {"extent", vec3_json(s.map.extent)},
              {"resolution", s.map.resolution},         {"log_odds_hit", s.map.log_odds_hit},
              {"log_odds_miss", s.map.log_odds_miss},   {"log_odds_min", s.map.log_odds_min},
              {"log_odds_max", s.map.log_odds_max},     {"occupied_band", s.map.occupied_band},
              {"truncation", s.truncation}};
  j["model"] = {{"A", mat3_json(s.model.A)},   {"B", mat3_json(s.model.B)},  {"eps_true", s.model.noise_bound},
                {"dt", s.model.step_dt},      {"seed", s.model_seed},       {"est_sigma", s.estimation_sigma}};
  j["filter"] = {{"p1", s.filter.p1},
                 {"p2", s.filter.p2},
                 {"eps", s.filter.epsilon},
                 {"robot_radius", s.filter.robot_radius},
                 {"grad_epsilon", s.filter.grad_epsilon}};
  json wps = json::array();
  for (const Waypoint& w : s.teleop.waypoints) {
    json e = {{"k", w.k}, {"position", vec3_json(w.position)}};
    if (w.yaw) e["yaw"] = *w.yaw;
    wps.push_back(e);
  }
  j["teleop"] = {{"mode", s.teleop.interactive ? "interactive" : "scripted"}, {"waypoints", wps}};
  json views = json::array();
  for (const WarmupView& v : s.warmup) views.push_back({{"yaw", v.yaw}, {"pitch", v.pitch}});
  j["run"] = {{"start", vec3_json(s.start)},
              {"start_yaw", s.start_yaw},
              {"steps", s.steps},
              {"seed", s.seed},
              {"warmup", views},
              {"camera",
               {{"width", s.camera.width},
                {"height", s.camera.height},
                {"hfov_deg", s.camera.hfov_deg},
                {"max_range", s.camera.max_range},
                {"noise_sigma_rel", s.camera.noise_sigma_rel},
                {"no_return", s.camera.no_return == NoReturnPolicy::MaxRange ? "max_range" : "invalid"}}}};
  return j;
}

}  // namespace safeteleop
