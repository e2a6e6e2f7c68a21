#include "safeteleop/teleop_session.hpp"

#include <algorithm>
#include <type_traits>

#include "safeteleop/scenario_io.hpp"

namespace safeteleop {

using nlohmann::json;

namespace {

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "?";
}

}  // namespace

std::optional<ClientMessage> parse_client_message(const std::string& text, std::string* error) {
  auto fail = [&](std::string why) -> std::optional<ClientMessage> {
    if (error) *error = std::move(why);
    return std::nullopt;
  };
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return fail("not JSON");
  if (!j.is_object() || j.size() != 1) return fail("expected an object with a single message key");
  const auto& [key, body] = *j.items().begin();
  if (key == "set_reference") {
    if (!body.is_object()) return fail("set_reference needs {x, y, z}");
    Eigen::Vector3d p;
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
      if (!body.contains(names[a]) || !body[names[a]].is_number()) return fail("set_reference needs numeric x, y, z");
      p[a] = body[names[a]].get<double>();
    }
    if (!p.allFinite()) return fail("non-finite reference");
    return SetReference{p};
  }
  if (key == "set_yaw") {
    if (!body.is_number()) return fail("set_yaw needs a number");
    return SetYaw{body.get<double>()};
  }
  if (key == "toggle_filter") {
    if (!body.is_boolean()) return fail("toggle_filter needs a boolean");
    return ToggleFilter{body.get<bool>()};
  }
  if (key == "reset") return Reset{};
  return fail("unknown message type '" + key + "'");
}

std::string encode(const ClientMessage& message) {
  json j;
  if (const auto* r = std::get_if<SetReference>(&message))
    j["set_reference"] = {{"x", r->position.x()}, {"y", r->position.y()}, {"z", r->position.z()}};
  else if (const auto* y = std::get_if<SetYaw>(&message))
    j["set_yaw"] = y->yaw;
  else if (const auto* t = std::get_if<ToggleFilter>(&message))
    j["toggle_filter"] = t->enabled;
  else
    j["reset"] = nullptr;
  return j.dump();
}

TeleopSession::TeleopSession(Scenario scenario, SessionOptions options)
    : scenario_(std::move(scenario)), options_(options) {
  options_.slice_every = std::max(1, options_.slice_every);
  restart();
}

void TeleopSession::restart() {
  runner_.reset();
  runner_.emplace(scenario_);
  reference_ = scenario_.start;
  yaw_ = scenario_.start_yaw;
}

void TeleopSession::post(const ClientMessage& message) {
  std::visit(
      [this](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SetReference>) reference_ = m.position;
        else if constexpr (std::is_same_v<T, SetYaw>) yaw_ = m.yaw;
        else if constexpr (std::is_same_v<T, ToggleFilter>) filter_enabled_ = m.enabled;
        else restart();
      },
      message);
}

TickOutput TeleopSession::tick() {
  const StepRecord& rec = runner_->step(reference_, yaw_, filter_enabled_);
  const TrialSummary summary = summarize(runner_->log(), scenario_.truncation);
  TickOutput out;
  out.telemetry = {{"telemetry",
                    {{"k", rec.k},
                     {"x", vec3_json(rec.x)},
                     {"pose", vec3_json(runner_->state().position)},
                     {"yaw", yaw_},
                     {"u_teleop", vec3_json(rec.u_teleop)},
                     {"u_filtered", vec3_json(rec.u_filtered)},
                     {"h_eff", rec.h_eff},
                     {"status", to_string(rec.status)},
                     {"filter_enabled", filter_enabled_},
                     {"metrics",
                      {{"d", summary.distance},
                       {"N_c", summary.unsafe_steps},
                       {"h_min", summary.h_min},
                       {"mean_correction", summary.mean_correction}}}}}};
  if (rec.k % options_.slice_every == 0) out.map_slice = map_slice_message();
  return out;
}

json TeleopSession::scene_message() const {
  json scene = to_json(scenario_.scene);
  scene["bounds"] = {{"origin", vec3_json(scenario_.map.origin)}, {"extent", vec3_json(scenario_.map.extent)}};
  scene["start"] = vec3_json(scenario_.start);
  return {{"scene", scene}};
}

json TeleopSession::map_slice_message() const {
  const TesdfField& field = runner_->field();
  const GridGeometry& g = field.geometry();
  const int a = static_cast<int>(options_.slice_axis);
  const double coord = options_.slice_coord.value_or(scenario_.start[a]);
  const Eigen::MatrixXd values = slice(field, options_.slice_axis, coord);
  const int col_axis = options_.slice_axis == Axis::X ? 1 : 0;
  const int row_axis = options_.slice_axis == Axis::Z ? 1 : 2;
  json flat = json::array();
  for (int r = 0; r < values.rows(); ++r)
    for (int c = 0; c < values.cols(); ++c) flat.push_back(values(r, c));
  return {{"map_slice",
           {{"k", runner_->state().k},
            {"axis", axis_name(options_.slice_axis)},
            {"coord", coord},
            {"resolution", g.resolution()},
            {"origin", json::array({g.origin()[col_axis], g.origin()[row_axis]})},
            {"width", values.cols()},
            {"height", values.rows()},
            {"truncation", field.truncation()},
            {"values", flat}}}};
}

TrialLog replay(const Scenario& scenario, std::span<const TranscriptEntry> transcript, std::int64_t ticks,
                SessionOptions options) {
  TeleopSession session(scenario, options);
  std::size_t next = 0;
  for (std::int64_t t = 0; t < ticks; ++t) {
    for (; next < transcript.size() && transcript[next].tick <= t; ++next) {
      if (auto msg = parse_client_message(transcript[next].message)) session.post(*msg);
    }
    session.tick();
  }
  return session.record();
}

}  // namespace safeteleop
