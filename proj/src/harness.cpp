#include "safeteleop/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace safeteleop {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// splitmix64 finalizer; decorrelates the per-purpose seed streams.
std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Intrinsics CameraSettings::intrinsics() const {
  return Intrinsics::from_horizontal_fov(width, height, hfov_deg * kDeg);
}

std::vector<WarmupView> Scenario::full_sphere_warmup() {
  std::vector<WarmupView> views;
  for (double pitch : {0.0, 60.0, -60.0})
    for (double yaw : {0.0, 90.0, 180.0, 270.0}) views.push_back({yaw * kDeg, pitch * kDeg});
  views.push_back({0.0, 90.0 * kDeg});
  views.push_back({0.0, -90.0 * kDeg});
  return views;
}

void Scenario::validate() const {
  try {
    map.validate();
    model.validate();
    filter.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  if (!(truncation > 0.0)) throw ScenarioError("truncation bound must be positive");
  if (!camera.intrinsics().valid() || !(camera.max_range > 0.0)) throw ScenarioError("invalid camera settings");
  if (!(estimation_sigma >= 0.0)) throw ScenarioError("estimation sigma must be non-negative");
  if (steps < 0) throw ScenarioError("steps must be non-negative");
  if (!start.allFinite() || !GridGeometry::from_config(map).contains(start))
    throw ScenarioError("start position outside the mapped volume");
  std::int64_t last = -1;
  for (const Waypoint& w : teleop.waypoints) {
    if (!w.position.allFinite() || (w.yaw && !std::isfinite(*w.yaw))) throw ScenarioError("non-finite waypoint");
    if (w.k < last) throw ScenarioError("waypoints must be sorted by step");
    last = w.k;
  }
}

TrialSummary summarize(const TrialLog& log, double truncation) {
  TrialSummary s;
  s.h_min = truncation;
  if (log.records.empty()) return s;
  s.h_min = log.records.front().h_eff;
  double correction = 0.0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const StepRecord& r = log.records[i];
    if (i > 0) s.distance += (r.x - log.records[i - 1].x).norm();
    if (r.h_eff < 0.0) ++s.unsafe_steps;
    s.h_min = std::min(s.h_min, r.h_eff);
    correction += (r.u_filtered - r.u_teleop).norm();
  }
  s.mean_correction = correction / static_cast<double>(log.records.size());
  return s;
}

TrialRunner::TrialRunner(Scenario scenario)
    : scenario_((scenario.validate(), std::move(scenario))),
      grid_(scenario_.map),
      plant_(scenario_.model, mix_seed(scenario_.model_seed)),
      estimator_(scenario_.estimation_sigma, mix_seed(scenario_.seed ^ 0x5eedULL)),
      state_{scenario_.start, 0},
      field_(warm_up()) {}

void TrialRunner::observe(double yaw, double pitch) {
  const CameraSettings& cam = scenario_.camera;
  RenderOptions opts;
  opts.max_range = cam.max_range;
  opts.no_return = cam.no_return;
  opts.noise_sigma_rel = cam.noise_sigma_rel;
  opts.seed = mix_seed(scenario_.seed + 0x100000000ULL * ++frames_);
  const Eigen::Isometry3d pose = rig_.camera_pose(state_.position, yaw, pitch);
  grid_.integrate_depth_frame(render_depth(scenario_.scene, pose, cam.intrinsics(), opts), pose);
}

TesdfField TrialRunner::warm_up() {
  if (scenario_.warmup.empty()) {
    observe(scenario_.start_yaw, 0.0);
  } else {
    for (const WarmupView& v : scenario_.warmup) observe(v.yaw, v.pitch);
  }
  const GridSnapshot snap = grid_.snapshot();
  if (snap.classify(scenario_.start) != VoxelClass::Free)
    throw ScenarioError("warm-up contract violated: start position is not Free after initial mapping");
  return build_tesdf(snap, scenario_.truncation);
}

const StepRecord& TrialRunner::step(const Eigen::Vector3d& u_teleop, double yaw, bool filter_enabled,
                                    const StepObserver& observer) {
  if (!u_teleop.allFinite() || !std::isfinite(yaw)) throw std::invalid_argument("non-finite reference");
  observe(yaw, 0.0);
  const GridSnapshot snap = grid_.snapshot();
  field_ = build_tesdf(snap, scenario_.truncation);

  const Eigen::Vector3d x_est = estimator_.estimate(state_);
  StepRecord rec;
  rec.k = state_.k;
  rec.x = state_.position;
  rec.u_teleop = u_teleop;
  rec.h_eff = interpolate(field_, state_.position) - scenario_.filter.robot_radius;
  if (filter_enabled) {
    const auto constraint = build_constraint(x_est, field_, scenario_.model, scenario_.filter);
    const auto result = filter(u_teleop, constraint, scenario_.filter);
    rec.u_filtered = result.u_filtered;
    rec.status = result.status;
  } else {
    rec.u_filtered = u_teleop;
    rec.status = FilterStatus::PassThrough;
  }
  const MavState<double> next = plant_.step(state_, rec.u_filtered);
  log_.records.push_back(rec);
  if (observer) observer(StepContext{log_.records.back(), snap, field_, next});
  state_ = next;
  return log_.records.back();
}

Reference scripted_reference(const Scenario& scenario, std::int64_t k) {
  Reference ref{scenario.start, scenario.start_yaw};
  for (const Waypoint& w : scenario.teleop.waypoints) {
    if (w.k > k) break;
    ref.position = w.position;
    if (w.yaw) ref.yaw = *w.yaw;
  }
  return ref;
}

TrialLog run_trial(const Scenario& scenario, bool filter_enabled, const StepObserver& observer) {
  if (scenario.teleop.interactive) throw ScenarioError("interactive scenario has no script to run");
  TrialRunner runner(scenario);
  for (std::int64_t k = 0; k < scenario.steps; ++k) {
    const Reference ref = scripted_reference(scenario, k);
    runner.step(ref.position, ref.yaw, filter_enabled, observer);
  }
  return runner.log();
}

FilterStatus parse_status(const std::string& name) {
  for (FilterStatus s : {FilterStatus::PassThrough, FilterStatus::Projected, FilterStatus::DegenerateGradient,
                         FilterStatus::Infeasible})
    if (name == to_string(s)) return s;
  throw std::invalid_argument("unknown filter status '" + name + "'");
}

Axis parse_axis(const std::string& name) {
  if (name == "x" || name == "X") return Axis::X;
  if (name == "y" || name == "Y") return Axis::Y;
  if (name == "z" || name == "Z") return Axis::Z;
  throw std::invalid_argument("axis must be x, y or z");
}

}  // namespace safeteleop
