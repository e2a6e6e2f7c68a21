#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "safeteleop/grid_map.hpp"
#include "safeteleop/mav_model.hpp"
#include "safeteleop/safety_filter.hpp"
#include "safeteleop/sensor_sim.hpp"
#include "safeteleop/tesdf.hpp"

namespace safeteleop {

/// Raised when a scenario cannot be run (bad config, warm-up contract).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CameraSettings {
  int width = 160;
  int height = 120;
  double hfov_deg = 90.0;
  double max_range = 6.0;
  NoReturnPolicy no_return = NoReturnPolicy::MaxRange;
  double noise_sigma_rel = 0.0;

  Intrinsics intrinsics() const;
};

/// Camera orientation used while mapping the start location.
struct WarmupView {
  double yaw = 0.0;
  double pitch = 0.0;
};

/// Reference active from step k until the next waypoint.
struct Waypoint {
  std::int64_t k = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::optional<double> yaw;
};

struct TeleopScript {
  bool interactive = false;
  std::vector<Waypoint> waypoints;  // sorted by k
};

struct Scenario {
  Scene scene;
  MapConfig map;
  double truncation = 0.5;
  ClosedLoopModel<double> model;
  std::uint64_t model_seed = 1;
  double estimation_sigma = 0.0;
  FilterParams<double> filter;
  TeleopScript teleop;
  CameraSettings camera;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  double start_yaw = 0.0;
  std::vector<WarmupView> warmup;
  std::int64_t steps = 100;
  std::uint64_t seed = 1;

  /// Throws ScenarioError.
  void validate() const;

  /// Yaw sweep over four headings at three tilts plus straight up and down.
  static std::vector<WarmupView> full_sphere_warmup();
};

struct StepRecord {
  std::int64_t k = 0;
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Vector3d u_teleop = Eigen::Vector3d::Zero();
  Eigen::Vector3d u_filtered = Eigen::Vector3d::Zero();
  double h_eff = 0.0;
  FilterStatus status = FilterStatus::PassThrough;

  bool operator==(const StepRecord&) const = default;
};

struct TrialSummary {
  double distance = 0.0;            // d, meters traversed
  std::int64_t unsafe_steps = 0;    // N_c, steps with h_eff < 0
  double h_min = 0.0;               // min h_eff
  double mean_correction = 0.0;     // mean |u_filtered - u_teleop|
};

struct TrialLog {
  std::vector<StepRecord> records;
};

/// An empty log reports d = 0, N_c = 0, h_min = truncation, zero correction.
TrialSummary summarize(const TrialLog& log, double truncation);

/// State handed to step observers: the map as it was when the reference was
/// certified, and where the vehicle ended up.
struct StepContext {
  const StepRecord& record;
  const GridSnapshot& snapshot;
  const TesdfField& field;
  const MavState<double>& next_state;
};

using StepObserver = std::function<void(const StepContext&)>;

/// One closed-loop tick: render, integrate, rebuild the field, estimate,
/// certify the reference (or pass it raw), advance the plant. Scripted trials
/// and live sessions both drive this.
class TrialRunner {
 public:
  /// Maps the start location from the warm-up views; throws ScenarioError
  /// when the start voxel is not Free afterwards.
  explicit TrialRunner(Scenario scenario);

  const StepRecord& step(const Eigen::Vector3d& u_teleop, double yaw, bool filter_enabled,
                         const StepObserver& observer = {});

  const Scenario& scenario() const { return scenario_; }
  const MavState<double>& state() const { return state_; }
  const OccupancyGrid& grid() const { return grid_; }
  /// Field as of the last refresh (warm-up or latest step).
  const TesdfField& field() const { return field_; }
  const TrialLog& log() const { return log_; }

 private:
  void observe(double yaw, double pitch);
  TesdfField warm_up();

  Scenario scenario_;
  OccupancyGrid grid_;
  CameraRig rig_;
  ClosedLoopPlant<double> plant_;
  StateEstimator<double> estimator_;
  MavState<double> state_;
  std::uint64_t frames_ = 0;
  TesdfField field_;
  TrialLog log_;
};

/// Reference and heading for step k of a script (holds the start pose
/// before the first waypoint).
struct Reference {
  Eigen::Vector3d position;
  double yaw;
};
Reference scripted_reference(const Scenario& scenario, std::int64_t k);

TrialLog run_trial(const Scenario& scenario, bool filter_enabled, const StepObserver& observer = {});

/// Per-step CSV, header documented in docs/formats.md.
void export_csv(const TrialLog& log, std::ostream& os);
void export_csv(const TrialLog& log, const std::string& path);
TrialLog read_csv(std::istream& is);

void export_slice(const TesdfField& field, Axis axis, double coord, const std::string& path);

FilterStatus parse_status(const std::string& name);
Axis parse_axis(const std::string& name);

}  // namespace safeteleop
