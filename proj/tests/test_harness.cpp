#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "safeteleop/scenario_io.hpp"
#include "test_support.hpp"

using namespace safeteleop;
using safeteleop::testing::open_space;
using safeteleop::testing::wall_crossing;

namespace {

StepRecord record(std::int64_t k, double x, double h_eff) {
  StepRecord r;
  r.k = k;
  r.x = Eigen::Vector3d(x, 0.0, 1.0);
  r.u_teleop = r.x;
  r.u_filtered = r.x;
  r.h_eff = h_eff;
  return r;
}

std::string csv_of(const TrialLog& log) {
  std::ostringstream os;
  export_csv(log, os);
  return os.str();
}

}  // namespace

TEST(Summarize, CountsUnsafeSteps) {
  TrialLog log;
  log.records = {record(0, 0.0, 0.3), record(1, 0.5, -0.1), record(2, 1.5, 0.2)};
  log.records[1].u_filtered.x() += 0.3;
  log.records[1].u_filtered.y() += 0.4;
  const TrialSummary s = summarize(log, 0.5);
  EXPECT_EQ(s.unsafe_steps, 1);
  EXPECT_DOUBLE_EQ(s.h_min, -0.1);
  EXPECT_DOUBLE_EQ(s.distance, 1.5);
  EXPECT_NEAR(s.mean_correction, 0.5 / 3.0, 1e-15);
}

TEST(Summarize, PassThroughHasNoCorrection) {
  TrialLog log;
  for (int k = 0; k < 5; ++k) log.records.push_back(record(k, 0.1 * k, 0.2));
  EXPECT_EQ(summarize(log, 0.5).mean_correction, 0.0);
}

TEST(Summarize, EmptyLog) {
  const TrialSummary s = summarize(TrialLog{}, 0.5);
  EXPECT_EQ(s.distance, 0.0);
  EXPECT_EQ(s.unsafe_steps, 0);
  EXPECT_EQ(s.h_min, 0.5);
  EXPECT_EQ(s.mean_correction, 0.0);
}

TEST(TrialCsv, EmptyLogIsHeaderOnly) {
  EXPECT_EQ(csv_of(TrialLog{}),
            "k,x,y,z,u_teleop_x,u_teleop_y,u_teleop_z,u_filtered_x,u_filtered_y,u_filtered_z,h_eff,status\n");
}

TEST(TrialCsv, RoundTripIsExact) {
  TrialLog log;
  log.records = {record(0, 0.1, 0.30000000000000004), record(1, 1.0 / 3.0, -1e-17)};
  log.records[1].status = FilterStatus::Projected;
  log.records[1].u_filtered = Eigen::Vector3d(-0.09, 2e-300, 123456.789);
  std::istringstream is(csv_of(log));
  const TrialLog back = read_csv(is);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[0], log.records[0]);
  EXPECT_EQ(back.records[1], log.records[1]);
}

TEST(TrialCsv, RejectsMalformedInput) {
  std::istringstream bad_header("k,x\n");
  EXPECT_THROW(read_csv(bad_header), std::runtime_error);
  std::istringstream short_row(csv_of(TrialLog{}) + "0,1,2\n");
  EXPECT_THROW(read_csv(short_row), std::runtime_error);
  std::istringstream bad_status(csv_of(TrialLog{}) + "0,0,0,0,0,0,0,0,0,0,0,Sideways\n");
  EXPECT_THROW(read_csv(bad_status), std::invalid_argument);
}

TEST(Scenario, ValidateRejectsBadInput) {
  Scenario s = wall_crossing();
  EXPECT_NO_THROW(s.validate());
  s.start = Eigen::Vector3d(10.0, 0.0, 0.0);
  EXPECT_THROW(s.validate(), ScenarioError);
  s = wall_crossing();
  s.model.A = Eigen::Matrix3d::Identity();
  EXPECT_THROW(s.validate(), ScenarioError);
  s = wall_crossing();
  std::swap(s.teleop.waypoints.front(), s.teleop.waypoints.back());
  EXPECT_THROW(s.validate(), ScenarioError);
}

TEST(ScriptedReference, PiecewiseConstant) {
  Scenario s = wall_crossing();
  s.teleop.waypoints = {{3, {0.5, 0.0, 0.75}, 0.2}, {6, {1.0, 0.0, 0.75}, {}}};
  EXPECT_EQ(scripted_reference(s, 0).position, s.start);
  EXPECT_EQ(scripted_reference(s, 0).yaw, s.start_yaw);
  EXPECT_EQ(scripted_reference(s, 4).position, Eigen::Vector3d(0.5, 0.0, 0.75));
  EXPECT_EQ(scripted_reference(s, 100).position, Eigen::Vector3d(1.0, 0.0, 0.75));
  EXPECT_EQ(scripted_reference(s, 100).yaw, 0.2);
}

TEST(TrialRunner, WarmupContractViolationAborts) {
  Scenario s = wall_crossing();
  s.start = Eigen::Vector3d(1.6, 0.0, 0.75);  // inside the wall
  EXPECT_THROW(TrialRunner{s}, ScenarioError);
}

TEST(TrialRunner, WarmupMapsTheStart) {
  TrialRunner runner(wall_crossing());
  EXPECT_EQ(runner.grid().classify(runner.scenario().start), VoxelClass::Free);
  EXPECT_GT(interpolate(runner.field(), runner.scenario().start), runner.scenario().filter.robot_radius);
  EXPECT_TRUE(runner.log().records.empty());
}

TEST(RunTrial, OpenSpaceNeedsNoCorrection) {
  const Scenario s = open_space();
  const TrialLog log = run_trial(s, true);
  const TrialSummary sum = summarize(log, s.truncation);
  EXPECT_EQ(sum.unsafe_steps, 0);
  EXPECT_LT(sum.mean_correction, 1e-3);
  EXPECT_NEAR((log.records.back().x - Eigen::Vector3d(1.2, 0.3, 0.75)).norm(), 0.0, 1e-9);
}

TEST(RunTrial, WallCrossingPattern) {
  const Scenario s = wall_crossing();
  const TrialSummary off = summarize(run_trial(s, false), s.truncation);
  EXPECT_GT(off.unsafe_steps, 0);
  EXPECT_LT(off.h_min, 0.0);
  EXPECT_EQ(off.mean_correction, 0.0);

  double closest = 1e9;
  const TrialLog on_log = run_trial(s, true, [&](const StepContext& ctx) {
    closest = std::min(closest, signed_distance(s.scene, ctx.next_state.position));
  });
  const TrialSummary on = summarize(on_log, s.truncation);
  EXPECT_EQ(on.unsafe_steps, 0);
  EXPECT_GE(on.h_min, 0.0);
  EXPECT_GT(on.mean_correction, 0.0);
  EXPECT_GT(closest, s.filter.robot_radius - s.map.resolution);
  // Stopped in front of the wall.
  EXPECT_LT(on_log.records.back().x.x(), 1.5);
}

TEST(RunTrial, ObserverSeesCertifiedMap) {
  const Scenario s = open_space();
  std::int64_t calls = 0;
  run_trial(s, true, [&](const StepContext& ctx) {
    EXPECT_EQ(ctx.record.k, calls);
    EXPECT_EQ(ctx.next_state.k, calls + 1);
    EXPECT_EQ(ctx.snapshot.geometry(), ctx.field.geometry());
    ++calls;
  });
  EXPECT_EQ(calls, s.steps);
}

TEST(RunTrial, DeterministicUnderFixedSeeds) {
  Scenario s = wall_crossing(1.5, 60);
  s.model.noise_bound = 0.03;
  s.filter.epsilon = 0.05;
  s.estimation_sigma = 0.01;
  s.camera.noise_sigma_rel = 0.005;
  EXPECT_EQ(csv_of(run_trial(s, true)), csv_of(run_trial(s, true)));
  Scenario other = s;
  other.seed = 2;
  EXPECT_NE(csv_of(run_trial(s, true)), csv_of(run_trial(other, true)));
}

TEST(RunTrial, InteractiveScenarioHasNoScript) {
  Scenario s = open_space();
  s.teleop.interactive = true;
  EXPECT_THROW(run_trial(s, true), ScenarioError);
}

TEST(ScenarioJson, RoundTrip) {
  Scenario s = wall_crossing();
  s.scene.primitives.push_back(Sphere{{1.0, 1.0, 1.0}, 0.25});
  s.model = ClosedLoopModel<double>::lag(0.6);
  s.model.noise_bound = 0.02;
  s.filter.epsilon = 0.07;
  s.camera.no_return = NoReturnPolicy::Invalid;
  s.teleop.waypoints[3].yaw = 0.5;
  const Scenario back = scenario_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_EQ(back.scene.primitives.size(), 3u);
  EXPECT_TRUE(back.model.A.isApprox(s.model.A));
  EXPECT_EQ(back.filter.epsilon, 0.07);
  EXPECT_EQ(back.teleop.waypoints.size(), s.teleop.waypoints.size());
  EXPECT_EQ(back.teleop.waypoints[3].yaw, 0.5);
  EXPECT_EQ(back.warmup.size(), s.warmup.size());
}

TEST(ScenarioJson, MinimalDocumentUsesDefaults) {
  const auto j = nlohmann::json::parse(R"({
    "scene": {"primitives": [{"type": "box", "center": [2, 0, 1], "size": [0.2, 4, 2]}]},
    "map": {"origin": [-1, -2, 0], "extent": [4, 4, 2]},
    "run": {"start": [0, 0, 1], "steps": 10}
  })");
  const Scenario s = scenario_from_json(j);
  EXPECT_EQ(s.steps, 10);
  EXPECT_EQ(s.map.resolution, 0.05);
  EXPECT_EQ(s.truncation, 0.5);
  EXPECT_EQ(s.filter.p1, 0.45);
  EXPECT_TRUE(s.model.A.isZero());
}

TEST(ScenarioJson, ReportsErrors) {
  EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"run": {"start": [0, 0]}})")), ScenarioError);
  EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"scene": [{"type": "cone"}]})")), ScenarioError);
  EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"map": {"resolution": "fine"}})")), ScenarioError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ScenarioError);
}

TEST(ScenarioJson, ShippedScenariosLoad) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(SAFETELEOP_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_scenario(entry.path().string()));
    ++count;
  }
  EXPECT_GT(count, 0);
}
