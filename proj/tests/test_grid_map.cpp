#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "safeteleop/grid_map.hpp"
#include "safeteleop/sensor_sim.hpp"

using namespace safeteleop;

namespace {

MapConfig strip_config() {
  MapConfig c;
  c.origin = Eigen::Vector3d::Zero();
  c.extent = Eigen::Vector3d(2.0, 0.5, 0.5);
  return c;
}

RayMeasurement ray_x(double range, bool has_return = true) {
  return {Eigen::Vector3d::UnitX(), range, has_return};
}

}  // namespace

TEST(MapConfig, RejectsBadValues) {
  MapConfig c;
  EXPECT_NO_THROW(c.validate());
  c.resolution = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MapConfig{};
  c.log_odds_hit = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MapConfig{};
  c.log_odds_min = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(GridGeometry, IndexingAndLookup) {
  const GridGeometry g = GridGeometry::from_config(strip_config());
  EXPECT_EQ(g.dims(), Eigen::Vector3i(40, 10, 10));
  EXPECT_EQ(g.index(1, 0, 0), 1u);
  EXPECT_EQ(g.index(0, 1, 0), 40u);
  EXPECT_EQ(g.index(0, 0, 1), 400u);
  EXPECT_EQ(*g.voxel_of({0.07, 0.0, 0.49}), Eigen::Vector3i(1, 0, 9));
  // Far faces belong to the last voxel; beyond them nothing does.
  EXPECT_EQ(*g.voxel_of({2.0, 0.5, 0.5}), Eigen::Vector3i(39, 9, 9));
  EXPECT_FALSE(g.voxel_of({2.0001, 0.2, 0.2}).has_value());
  EXPECT_FALSE(g.voxel_of({-1e-9, 0.2, 0.2}).has_value());
  EXPECT_TRUE(g.center({3, 4, 5}).isApprox(Eigen::Vector3d(0.175, 0.225, 0.275)));
}

TEST(OccupancyGrid, FreshGridIsUnknownEverywhere) {
  OccupancyGrid grid(strip_config());
  for (float l : grid.cells()) {
    EXPECT_EQ(l, 0.0f);
    EXPECT_EQ(classify_log_odds(l), VoxelClass::Unknown);
    EXPECT_DOUBLE_EQ(occupancy_probability(l), 0.5);
  }
  EXPECT_EQ(grid.classify({1.0, 0.25, 0.25}), VoxelClass::Unknown);
  EXPECT_THROW(grid.classify({3.0, 0.0, 0.0}), std::out_of_range);
}

TEST(OccupancyGrid, SignRule) {
  EXPECT_EQ(classify_log_odds(-0.4f), VoxelClass::Free);
  EXPECT_EQ(classify_log_odds(-1e-30f), VoxelClass::Free);
  EXPECT_EQ(classify_log_odds(0.0f), VoxelClass::Unknown);
  EXPECT_EQ(classify_log_odds(3.5f), VoxelClass::Occupied);
  EXPECT_LT(occupancy_probability(-0.4f), 0.5);
  EXPECT_GT(occupancy_probability(0.85f), 0.5);
}

TEST(OccupancyGrid, AxisAlignedRayAgainstWall) {
  OccupancyGrid grid(strip_config());
  const Eigen::Vector3d origin(0.0, 0.225, 0.225);
  const RayMeasurement ray = ray_x(1.0);
  grid.integrate_scan(origin, std::span(&ray, 1));

  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector3i v(i, 4, 4);
    const float l = grid.log_odds(v);
    if (i <= 18) {
      EXPECT_FLOAT_EQ(l, -0.4f) << i;
    } else if (i <= 20) {
      EXPECT_FLOAT_EQ(l, 0.85f) << i;
    } else {
      EXPECT_EQ(l, 0.0f) << i;
    }
  }
  // Only the traversed row changed.
  int touched = 0;
  for (float l : grid.cells()) touched += l != 0.0f;
  EXPECT_EQ(touched, 21);
  EXPECT_EQ(grid.classify({0.5, 0.225, 0.225}), VoxelClass::Free);
  EXPECT_EQ(grid.classify({1.0, 0.225, 0.225}), VoxelClass::Occupied);
  EXPECT_EQ(grid.classify({0.5, 0.325, 0.225}), VoxelClass::Unknown);
}

TEST(OccupancyGrid, NoReturnRayCarvesOnlyFreeSpace) {
  OccupancyGrid grid(strip_config());
  const RayMeasurement ray = ray_x(0.6, false);
  grid.integrate_scan({0.0, 0.225, 0.225}, std::span(&ray, 1));
  for (int i = 0; i < 40; ++i) {
    const float l = grid.log_odds({i, 4, 4});
    EXPECT_EQ(l, i < 12 ? -0.4f : 0.0f) << i;
  }
}

TEST(OccupancyGrid, HitBeatsMissWithinOneScan) {
  OccupancyGrid grid(strip_config());
  // The short ray's surface voxels lie on the long ray's free segment.
  const std::vector<RayMeasurement> rays = {ray_x(1.5), ray_x(0.5)};
  grid.integrate_scan({0.0, 0.225, 0.225}, rays);
  EXPECT_FLOAT_EQ(grid.log_odds({10, 4, 4}), 0.85f);
  EXPECT_FLOAT_EQ(grid.log_odds({5, 4, 4}), -0.4f);  // one miss, not two
}

TEST(OccupancyGrid, LogOddsSaturate) {
  OccupancyGrid grid(strip_config());
  const RayMeasurement ray = ray_x(1.0);
  for (int n = 0; n < 50; ++n) grid.integrate_scan({0.0, 0.225, 0.225}, std::span(&ray, 1));
  EXPECT_FLOAT_EQ(grid.log_odds({5, 4, 4}), -3.5f);
  EXPECT_FLOAT_EQ(grid.log_odds({19, 4, 4}), 3.5f);
  for (float l : grid.cells()) {
    EXPECT_GE(l, -3.5f);
    EXPECT_LE(l, 3.5f);
  }
}

TEST(OccupancyGrid, RaysOutsideVolumeAreClipped) {
  OccupancyGrid grid(strip_config());
  // Starts outside, enters through the x = 0 face.
  const RayMeasurement ray = ray_x(1.5);
  grid.integrate_scan({-1.0, 0.225, 0.225}, std::span(&ray, 1));
  EXPECT_FLOAT_EQ(grid.log_odds({0, 4, 4}), -0.4f);
  EXPECT_FLOAT_EQ(grid.log_odds({8, 4, 4}), -0.4f);
  EXPECT_FLOAT_EQ(grid.log_odds({10, 4, 4}), 0.85f);

  // Misses the volume entirely.
  OccupancyGrid other(strip_config());
  other.integrate_scan({-1.0, 2.0, 0.225}, std::span(&ray, 1));
  for (float l : other.cells()) EXPECT_EQ(l, 0.0f);
}

TEST(OccupancyGrid, RejectsMismatchedFrame) {
  OccupancyGrid grid(strip_config());
  DepthFrame frame;
  frame.intrinsics = Intrinsics::from_horizontal_fov(8, 6, 1.0);
  frame.depth.assign(47, 1.0f);
  const Eigen::Isometry3d pose = CameraRig{}.camera_pose({0.2, 0.25, 0.25}, 0.0);
  EXPECT_EQ(grid.integrate_depth_frame(frame, pose), IntegrationStatus::Rejected);
  frame.depth.assign(48, 1.0f);
  frame.intrinsics.fx = -1.0;
  EXPECT_EQ(grid.integrate_depth_frame(frame, pose), IntegrationStatus::Rejected);
  for (float l : grid.cells()) EXPECT_EQ(l, 0.0f);

  frame.intrinsics = Intrinsics::from_horizontal_fov(8, 6, 1.0);
  EXPECT_EQ(grid.integrate_depth_frame(frame, pose), IntegrationStatus::Integrated);
}

TEST(OccupancyGrid, InvalidPixelsUpdateNothing) {
  OccupancyGrid grid(strip_config());
  DepthFrame frame;
  frame.intrinsics = Intrinsics::from_horizontal_fov(4, 4, 0.5);
  frame.depth = {0.0f, NAN, -1.0f, INFINITY, 0.0f, 0.0f, 0.0f, 0.0f,
                 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f};
  EXPECT_EQ(grid.integrate_depth_frame(frame, CameraRig{}.camera_pose({0.2, 0.25, 0.25}, 0.0)),
            IntegrationStatus::Integrated);
  for (float l : grid.cells()) EXPECT_EQ(l, 0.0f);
}

TEST(OccupancyGrid, FlatWallImage) {
  MapConfig config;
  config.origin = Eigen::Vector3d(0.0, -1.0, 0.0);
  config.extent = Eigen::Vector3d(2.0, 2.0, 1.0);
  OccupancyGrid grid(config);
  Scene scene{{Box{{1.75, 0.0, 0.5}, {0.2, 4.0, 4.0}}}};  // face at x = 1.65
  const Eigen::Isometry3d pose = CameraRig{}.camera_pose({0.1, 0.0, 0.5}, 0.0);
  const Intrinsics in = Intrinsics::from_horizontal_fov(41, 31, 60.0 * M_PI / 180.0);
  ASSERT_EQ(grid.integrate_depth_frame(render_depth(scene, pose, in), pose), IntegrationStatus::Integrated);

  EXPECT_EQ(grid.classify({0.8, 0.0, 0.5}), VoxelClass::Free);     // inside the frustum
  EXPECT_EQ(grid.classify({1.66, 0.0, 0.5}), VoxelClass::Occupied);  // on the surface shell
  EXPECT_EQ(grid.classify({1.9, 0.0, 0.5}), VoxelClass::Unknown);   // behind the wall
  EXPECT_EQ(grid.classify({0.8, 0.9, 0.5}), VoxelClass::Unknown);   // outside the 60 degree cone
}

TEST(GridSnapshot, IsolatedFromLaterIntegration) {
  OccupancyGrid grid(strip_config());
  const GridSnapshot before = grid.snapshot();
  const GridSnapshot again = grid.snapshot();
  EXPECT_TRUE(before.shares_storage_with(again));
  const RayMeasurement ray = ray_x(1.0);
  grid.integrate_scan({0.0, 0.225, 0.225}, std::span(&ray, 1));
  for (float l : before.cells()) EXPECT_EQ(l, 0.0f);
  EXPECT_EQ(before.classify(Eigen::Vector3d(0.5, 0.225, 0.225)), VoxelClass::Unknown);
  const GridSnapshot after = grid.snapshot();
  EXPECT_FALSE(after.shares_storage_with(before));
  EXPECT_EQ(after.classify(Eigen::Vector3d(0.5, 0.225, 0.225)), VoxelClass::Free);
  EXPECT_THROW(after.classify(Eigen::Vector3d(5.0, 0.0, 0.0)), std::out_of_range);
  EXPECT_FALSE(after.try_classify(Eigen::Vector3d(5.0, 0.0, 0.0)).has_value());
}

TEST(GridSnapshot, NoCopyWithoutReaders) {
  OccupancyGrid grid(strip_config());
  const float* before = grid.cells().data();
  const RayMeasurement ray = ray_x(1.0);
  grid.integrate_scan({0.0, 0.225, 0.225}, std::span(&ray, 1));
  EXPECT_EQ(grid.cells().data(), before);
}

TEST(GridIo, RoundTrip) {
  MapConfig config = strip_config();
  config.origin = Eigen::Vector3d(-0.3, 0.1, 2.0);
  OccupancyGrid grid(config);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dir(-1.0, 1.0);
  std::vector<RayMeasurement> rays;
  for (int n = 0; n < 200; ++n) rays.push_back({Eigen::Vector3d(dir(rng), dir(rng), dir(rng)).normalized(), 0.4, n % 3 != 0});
  grid.integrate_scan(config.origin + Eigen::Vector3d(1.0, 0.25, 0.25), rays);

  std::stringstream ss;
  write_grid(ss, grid.snapshot());
  const GridSnapshot back = read_grid(ss);
  EXPECT_EQ(back.geometry(), grid.geometry());
  EXPECT_EQ(back.config().log_odds_hit, config.log_odds_hit);
  ASSERT_EQ(back.cells().size(), grid.cells().size());
  EXPECT_TRUE(std::equal(back.cells().begin(), back.cells().end(), grid.cells().begin()));
}

TEST(GridIo, RejectsGarbage) {
  std::stringstream bad("not a grid at all");
  EXPECT_THROW(read_grid(bad), std::runtime_error);
  std::stringstream ss;
  write_grid(ss, OccupancyGrid(strip_config()).snapshot());
  std::string truncated = ss.str();
  truncated.resize(truncated.size() - 10);
  std::stringstream cut(truncated);
  EXPECT_THROW(read_grid(cut), std::runtime_error);
}

TEST(OccupancyGrid, IntegrationIsDeterministic) {
  MapConfig config;
  config.origin = Eigen::Vector3d(-1.0, -1.0, 0.0);
  config.extent = Eigen::Vector3d(2.0, 2.0, 1.0);
  Scene scene{{Sphere{{0.6, 0.2, 0.5}, 0.3}, Box{{-0.5, -0.5, 0.5}, {0.3, 0.3, 0.8}}, GroundPlane{0.05}}};
  const Intrinsics in = Intrinsics::from_horizontal_fov(32, 24, 1.5);
  auto run = [&] {
    OccupancyGrid grid(config);
    CameraRig rig;
    for (double yaw = 0.0; yaw < 6.0; yaw += 0.7) {
      const Eigen::Isometry3d pose = rig.camera_pose({0.0, 0.0, 0.5}, yaw);
      grid.integrate_depth_frame(render_depth(scene, pose, in, {6.0, NoReturnPolicy::MaxRange, 0.01, 9}), pose);
    }
    return std::vector<float>(grid.cells().begin(), grid.cells().end());
  };
  EXPECT_EQ(run(), run());
}

// A voxel is only carved along ray segments that precede the first return,
// so every Free voxel contains obstacle-free space and its center lies within
// half a voxel diagonal of it (noise-free sensing).
TEST(OccupancyGrid, FreeVoxelsLieOutsideObstacles) {
  MapConfig config;
  config.origin = Eigen::Vector3d(-1.5, -1.5, 0.0);
  config.extent = Eigen::Vector3d(3.0, 3.0, 1.5);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-1.2, 1.2);
  std::uniform_real_distribution<double> sz(0.1, 0.6);
  const Intrinsics in = Intrinsics::from_horizontal_fov(64, 48, 1.6);
  CameraRig rig;
  for (int world = 0; world < 4; ++world) {
    Scene scene;
    scene.primitives.push_back(GroundPlane{0.0});
    for (int n = 0; n < 5; ++n) {
      Eigen::Vector3d c(pos(rng), pos(rng), 0.75);
      if (c.head<2>().norm() < 0.6) c.x() += 1.0;
      if (n % 2 == 0)
        scene.primitives.push_back(Box{c, {sz(rng), sz(rng), 1.5}});
      else
        scene.primitives.push_back(Sphere{c, sz(rng)});
    }
    OccupancyGrid grid(config);
    for (double yaw = 0.0; yaw < 6.28; yaw += 0.5)
      for (double pitch : {0.0, 0.6, -0.6}) {
        const Eigen::Isometry3d pose = rig.camera_pose({0.0, 0.0, 0.75}, yaw, pitch);
        grid.integrate_depth_frame(render_depth(scene, pose, in), pose);
      }
    const GridGeometry& g = grid.geometry();
    const double half_diagonal = 0.5 * std::sqrt(3.0) * g.resolution();
    int free = 0;
    for (int k = 0; k < g.dims().z(); ++k)
      for (int j = 0; j < g.dims().y(); ++j)
        for (int i = 0; i < g.dims().x(); ++i) {
          const Eigen::Vector3i v(i, j, k);
          if (classify_log_odds(grid.log_odds(v)) != VoxelClass::Free) continue;
          ++free;
          ASSERT_GT(signed_distance(scene, g.center(v)), -half_diagonal) << "world " << world << " voxel " << v.transpose();
        }
    EXPECT_GT(free, 1000);
  }
}
