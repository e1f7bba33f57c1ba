#include "doctest.h"

#include "scaffold4d/error.hpp"
#include "scaffold4d/lift.hpp"
#include "support.hpp"

#include <map>
#include <set>

using namespace scaffold4d;

namespace {

GlobalFrame random_frame(std::mt19937_64& rng, int w, int h, int index, double spread = 5.0) {
  GlobalFrame f;
  f.index = index;
  f.pointmap = PointMap(w, h, true);
  f.mask = BinaryMask(w, h, false);
  std::uniform_real_distribution<float> conf(0.0f, 1.0f);
  for (std::size_t i = 0; i < f.pointmap.pixel_count(); ++i) {
    f.mask.values[i] = rng() % 3 == 0;
    if (rng() % 10 == 0) continue;
    f.pointmap.points[i] = testing::random_vec(rng, -spread, spread).cast<float>();
    f.pointmap.confidence[i] = conf(rng);
  }
  return f;
}

}  // namespace

TEST_CASE("split_frame: background and foreground partition the confident pixels") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const GlobalFrame f = random_frame(rng, 17, 11, k);
    const double conf_min = 0.05 * k;
    std::size_t fg = 0, bg = 0;
    for (std::size_t i = 0; i < f.pointmap.pixel_count(); ++i) {
      if (!f.pointmap.is_valid(i) || f.pointmap.confidence[i] < conf_min) continue;
      (f.mask[i] ? fg : bg) += 1;
    }
    const FrameSplit s = split_frame(f, conf_min);
    CHECK(s.foreground.size() == fg);
    CHECK(s.background.size() == bg);
  }
}

TEST_CASE("split_frame: mask size mismatch is rejected") {
  std::mt19937_64 rng(2);
  GlobalFrame f = random_frame(rng, 6, 4, 0);
  f.mask = BinaryMask(6, 5, false);
  CHECK_THROWS_AS(split_frame(f, 0.0), ValidationError);
}

TEST_CASE("background fusion without a voxel is the raw union in frame order") {
  std::mt19937_64 rng(3);
  std::vector<GlobalFrame> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(random_frame(rng, 9, 7, t));
  PointCloud expect;
  for (const auto& f : frames) expect.append(split_frame(f, 0.2).background);
  const PointCloud got = fuse_background(frames, 0.2, 0.0);
  CHECK(got.positions == expect.positions);
  CHECK(got.colors == expect.colors);
}

TEST_CASE("voxel fusion keeps the first point of every occupied cell") {
  std::mt19937_64 rng(4);
  std::vector<GlobalFrame> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(random_frame(rng, 20, 15, t, 1.0));
  const double voxel = 0.3;

  // Oracle: scan the raw union and record the first point per cell.
  const PointCloud raw = fuse_background(frames, 0.0, 0.0);
  std::map<std::array<long long, 3>, Vec3f> first;
  std::vector<Vec3f> order;
  for (const auto& p : raw.positions) {
    const std::array<long long, 3> c{static_cast<long long>(std::floor(p.x() / voxel)),
                                     static_cast<long long>(std::floor(p.y() / voxel)),
                                     static_cast<long long>(std::floor(p.z() / voxel))};
    if (first.emplace(c, p).second) order.push_back(p);
  }
  const PointCloud fused = fuse_background(frames, 0.0, voxel);
  CHECK(fused.positions == order);
}

TEST_CASE("voxel fusion of a static scene does not grow with repeated frames") {
  std::mt19937_64 rng(5);
  const GlobalFrame f = random_frame(rng, 16, 12, 0);
  std::vector<GlobalFrame> once{f};
  std::vector<GlobalFrame> many(6, f);
  CHECK(fuse_background(many, 0.0, 0.1).positions == fuse_background(once, 0.0, 0.1).positions);
  CHECK(fuse_background(many, 0.0, 0.0).size() == 6 * fuse_background(once, 0.0, 0.0).size());
}

TEST_CASE("scene lift builder matches the batch form and records empty frames") {
  std::mt19937_64 rng(6);
  std::vector<GlobalFrame> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(random_frame(rng, 10, 8, t));
  frames[2].mask = BinaryMask(10, 8, false);
  const SceneLift batch = build_scene_lift(frames, {0.1, 0.25});
  SceneLiftBuilder b({0.1, 0.25});
  for (const auto& f : frames) b.add_frame(f);
  const SceneLift inc = b.finish();
  CHECK(inc.background.positions == batch.background.positions);
  REQUIRE(inc.frame_count() == 5);
  for (std::size_t t = 0; t < 5; ++t)
    CHECK(inc.foreground_per_frame[t].positions == batch.foreground_per_frame[t].positions);
  CHECK(batch.empty_foreground_frames == std::vector<int>{2});
}

TEST_CASE("lift parameter validation") {
  CHECK_THROWS_AS(BackgroundFuser(-1.0), ValidationError);
  CHECK_THROWS_AS(fuse_background({}, 0.1, 0.0), ValidationError);
  CHECK_THROWS_AS(SceneLiftBuilder({0.1, 0.0}).finish(), ValidationError);
}
