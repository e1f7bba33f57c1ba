#pragma once

// Global scene assembly: split every lifted frame into background and
// visible-surface foreground and fuse the static background over time.

#include "scaffold4d/core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

namespace scaffold4d {

struct GlobalFrame {
  int index = 0;
  PointMap pointmap;
  BinaryMask mask;  // true on the dynamic object
  std::optional<RgbImage> colors;

  void validate() const;
};

struct FrameSplit {
  PointCloud background;
  PointCloud foreground;
};

FrameSplit split_frame(const GlobalFrame& frame, double conf_min);

struct LiftParams {
  double conf_min = 0.1;
  double voxel = 0.0;  // 0 keeps the raw union
};

/// Streaming union of background clouds. With a positive voxel size the first
/// point seen in each cubic cell represents it.
class BackgroundFuser {
 public:
  explicit BackgroundFuser(double voxel);

  void add(const PointCloud& cloud);
  const PointCloud& cloud() const { return cloud_; }
  PointCloud take() { return std::move(cloud_); }

  using Cell = std::array<std::int64_t, 3>;
  static Cell cell_of(const Vec3f& p, double voxel);

 private:
  struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept;
  };

  double voxel_;
  PointCloud cloud_;
  std::unordered_set<Cell, CellHash> occupied_;
};

PointCloud fuse_background(const std::vector<GlobalFrame>& frames, double conf_min, double voxel);

struct SceneLift {
  PointCloud background;
  std::vector<PointCloud> foreground_per_frame;
  std::vector<int> empty_foreground_frames;

  std::size_t frame_count() const { return foreground_per_frame.size(); }
};

/// Incremental form of build_scene_lift for sequences too large to hold in
/// memory; frames must arrive in order.
class SceneLiftBuilder {
 public:
  explicit SceneLiftBuilder(const LiftParams& params);

  void add_frame(const GlobalFrame& frame);
  SceneLift finish();

 private:
  LiftParams params_;
  BackgroundFuser fuser_;
  SceneLift lift_;
};

SceneLift build_scene_lift(const std::vector<GlobalFrame>& frames, const LiftParams& params);

}  // namespace scaffold4d
