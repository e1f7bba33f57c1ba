#include "scaffold4d/lift.hpp"

#include "scaffold4d/error.hpp"

#include <cmath>
#include <string>

namespace scaffold4d {

void GlobalFrame::validate() const {
  pointmap.validate();
  if (mask.width != pointmap.width || mask.height != pointmap.height)
    throw ValidationError("frame " + std::to_string(index) + ": mask size differs from point map size");
  if (colors && (colors->width != pointmap.width || colors->height != pointmap.height))
    throw ValidationError("frame " + std::to_string(index) + ": color image size differs from point map size");
}

FrameSplit split_frame(const GlobalFrame& frame, double conf_min) {
  frame.validate();
  const RgbImage* colors = frame.colors ? &*frame.colors : nullptr;
  return {mask_pointmap(frame.pointmap, frame.mask, false, conf_min, colors),
          mask_pointmap(frame.pointmap, frame.mask, true, conf_min, colors)};
}

BackgroundFuser::BackgroundFuser(double voxel) : voxel_(voxel) {
  if (!(voxel >= 0.0) || !std::isfinite(voxel)) throw ValidationError("voxel size must be finite and >= 0");
}

BackgroundFuser::Cell BackgroundFuser::cell_of(const Vec3f& p, double voxel) {
  Cell c;
  for (int i = 0; i < 3; ++i) c[i] = static_cast<std::int64_t>(std::floor(static_cast<double>(p[i]) / voxel));
  return c;
}

std::size_t BackgroundFuser::CellHash::operator()(const Cell& c) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto v : c) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

void BackgroundFuser::add(const PointCloud& cloud) {
  if (voxel_ == 0.0) {
    cloud_.append(cloud);
    return;
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (occupied_.insert(cell_of(cloud.positions[i], voxel_)).second) cloud_.push_from(cloud, i);
  }
}

PointCloud fuse_background(const std::vector<GlobalFrame>& frames, double conf_min, double voxel) {
  if (frames.empty()) throw ValidationError("background fusion needs at least one frame");
  BackgroundFuser fuser(voxel);
  for (const auto& f : frames) fuser.add(split_frame(f, conf_min).background);
  return fuser.take();
}

SceneLiftBuilder::SceneLiftBuilder(const LiftParams& params) : params_(params), fuser_(params.voxel) {}

void SceneLiftBuilder::add_frame(const GlobalFrame& frame) {
  FrameSplit split = split_frame(frame, params_.conf_min);
  fuser_.add(split.background);
  if (split.foreground.empty()) lift_.empty_foreground_frames.push_back(static_cast<int>(lift_.frame_count()));
  lift_.foreground_per_frame.push_back(std::move(split.foreground));
}

SceneLift SceneLiftBuilder::finish() {
  if (lift_.frame_count() == 0) throw ValidationError("scene lift needs at least one frame");
  lift_.background = fuser_.take();
  return std::move(lift_);
}

SceneLift build_scene_lift(const std::vector<GlobalFrame>& frames, const LiftParams& params) {
  SceneLiftBuilder builder(params);
  for (const auto& f : frames) builder.add_frame(f);
  return builder.finish();
}

}  // namespace scaffold4d
