#pragma once

#include "scaffold4d/core.hpp"

#include <optional>
#include <vector>

namespace scaffold4d {

/// Target camera path. `time_warp[t]` names the proxy frame rendered at
/// output frame t; an empty warp means output frame t shows proxy frame t.
struct Trajectory {
  std::vector<Camera> cameras;
  std::vector<int> time_warp;
  std::optional<int> source_frame_count;

  std::size_t size() const { return cameras.size(); }
  int source_frame(std::size_t t) const { return time_warp.empty() ? static_cast<int>(t) : time_warp[t]; }
  void validate() const;
};

struct CameraKeyframe {
  int frame = 0;
  Camera camera;
};

/// Pose at `eye` whose +z axis points at `target`. The camera +y axis (image
/// rows growing downward) follows `up`; in the y-down world frame used by the
/// synthetic scenes pass (0, 1, 0).
RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

struct OrbitParams {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  double start_yaw_deg = 0.0;
  double sweep_yaw_deg = 180.0;
  double pitch_deg = 0.0;
  int frames = 45;
  CameraIntrinsics intrinsics;
  Vec3 up = Vec3::UnitY();
};

/// Camera offset from the orbit center for a yaw/pitch pair in radians.
/// Yaw 0, pitch 0 places the camera on the -z side looking along +z; positive
/// pitch raises the camera (toward -y).
Vec3 orbit_offset(double yaw_rad, double pitch_rad, double radius);

/// Object-centred orbit: frame t sits at yaw start + sweep * t / (T - 1).
Trajectory orbit(const OrbitParams& params);

/// Rotation slerp and linear translation between keyframes; frames outside
/// the keyed range clamp to the nearest key.
Trajectory interpolate_keyframes(const std::vector<CameraKeyframe>& keys, int frames);

/// Half-open output-frame range [begin, end).
struct FrameSpan {
  int begin = 0;
  int end = 0;
};

/// Freezes the source time at `freeze_at` for output frames inside `span`;
/// identity elsewhere.
Trajectory bullet_time(const Trajectory& traj, int freeze_at, FrameSpan span);

}  // namespace scaffold4d
