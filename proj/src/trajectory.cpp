#include "scaffold4d/trajectory.hpp"

#include "scaffold4d/error.hpp"

#include <algorithm>
#include <numbers>
#include <string>

namespace scaffold4d {
namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void Trajectory::validate() const {
  if (cameras.empty()) throw ValidationError("trajectory has no frames");
  for (std::size_t t = 0; t < cameras.size(); ++t) {
    try {
      cameras[t].validate();
    } catch (const ValidationError& e) {
      throw ValidationError("trajectory frame " + std::to_string(t) + ": " + e.what());
    }
  }
  if (!time_warp.empty() && time_warp.size() != cameras.size())
    throw ValidationError("time warp length differs from trajectory length");
  if (source_frame_count && *source_frame_count < 1) throw ValidationError("source frame count must be >= 1");
  for (int s : time_warp) {
    if (s < 0 || (source_frame_count && s >= *source_frame_count))
      throw ValidationError("time warp index " + std::to_string(s) + " outside the source range");
  }
}

RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = target - eye;
  if (!(forward.norm() > 0.0) || !forward.allFinite()) throw ValidationError("look_at: eye and target coincide");
  const Vec3 z = forward.normalized();
  Vec3 x = up.cross(z);
  if (!(x.norm() > 1e-9 * up.norm())) throw ValidationError("look_at: up vector is parallel to the view direction");
  x.normalize();
  const Vec3 y = z.cross(x);
  RigidPose pose;
  pose.rotation.row(0) = x.transpose();
  pose.rotation.row(1) = y.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -(pose.rotation * eye);
  return pose;
}

Vec3 orbit_offset(double yaw_rad, double pitch_rad, double radius) {
  return radius * Vec3(std::sin(yaw_rad) * std::cos(pitch_rad), -std::sin(pitch_rad),
                       -std::cos(yaw_rad) * std::cos(pitch_rad));
}

Trajectory orbit(const OrbitParams& p) {
  if (!(p.radius > 0.0)) throw ValidationError("orbit radius must be positive");
  if (p.frames < 1) throw ValidationError("orbit needs at least one frame");
  if (!(std::abs(p.pitch_deg) < 90.0)) throw ValidationError("orbit pitch must lie strictly inside (-90, 90) degrees");
  p.intrinsics.validate();
  Trajectory traj;
  traj.cameras.reserve(p.frames);
  for (int t = 0; t < p.frames; ++t) {
    const double frac = p.frames == 1 ? 0.0 : static_cast<double>(t) / (p.frames - 1);
    const double yaw = deg2rad(p.start_yaw_deg + p.sweep_yaw_deg * frac);
    const Vec3 eye = p.center + orbit_offset(yaw, deg2rad(p.pitch_deg), p.radius);
    traj.cameras.push_back(Camera{p.intrinsics, look_at(eye, p.center, p.up)});
  }
  return traj;
}

Trajectory interpolate_keyframes(const std::vector<CameraKeyframe>& keys, int frames) {
  if (keys.empty()) throw ValidationError("keyframe interpolation needs at least one key");
  if (frames < 1) throw ValidationError("keyframe interpolation needs at least one output frame");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i].camera.validate();
    if (i > 0 && keys[i].frame <= keys[i - 1].frame)
      throw ValidationError("keyframe indices must be strictly increasing");
    if (keys[i].camera.intrinsics.width != keys[0].camera.intrinsics.width ||
        keys[i].camera.intrinsics.height != keys[0].camera.intrinsics.height)
      throw ValidationError("keyframes must share the image size");
  }

  Trajectory traj;
  traj.cameras.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    if (t <= keys.front().frame) {
      traj.cameras.push_back(keys.front().camera);
      continue;
    }
    if (t >= keys.back().frame) {
      traj.cameras.push_back(keys.back().camera);
      continue;
    }
    const auto next = std::upper_bound(keys.begin(), keys.end(), t,
                                       [](int frame, const CameraKeyframe& k) { return frame < k.frame; });
    const CameraKeyframe& b = *next;
    const CameraKeyframe& a = *(next - 1);
    if (t == a.frame) {
      traj.cameras.push_back(a.camera);
      continue;
    }
    const double alpha = static_cast<double>(t - a.frame) / (b.frame - a.frame);
    const Eigen::Quaterniond qa(a.camera.pose.rotation);
    const Eigen::Quaterniond qb(b.camera.pose.rotation);

    Camera cam;
    cam.pose.rotation = qa.slerp(alpha, qb).normalized().toRotationMatrix();
    cam.pose.translation = (1.0 - alpha) * a.camera.pose.translation + alpha * b.camera.pose.translation;
    const auto& ka = a.camera.intrinsics;
    const auto& kb = b.camera.intrinsics;
    cam.intrinsics = ka;
    cam.intrinsics.fx = (1.0 - alpha) * ka.fx + alpha * kb.fx;
    cam.intrinsics.fy = (1.0 - alpha) * ka.fy + alpha * kb.fy;
    cam.intrinsics.cx = (1.0 - alpha) * ka.cx + alpha * kb.cx;
    cam.intrinsics.cy = (1.0 - alpha) * ka.cy + alpha * kb.cy;
    traj.cameras.push_back(cam);
  }
  return traj;
}

Trajectory bullet_time(const Trajectory& traj, int freeze_at, FrameSpan span) {
  traj.validate();
  if (freeze_at < 0 || (traj.source_frame_count && freeze_at >= *traj.source_frame_count))
    throw ValidationError("freeze frame " + std::to_string(freeze_at) + " outside the source range");
  if (span.begin < 0 || span.end > static_cast<int>(traj.size()))
    throw ValidationError("bullet-time span exceeds the trajectory length");
  Trajectory out = traj;
  out.time_warp.resize(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const int ti = static_cast<int>(t);
    out.time_warp[t] = (ti >= span.begin && ti < span.end) ? freeze_at : ti;
  }
  out.validate();
  return out;
}

}  // namespace scaffold4d
