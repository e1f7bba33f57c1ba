#pragma once

// Synthetic dynamic scenes with known ground truth, plus emulations of the
// learned stages that normally feed the pipeline: monocular lifting (with
// per-frame scale drift, depth noise and outliers), segmentation, and
// canonical multi-view completion.
//
// Scenes are ray cast analytically, so every emitted point lies exactly on
// the visible surface it stands for.

#include "scaffold4d/complete.hpp"
#include "scaffold4d/core.hpp"
#include "scaffold4d/lift.hpp"
#include "scaffold4d/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scaffold4d::synth {

struct BoxPrimitive {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
  Rgb color{90, 110, 140};
};

/// Object-space primitive; the object is the union of its primitives.
struct ObjectPrimitive {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 0.6;                            // sphere
  Vec3 half_extents = Vec3::Constant(0.4);        // box
};

struct ObjectSpec {
  std::vector<ObjectPrimitive> primitives{ObjectPrimitive{}};
  Rgb color{200, 70, 50};
  int samples = 20000;  // surface samples of the truth cloud
};

/// Object placement X -> scale_t * X + translation_t. Scale and translation
/// move linearly from start to end; `wobble` adds wobble * sin(pi * u) with
/// u = t / (T - 1).
struct TrackSpec {
  double scale_start = 1.0;
  double scale_end = 1.0;
  Vec3 translation_start{0.0, 0.3, 4.0};
  Vec3 translation_end{0.0, 0.3, 4.0};
  Vec3 wobble = Vec3::Zero();
};

struct CanonicalSpec {
  double scale = 1.0;  // canonical = scale * object space
  int width = 256;
  int height = 256;
};

struct SceneSpec {
  int width = 832;
  int height = 480;
  int frames = 45;
  double focal = 0.0;  // 0 selects 0.8 * width
  std::uint64_t seed = 1;
  BoxPrimitive room{Vec3(-4.0, -2.5, -1.0), Vec3(4.0, 2.0, 9.0), Rgb{150, 150, 160}};
  std::vector<BoxPrimitive> boxes;
  double background_spacing = 0.05;
  ObjectSpec object;
  TrackSpec track;
  Vec3 camera_start = Vec3::Zero();  // source camera centres; rotation stays identity
  Vec3 camera_end = Vec3::Zero();
  CanonicalSpec canonical;

  void validate() const;
  CameraIntrinsics intrinsics() const;
  Camera source_camera(int t) const;
  SimilarityST object_pose(int t) const;
  /// Bounding-sphere radius of the object in object space.
  double object_radius() const;
};

struct NoiseSpec {
  double scale_jitter = 0.0;      // sigma of the per-frame lognormal depth multiplier
  double depth_noise = 0.0;       // sigma of the per-pixel depth factor along the ray
  double outlier_fraction = 0.0;  // fraction of valid pixels replaced by outliers
  std::uint64_t seed = 0;

  void validate() const;
  bool is_zero() const { return scale_jitter == 0.0 && depth_noise == 0.0 && outlier_fraction == 0.0; }
};

SceneSpec scene_from_json(std::string_view text);
std::string scene_to_json(const SceneSpec& spec);
/// Reads the optional "noise" object of a scene document; zero noise if absent.
NoiseSpec noise_from_json(std::string_view text);

struct Truth {
  PointCloud background;
  PointCloud object_samples;            // object space
  std::vector<PointCloud> object_clouds;  // global space, one per frame
  std::vector<SimilarityST> poses;       // (gt_s_t, gt_t_t)
};

Truth generate_truth(const SceneSpec& spec);

/// Noiseless lifted frame seen by the source camera: visible surface points,
/// object mask and colors, confidence 1.
GlobalFrame simulate_capture(const SceneSpec& spec, int t);
std::vector<GlobalFrame> simulate_capture(const SceneSpec& spec);

/// Derived seed for one frame and one random stream.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t frame, std::uint64_t stream);

/// Per-frame depth multiplier exp(scale_jitter * n).
double frame_jitter(const NoiseSpec& noise, int t);

/// Monocular degradation of one frame captured by `camera`: every point is
/// pushed along its viewing ray by the frame jitter and a per-pixel factor,
/// then a random subset is replaced by points drawn uniformly from `outlier_box`.
GlobalFrame corrupt_monocular(const GlobalFrame& frame, const Camera& camera, const NoiseSpec& noise,
                              const BoundingBox& outlier_box);

/// Box twice the size of the truth bounding box, about the same centre.
BoundingBox outlier_box(const SceneSpec& spec);

/// Canonical object space for frame t: the source-view point map mapped into
/// canonical coordinates (object points at mask pixels, background elsewhere)
/// and four views of the isolated object at 90 degree azimuth steps, with
/// white backgrounds. `noise.depth_noise` perturbs the canonical point maps.
CanonicalFrame simulate_canonical(const SceneSpec& spec, const GlobalFrame& capture, int t, const NoiseSpec& noise);

/// Cameras of the four novel views of frame t in canonical space.
std::vector<Camera> novel_view_cameras(const SceneSpec& spec, int t);

/// Writes the fixture directory consumed by `build-proxy`:
///   global/frame_%04d.pmap (+ _r/_g/_b.pgm)   lifted frames
///   masks/mask_%04d.pgm                        object masks
///   canonical/%04d/ref.pmap, view{k}.pmap, view{k}_{r,g,b}.pgm
///   truth/track.json, truth/background.ply     ground truth
///   source_trajectory.json, scene.json
/// Returns the written files.
std::vector<std::filesystem::path> write_fixture(const SceneSpec& spec, const NoiseSpec& noise,
                                                 const std::filesystem::path& dir, int threads = 1);

}  // namespace scaffold4d::synth
