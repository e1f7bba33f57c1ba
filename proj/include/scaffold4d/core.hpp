#pragma once

// Geometry types shared by every stage of the pipeline.
//
// Conventions (fixed for the whole library):
//   * extrinsics are world-to-camera: x_cam = R * x_world + t
//   * camera looks down +z, image x grows right and image y grows down
//   * image origin is the top-left pixel and pixel centers sit on integer
//     coordinates, so pixel (i, j) covers [i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)
//   * depth is the camera-frame z coordinate, not the ray length

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace scaffold4d {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;
using Pixel = Eigen::Vector2d;
using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kDefaultColor{128, 128, 128};

/// Integer index of the pixel whose footprint contains `coord`.
inline long pixel_index(double coord) { return static_cast<long>(std::floor(coord + 0.5)); }

/// World-to-camera rigid transform.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }
  /// Camera center in world coordinates.
  Vec3 center() const { return -(rotation.transpose() * translation); }

  RigidPose inverse() const;
  /// Composition `*this ∘ rhs`: apply rhs first.
  RigidPose operator*(const RigidPose& rhs) const;

  /// Orthonormal rotation with det +1 within `tol` (max-abs entry error).
  bool is_valid(double tol = 1e-6) const;
  void validate(double tol = 1e-6) const;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
  bool operator==(const CameraIntrinsics&) const = default;
};

struct Camera {
  CameraIntrinsics intrinsics;
  RigidPose pose;

  void validate() const;
};

struct Projection {
  Pixel pixel;
  double depth = 0.0;
};

/// Pinhole projection. Empty when the point is not strictly in front of the
/// camera. The pixel may fall outside the image; callers clip.
std::optional<Projection> project(const Vec3& point, const Camera& camera);

/// Inverse of `project` for a known camera-frame depth. Throws on depth <= 0.
Vec3 unproject(const Pixel& pixel, double depth, const Camera& camera);

/// Row-major H x W grid of lifted 3D points. Invalid pixels hold a NaN
/// triple and, when a confidence grid is present, confidence 0.
struct PointMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3f> points;
  std::vector<float> confidence;  // empty or width*height entries

  PointMap() = default;
  PointMap(int w, int h, bool with_confidence);

  static Vec3f invalid_point() { return Vec3f::Constant(std::numeric_limits<float>::quiet_NaN()); }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool has_confidence() const { return !confidence.empty(); }
  bool is_valid(std::size_t i) const { return points[i].allFinite(); }
  float confidence_at(std::size_t i) const {
    if (!is_valid(i)) return 0.0f;
    return has_confidence() ? confidence[i] : 1.0f;
  }
  void set_invalid(std::size_t i);

  void validate() const;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // 0 or 1, row-major

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill);

  std::size_t pixel_count() const { return values.size(); }
  bool operator[](std::size_t i) const { return values[i] != 0; }
  bool at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill);
};

/// Unordered colored points. `colors` and `confidences` are either empty or
/// parallel to `positions`.
struct PointCloud {
  std::vector<Vec3f> positions;
  std::vector<Rgb> colors;
  std::vector<float> confidences;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_confidences() const { return !confidences.empty(); }
  Rgb color_at(std::size_t i) const { return has_colors() ? colors[i] : kDefaultColor; }

  void reserve(std::size_t n);
  /// Appends `other`; optional attributes present on either side are kept,
  /// with defaults filling the side that lacked them.
  void append(const PointCloud& other);
  /// Copies point `i` of `other` onto the end of this cloud.
  void push_from(const PointCloud& other, std::size_t i);

  Vec3 centroid() const;
  void validate() const;
  bool operator==(const PointCloud&) const = default;
};

struct BoundingBox {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return !(min.array() <= max.array()).all(); }
  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const PointCloud& cloud);
  double diagonal() const { return empty() ? 0.0 : (max - min).norm(); }
};

/// x -> scale * x + translation.
struct SimilarityST {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * p + translation; }
  /// Applies `*this` first and `next` second.
  SimilarityST then(const SimilarityST& next) const {
    return {next.scale * scale, next.scale * translation + next.translation};
  }
  void validate() const;
};

PointCloud apply_similarity(const SimilarityST& st, const PointCloud& cloud);

/// Points at pixels with mask == keep, confidence >= conf_min and a finite
/// position, in row-major order. Colors are taken from `colors` when given.
PointCloud mask_pointmap(const PointMap& pm, const BinaryMask& mask, bool keep, double conf_min,
                         const RgbImage* colors = nullptr);

}  // namespace scaffold4d
