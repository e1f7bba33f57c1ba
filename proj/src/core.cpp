#include "scaffold4d/core.hpp"

#include "scaffold4d/error.hpp"

#include <string>

namespace scaffold4d {

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidPose RigidPose::operator*(const RigidPose& rhs) const {
  RigidPose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

bool RigidPose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

void RigidPose::validate(double tol) const {
  if (!is_valid(tol)) throw ValidationError("pose rotation is not a proper orthonormal matrix");
}

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("camera width and height must be positive");
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
    throw ValidationError("camera focal lengths must be positive and finite");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw ValidationError("camera principal point must lie inside the image");
}

void Camera::validate() const {
  intrinsics.validate();
  pose.validate();
}

std::optional<Projection> project(const Vec3& point, const Camera& camera) {
  const Vec3 c = camera.pose.to_camera(point);
  if (!(c.z() > 0.0)) return std::nullopt;
  const auto& k = camera.intrinsics;
  return Projection{Pixel(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy), c.z()};
}

Vec3 unproject(const Pixel& pixel, double depth, const Camera& camera) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw ValidationError("unproject requires a positive finite depth, got " + std::to_string(depth));
  const auto& k = camera.intrinsics;
  const Vec3 c((pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth);
  return camera.pose.to_world(c);
}

PointMap::PointMap(int w, int h, bool with_confidence) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ValidationError("point map dimensions must be positive");
  points.assign(pixel_count(), invalid_point());
  if (with_confidence) confidence.assign(pixel_count(), 0.0f);
}

void PointMap::set_invalid(std::size_t i) {
  points[i] = invalid_point();
  if (has_confidence()) confidence[i] = 0.0f;
}

void PointMap::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("point map dimensions must be positive");
  if (points.size() != pixel_count()) throw ValidationError("point map grid size does not match dimensions");
  if (has_confidence() && confidence.size() != pixel_count())
    throw ValidationError("confidence grid size does not match dimensions");
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const float c = confidence[i];
    if (!(c >= 0.0f && c <= 1.0f)) throw ValidationError("confidence outside [0, 1]");
    if (!points[i].allFinite() && c != 0.0f) throw ValidationError("invalid pixel with nonzero confidence");
  }
}

BinaryMask::BinaryMask(int w, int h, bool fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ValidationError("mask dimensions must be positive");
  values.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
  std::size_t n = 0;
  for (auto v : values) n += v != 0;
  return n;
}

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ValidationError("image dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

void PointCloud::reserve(std::size_t n) {
  positions.reserve(n);
  if (has_colors()) colors.reserve(n);
  if (has_confidences()) confidences.reserve(n);
}

void PointCloud::append(const PointCloud& other) {
  const std::size_t old = size();
  if (other.has_colors() && !has_colors()) colors.assign(old, kDefaultColor);
  if (other.has_confidences() && !has_confidences()) confidences.assign(old, 1.0f);
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  if (has_colors()) {
    if (other.has_colors())
      colors.insert(colors.end(), other.colors.begin(), other.colors.end());
    else
      colors.resize(size(), kDefaultColor);
  }
  if (has_confidences()) {
    if (other.has_confidences())
      confidences.insert(confidences.end(), other.confidences.begin(), other.confidences.end());
    else
      confidences.resize(size(), 1.0f);
  }
}

void PointCloud::push_from(const PointCloud& other, std::size_t i) {
  // An empty cloud adopts the attribute layout of its first source.
  const bool with_colors = empty() ? other.has_colors() : has_colors();
  const bool with_conf = empty() ? other.has_confidences() : has_confidences();
  positions.push_back(other.positions[i]);
  if (with_colors) colors.push_back(other.color_at(i));
  if (with_conf) confidences.push_back(other.has_confidences() ? other.confidences[i] : 1.0f);
}

Vec3 PointCloud::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : positions) sum += p.cast<double>();
  return empty() ? sum : Vec3(sum / static_cast<double>(size()));
}

void PointCloud::validate() const {
  if (has_colors() && colors.size() != positions.size())
    throw ValidationError("point cloud color list length differs from position count");
  if (has_confidences() && confidences.size() != positions.size())
    throw ValidationError("point cloud confidence list length differs from position count");
  for (const auto& p : positions)
    if (!p.allFinite()) throw ValidationError("point cloud contains a non-finite position");
}

void BoundingBox::extend(const PointCloud& cloud) {
  for (const auto& p : cloud.positions) extend(Vec3(p.cast<double>()));
}

void SimilarityST::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("similarity scale must be positive and finite");
  if (!translation.allFinite()) throw ValidationError("similarity translation must be finite");
}

PointCloud apply_similarity(const SimilarityST& st, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.positions) p = st.apply(p.cast<double>()).cast<float>();
  return out;
}

PointCloud mask_pointmap(const PointMap& pm, const BinaryMask& mask, bool keep, double conf_min,
                         const RgbImage* colors) {
  if (pm.width != mask.width || pm.height != mask.height)
    throw ValidationError("mask dimensions " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          " do not match point map " + std::to_string(pm.width) + "x" +
                          std::to_string(pm.height));
  if (colors && (colors->width != pm.width || colors->height != pm.height))
    throw ValidationError("color image dimensions do not match point map");

  PointCloud out;
  const bool with_conf = pm.has_confidence();
  for (std::size_t i = 0; i < pm.pixel_count(); ++i) {
    if (mask[i] != keep || !pm.is_valid(i)) continue;
    const float c = pm.confidence_at(i);
    if (c < conf_min) continue;
    out.positions.push_back(pm.points[i]);
    if (colors) out.colors.push_back(colors->pixels[i]);
    if (with_conf) out.confidences.push_back(c);
  }
  return out;
}

}  // namespace scaffold4d
