#include "scaffold4d/synth.hpp"

#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace scaffold4d::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Ray {
  Vec3 origin;
  Vec3 dir;  // camera-frame z component is 1, so the hit parameter is the depth
};

struct Hit {
  double depth = kInf;
  Vec3 normal = Vec3::Zero();
  Rgb color{0, 0, 0};
  bool object = false;
};

Ray pixel_ray(const Camera& cam, int u, int v) {
  const auto& k = cam.intrinsics;
  const Vec3 d_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  return {cam.pose.center(), cam.pose.rotation.transpose() * d_cam};
}

std::uint8_t shade(std::uint8_t c, double f) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(c * f), 0L, 255L));
}

Rgb shade(const Rgb& c, double f) { return {shade(c[0], f), shade(c[1], f), shade(c[2], f)}; }

Rgb checker(const Rgb& base, const Vec3& p, int face) {
  const long parity = static_cast<long>(std::floor(p.x()) + std::floor(p.y()) + std::floor(p.z()));
  const double f = (0.8 + 0.03 * face) * ((parity & 1) ? 0.85 : 1.0);
  return shade(base, f);
}

/// Exit of a ray starting inside the box.
void hit_room(const Ray& ray, const BoxPrimitive& room, Hit& hit) {
  double best = kInf;
  int face = -1;
  for (int a = 0; a < 3; ++a) {
    if (ray.dir[a] == 0.0) continue;
    const double bound = ray.dir[a] > 0.0 ? room.max[a] : room.min[a];
    const double lambda = (bound - ray.origin[a]) / ray.dir[a];
    if (lambda > 0.0 && lambda < best) {
      best = lambda;
      face = 2 * a + (ray.dir[a] > 0.0 ? 1 : 0);
    }
  }
  if (face < 0 || best >= hit.depth) return;
  hit.depth = best;
  hit.normal = Vec3::Zero();
  hit.normal[face / 2] = (face % 2) ? -1.0 : 1.0;
  hit.color = checker(room.color, ray.origin + best * ray.dir, face);
  hit.object = false;
}

/// Entry of a ray into a solid box; returns the face index or -1.
int box_entry(const Ray& ray, const Vec3& lo, const Vec3& hi, double& lambda) {
  double near = -kInf;
  double far = kInf;
  int face = -1;
  for (int a = 0; a < 3; ++a) {
    if (ray.dir[a] == 0.0) {
      if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) return -1;
      continue;
    }
    double t0 = (lo[a] - ray.origin[a]) / ray.dir[a];
    double t1 = (hi[a] - ray.origin[a]) / ray.dir[a];
    int f = 2 * a;
    if (t0 > t1) {
      std::swap(t0, t1);
      f = 2 * a + 1;
    }
    if (t0 > near) {
      near = t0;
      face = f;
    }
    far = std::min(far, t1);
  }
  if (near > far || near <= 0.0) return -1;
  lambda = near;
  return face;
}

double sphere_entry(const Ray& ray, const Vec3& c, double r) {
  const Vec3 oc = ray.origin - c;
  const double a = ray.dir.squaredNorm();
  const double b = oc.dot(ray.dir);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - a * cc;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / a;
  return t0 > 0.0 ? t0 : kInf;
}

/// Nearest entry into the union of the object primitives placed by `pose`.
void hit_object(const Ray& ray, const ObjectSpec& obj, const SimilarityST& pose, Hit& hit) {
  for (const auto& prim : obj.primitives) {
    const Vec3 c = pose.apply(prim.center);
    double lambda = kInf;
    Vec3 normal;
    if (prim.kind == ObjectPrimitive::Kind::Sphere) {
      lambda = sphere_entry(ray, c, pose.scale * prim.radius);
      if (lambda < kInf) normal = (ray.origin + lambda * ray.dir - c).normalized();
    } else {
      const Vec3 h = pose.scale * prim.half_extents;
      const int face = box_entry(ray, c - h, c + h, lambda);
      if (face < 0) continue;
      normal = Vec3::Zero();
      normal[face / 2] = (face % 2) ? 1.0 : -1.0;
    }
    if (lambda < hit.depth) {
      hit.depth = lambda;
      hit.normal = normal;
      const double facing = std::abs(normal.dot(ray.dir.normalized()));
      hit.color = shade(obj.color, 0.55 + 0.45 * facing);
      hit.object = true;
    }
  }
}

Vec3 vec3_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json json_of(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Rgb rgb_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected an RGB triple");
  Rgb c{};
  for (int i = 0; i < 3; ++i) {
    const int v = j[i].get<int>();
    if (v < 0 || v > 255) throw ValidationError("color channel outside [0, 255]");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

json json_of(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

BoxPrimitive box_of(const json& j, const BoxPrimitive& fallback) {
  BoxPrimitive b = fallback;
  if (j.contains("min")) b.min = vec3_of(j["min"]);
  if (j.contains("max")) b.max = vec3_of(j["max"]);
  if (j.contains("color")) b.color = rgb_of(j["color"]);
  return b;
}

json json_of(const BoxPrimitive& b) { return {{"min", json_of(b.min)}, {"max", json_of(b.max)}, {"color", json_of(b.color)}}; }

bool inside_primitive(const ObjectPrimitive& prim, const Vec3& p) {
  if (prim.kind == ObjectPrimitive::Kind::Sphere) return (p - prim.center).norm() < prim.radius * (1.0 - 1e-9);
  return ((p - prim.center).cwiseAbs().array() < prim.half_extents.array() * (1.0 - 1e-9)).all();
}

double primitive_area(const ObjectPrimitive& prim) {
  if (prim.kind == ObjectPrimitive::Kind::Sphere) return 4.0 * std::numbers::pi * prim.radius * prim.radius;
  const Vec3& h = prim.half_extents;
  return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
}

void sample_grid_face(PointCloud& cloud, const Vec3& origin, const Vec3& e1, const Vec3& e2, double spacing,
                      const Rgb& color, int face) {
  const int n1 = std::max(1, static_cast<int>(std::ceil(e1.norm() / spacing)));
  const int n2 = std::max(1, static_cast<int>(std::ceil(e2.norm() / spacing)));
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      const Vec3 p = origin + (i + 0.5) / n1 * e1 + (j + 0.5) / n2 * e2;
      cloud.positions.push_back(p.cast<float>());
      cloud.colors.push_back(checker(color, p, face));
    }
  }
}

void sample_box_surface(PointCloud& cloud, const BoxPrimitive& box, double spacing) {
  const Vec3 d = box.max - box.min;
  const Vec3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  sample_grid_face(cloud, box.min, ey, ez, spacing, box.color, 0);
  sample_grid_face(cloud, box.min + ex, ey, ez, spacing, box.color, 1);
  sample_grid_face(cloud, box.min, ex, ez, spacing, box.color, 2);
  sample_grid_face(cloud, box.min + ey, ex, ez, spacing, box.color, 3);
  sample_grid_face(cloud, box.min, ex, ey, spacing, box.color, 4);
  sample_grid_face(cloud, box.min + ez, ex, ey, spacing, box.color, 5);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Pushes every finite point of `pm` along its ray from `center` by a
/// per-pixel factor 1 + sigma * n.
void ray_noise(PointMap& pm, const Vec3& center, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < pm.pixel_count(); ++i) {
    if (!pm.is_valid(i)) continue;
    const double f = std::max(0.05, 1.0 + sigma * normal(rng));
    pm.points[i] = (center + f * (pm.points[i].cast<double>() - center)).cast<float>();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("scene size must be positive");
  if (frames < 1) throw ValidationError("scene needs at least one frame");
  if (focal < 0.0 || !std::isfinite(focal)) throw ValidationError("focal must be >= 0");
  if (!(room.min.array() < room.max.array()).all()) throw ValidationError("room min must be below max");
  for (const auto& b : boxes)
    if (!(b.min.array() < b.max.array()).all()) throw ValidationError("box min must be below max");
  if (!(background_spacing > 0.0)) throw ValidationError("background spacing must be positive");
  if (object.primitives.empty()) throw ValidationError("object needs at least one primitive");
  for (const auto& p : object.primitives) {
    if (p.kind == ObjectPrimitive::Kind::Sphere && !(p.radius > 0.0)) throw ValidationError("sphere radius must be positive");
    if (p.kind == ObjectPrimitive::Kind::Box && !(p.half_extents.array() > 0.0).all())
      throw ValidationError("box half extents must be positive");
  }
  if (*std::min_element(object.color.begin(), object.color.end()) > 200)
    throw ValidationError("object color must differ from a white background (min channel <= 200)");
  if (object.samples < 1) throw ValidationError("object samples must be positive");
  if (!(track.scale_start > 0.0) || !(track.scale_end > 0.0)) throw ValidationError("object scale must be positive");
  if (!(canonical.scale > 0.0)) throw ValidationError("canonical scale must be positive");
  if (canonical.width <= 0 || canonical.height <= 0) throw ValidationError("canonical view size must be positive");
  for (const Vec3& c : {camera_start, camera_end})
    if (!((c.array() > room.min.array()).all() && (c.array() < room.max.array()).all()))
      throw ValidationError("source camera must be inside the room");
}

CameraIntrinsics SceneSpec::intrinsics() const {
  const double f = focal > 0.0 ? focal : 0.8 * width;
  return {f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
}

Camera SceneSpec::source_camera(int t) const {
  const double u = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
  const Vec3 c = (1.0 - u) * camera_start + u * camera_end;
  RigidPose pose;
  pose.translation = -c;
  return {intrinsics(), pose};
}

SimilarityST SceneSpec::object_pose(int t) const {
  const double u = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
  const double s = (1.0 - u) * track.scale_start + u * track.scale_end;
  const Vec3 tr = (1.0 - u) * track.translation_start + u * track.translation_end +
                  std::sin(std::numbers::pi * u) * track.wobble;
  return {s, tr};
}

double SceneSpec::object_radius() const {
  double r = 0.0;
  for (const auto& p : object.primitives) {
    const double extent = p.kind == ObjectPrimitive::Kind::Sphere ? p.radius : p.half_extents.norm();
    r = std::max(r, p.center.norm() + extent);
  }
  return r;
}

void NoiseSpec::validate() const {
  if (!(scale_jitter >= 0.0) || !(depth_noise >= 0.0)) throw ValidationError("noise sigmas must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) throw ValidationError("outlier fraction must be in [0, 1]");
}

SceneSpec scene_from_json(std::string_view text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frames = j.value("frames", s.frames);
    s.focal = j.value("focal", s.focal);
    s.seed = j.value("seed", s.seed);
    if (j.contains("room")) s.room = box_of(j["room"], s.room);
    if (j.contains("boxes"))
      for (const auto& b : j["boxes"]) s.boxes.push_back(box_of(b, BoxPrimitive{}));
    s.background_spacing = j.value("background_spacing", s.background_spacing);
    if (j.contains("object")) {
      const json& o = j["object"];
      if (o.contains("color")) s.object.color = rgb_of(o["color"]);
      s.object.samples = o.value("samples", s.object.samples);
      if (o.contains("primitives")) {
        s.object.primitives.clear();
        for (const auto& p : o["primitives"]) {
          ObjectPrimitive prim;
          const std::string kind = p.value("kind", std::string("sphere"));
          if (kind == "sphere") {
            prim.kind = ObjectPrimitive::Kind::Sphere;
          } else if (kind == "box") {
            prim.kind = ObjectPrimitive::Kind::Box;
          } else {
            throw ValidationError("unknown object primitive '" + kind + "'");
          }
          if (p.contains("center")) prim.center = vec3_of(p["center"]);
          prim.radius = p.value("radius", prim.radius);
          if (p.contains("half_extents")) prim.half_extents = vec3_of(p["half_extents"]);
          s.object.primitives.push_back(prim);
        }
      }
    }
    if (j.contains("track")) {
      const json& t = j["track"];
      s.track.scale_start = t.value("scale_start", s.track.scale_start);
      s.track.scale_end = t.value("scale_end", s.track.scale_end);
      if (t.contains("translation_start")) s.track.translation_start = vec3_of(t["translation_start"]);
      if (t.contains("translation_end")) s.track.translation_end = vec3_of(t["translation_end"]);
      if (t.contains("wobble")) s.track.wobble = vec3_of(t["wobble"]);
    }
    if (j.contains("camera")) {
      if (j["camera"].contains("start")) s.camera_start = vec3_of(j["camera"]["start"]);
      if (j["camera"].contains("end")) s.camera_end = vec3_of(j["camera"]["end"]);
    }
    if (j.contains("canonical")) {
      const json& c = j["canonical"];
      s.canonical.scale = c.value("scale", s.canonical.scale);
      s.canonical.width = c.value("width", s.canonical.width);
      s.canonical.height = c.value("height", s.canonical.height);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scene_to_json(const SceneSpec& s) {
  json prims = json::array();
  for (const auto& p : s.object.primitives) {
    json jp = {{"kind", p.kind == ObjectPrimitive::Kind::Sphere ? "sphere" : "box"}, {"center", json_of(p.center)}};
    if (p.kind == ObjectPrimitive::Kind::Sphere)
      jp["radius"] = p.radius;
    else
      jp["half_extents"] = json_of(p.half_extents);
    prims.push_back(jp);
  }
  json boxes = json::array();
  for (const auto& b : s.boxes) boxes.push_back(json_of(b));
  const json j = {
      {"width", s.width},
      {"height", s.height},
      {"frames", s.frames},
      {"focal", s.focal},
      {"seed", s.seed},
      {"room", json_of(s.room)},
      {"boxes", boxes},
      {"background_spacing", s.background_spacing},
      {"object", {{"primitives", prims}, {"color", json_of(s.object.color)}, {"samples", s.object.samples}}},
      {"track",
       {{"scale_start", s.track.scale_start},
        {"scale_end", s.track.scale_end},
        {"translation_start", json_of(s.track.translation_start)},
        {"translation_end", json_of(s.track.translation_end)},
        {"wobble", json_of(s.track.wobble)}}},
      {"camera", {{"start", json_of(s.camera_start)}, {"end", json_of(s.camera_end)}}},
      {"canonical", {{"scale", s.canonical.scale}, {"width", s.canonical.width}, {"height", s.canonical.height}}},
  };
  return j.dump(2);
}

NoiseSpec noise_from_json(std::string_view text) {
  NoiseSpec n;
  try {
    const json j = json::parse(text);
    if (j.contains("noise")) {
      const json& o = j["noise"];
      n.scale_jitter = o.value("scale_jitter", n.scale_jitter);
      n.depth_noise = o.value("depth_noise", n.depth_noise);
      n.outlier_fraction = o.value("outlier_fraction", n.outlier_fraction);
      n.seed = o.value("seed", n.seed);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("noise spec: ") + e.what());
  }
  n.validate();
  return n;
}

// ---------------------------------------------------------------------------
// Truth

Truth generate_truth(const SceneSpec& spec) {
  spec.validate();
  Truth truth;
  sample_box_surface(truth.background, spec.room, spec.background_spacing);
  for (const auto& b : spec.boxes) sample_box_surface(truth.background, b, spec.background_spacing);

  double total_area = 0.0;
  for (const auto& p : spec.object.primitives) total_area += primitive_area(p);
  std::mt19937_64 rng(sub_seed(spec.seed, 0, 100));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < spec.object.primitives.size(); ++k) {
    const auto& prim = spec.object.primitives[k];
    const int n = std::max(1, static_cast<int>(std::lround(spec.object.samples * primitive_area(prim) / total_area)));
    for (int i = 0; i < n; ++i) {
      Vec3 p;
      Vec3 normal;
      if (prim.kind == ObjectPrimitive::Kind::Sphere) {
        // Fibonacci lattice.
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        normal = Vec3(rxy * std::cos(phi), rxy * std::sin(phi), z);
        p = prim.center + prim.radius * normal;
      } else {
        const Vec3& h = prim.half_extents;
        const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
        const double pick = unit(rng) * (areas[0] + areas[1] + areas[2]);
        const int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
        const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
        p = Vec3(h.x() * (2 * unit(rng) - 1), h.y() * (2 * unit(rng) - 1), h.z() * (2 * unit(rng) - 1));
        p[axis] = side * h[axis];
        p += prim.center;
      }
      bool covered = false;
      for (std::size_t m = 0; m < spec.object.primitives.size() && !covered; ++m)
        covered = m != k && inside_primitive(spec.object.primitives[m], p);
      if (covered) continue;
      truth.object_samples.positions.push_back(p.cast<float>());
      truth.object_samples.colors.push_back(spec.object.color);
    }
  }
  for (int t = 0; t < spec.frames; ++t) {
    truth.poses.push_back(spec.object_pose(t));
    truth.object_clouds.push_back(apply_similarity(truth.poses.back(), truth.object_samples));
  }
  return truth;
}

// ---------------------------------------------------------------------------
// Capture

GlobalFrame simulate_capture(const SceneSpec& spec, int t) {
  if (t < 0 || t >= spec.frames) throw ValidationError("frame index outside the scene");
  const Camera cam = spec.source_camera(t);
  const SimilarityST pose = spec.object_pose(t);
  const int w = spec.width;
  const int h = spec.height;
  GlobalFrame frame;
  frame.index = t;
  frame.pointmap = PointMap(w, h, true);
  frame.mask = BinaryMask(w, h, false);
  frame.colors = RgbImage(w, h, Rgb{0, 0, 0});
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Ray ray = pixel_ray(cam, u, v);
      Hit hit;
      hit_room(ray, spec.room, hit);
      for (std::size_t b = 0; b < spec.boxes.size(); ++b) {
        double lambda;
        const int face = box_entry(ray, spec.boxes[b].min, spec.boxes[b].max, lambda);
        if (face >= 0 && lambda < hit.depth) {
          hit.depth = lambda;
          hit.color = checker(spec.boxes[b].color, ray.origin + lambda * ray.dir, face);
          hit.object = false;
        }
      }
      hit_object(ray, spec.object, pose, hit);
      if (hit.depth == kInf) continue;
      const std::size_t i = frame.pointmap.index(u, v);
      frame.pointmap.points[i] = (ray.origin + hit.depth * ray.dir).cast<float>();
      frame.pointmap.confidence[i] = 1.0f;
      frame.mask.values[i] = hit.object ? 1 : 0;
      frame.colors->pixels[i] = hit.color;
    }
  }
  return frame;
}

std::vector<GlobalFrame> simulate_capture(const SceneSpec& spec) {
  std::vector<GlobalFrame> frames;
  for (int t = 0; t < spec.frames; ++t) frames.push_back(simulate_capture(spec, t));
  return frames;
}

// ---------------------------------------------------------------------------
// Monocular degradation

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t frame, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ (stream * 0x632be59bd9b4e019ULL));
}

double frame_jitter(const NoiseSpec& noise, int t) {
  if (noise.scale_jitter == 0.0) return 1.0;
  std::mt19937_64 rng(sub_seed(noise.seed, static_cast<std::uint64_t>(t), 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  return std::exp(noise.scale_jitter * normal(rng));
}

GlobalFrame corrupt_monocular(const GlobalFrame& frame, const Camera& camera, const NoiseSpec& noise,
                              const BoundingBox& box) {
  noise.validate();
  GlobalFrame out = frame;
  if (noise.is_zero()) return out;
  if (noise.outlier_fraction > 0.0 && box.empty()) throw ValidationError("outlier box is empty");
  const Vec3 c = camera.pose.center();
  const double jitter = frame_jitter(noise, frame.index);
  std::mt19937_64 rng(sub_seed(noise.seed, static_cast<std::uint64_t>(frame.index), 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointMap& pm = out.pointmap;
  for (std::size_t i = 0; i < pm.pixel_count(); ++i) {
    if (!pm.is_valid(i)) continue;
    const double n = normal(rng);
    const double pick = unit(rng);
    Vec3 p;
    if (pick < noise.outlier_fraction) {
      for (int a = 0; a < 3; ++a) p[a] = box.min[a] + unit(rng) * (box.max[a] - box.min[a]);
    } else {
      const double f = jitter * (noise.depth_noise > 0.0 ? std::max(0.05, 1.0 + noise.depth_noise * n) : 1.0);
      p = c + f * (pm.points[i].cast<double>() - c);
    }
    pm.points[i] = p.cast<float>();
  }
  return out;
}

BoundingBox outlier_box(const SceneSpec& spec) {
  BoundingBox box;
  box.extend(spec.room.min);
  box.extend(spec.room.max);
  for (const auto& b : spec.boxes) {
    box.extend(b.min);
    box.extend(b.max);
  }
  const double r = spec.object_radius();
  for (int t = 0; t < spec.frames; ++t) {
    const SimilarityST pose = spec.object_pose(t);
    box.extend(pose.translation - Vec3::Constant(pose.scale * r));
    box.extend(pose.translation + Vec3::Constant(pose.scale * r));
  }
  const Vec3 centre = 0.5 * (box.min + box.max);
  const Vec3 half = box.max - centre;
  return {centre - 2.0 * half, centre + 2.0 * half};
}

// ---------------------------------------------------------------------------
// Canonical completion

std::vector<Camera> novel_view_cameras(const SceneSpec& spec, int t) {
  const SimilarityST pose = spec.object_pose(t);
  const double c = spec.canonical.scale;
  const Vec3 source = c * (spec.source_camera(t).pose.center() - pose.translation) / pose.scale;
  const double dist = source.norm();
  const double rho = c * spec.object_radius();
  if (!(dist > 1.5 * rho)) throw ValidationError("source camera too close to the object for canonical views");
  const int w = spec.canonical.width;
  const int h = spec.canonical.height;
  const double f = 0.4 * std::min(w, h) * std::sqrt(dist * dist - rho * rho) / rho;
  const CameraIntrinsics k{f, f, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
  std::vector<Camera> cams;
  for (int view = 1; view <= kNovelViewCount; ++view) {
    const double a = view * std::numbers::pi / 2.0;
    const Mat3 ry = Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
    cams.push_back({k, look_at(ry * source, Vec3::Zero(), Vec3::UnitY())});
  }
  return cams;
}

CanonicalFrame simulate_canonical(const SceneSpec& spec, const GlobalFrame& capture, int t, const NoiseSpec& noise) {
  noise.validate();
  const SimilarityST pose = spec.object_pose(t);
  const double c = spec.canonical.scale;
  const SimilarityST to_canonical{c / pose.scale, -c / pose.scale * pose.translation};

  CanonicalFrame frame;
  frame.index = t;
  frame.ref_mask = capture.mask;
  frame.ref_colors = capture.colors;
  frame.ref_pointmap = PointMap(capture.pointmap.width, capture.pointmap.height, false);
  for (std::size_t i = 0; i < capture.pointmap.pixel_count(); ++i)
    if (capture.pointmap.is_valid(i))
      frame.ref_pointmap.points[i] = to_canonical.apply(capture.pointmap.points[i].cast<double>()).cast<float>();
  const Vec3 source = to_canonical.apply(spec.source_camera(t).pose.center());
  if (noise.depth_noise > 0.0) ray_noise(frame.ref_pointmap, source, noise.depth_noise, sub_seed(noise.seed, t, 10));

  ObjectSpec canonical_object = spec.object;
  const SimilarityST canonical_pose{c, Vec3::Zero()};
  const auto cams = novel_view_cameras(spec, t);
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const Camera& cam = cams[k];
    const int w = cam.intrinsics.width;
    const int h = cam.intrinsics.height;
    NovelView view;
    view.pointmap = PointMap(w, h, false);
    view.image = RgbImage(w, h, Rgb{255, 255, 255});
    const double junk_depth = 2.0 * cam.pose.center().norm();
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const Ray ray = pixel_ray(cam, u, v);
        Hit hit;
        hit_object(ray, canonical_object, canonical_pose, hit);
        const std::size_t i = view.pointmap.index(u, v);
        if (hit.object) {
          view.pointmap.points[i] = (ray.origin + hit.depth * ray.dir).cast<float>();
          view.image->pixels[i] = hit.color;
        } else {
          view.pointmap.points[i] = (ray.origin + junk_depth * ray.dir).cast<float>();
        }
      }
    }
    if (noise.depth_noise > 0.0)
      ray_noise(view.pointmap, cam.pose.center(), noise.depth_noise, sub_seed(noise.seed, t, 11 + k));
    frame.novel_views.push_back(std::move(view));
  }
  return frame;
}

// ---------------------------------------------------------------------------
// Fixtures

std::vector<fs::path> write_fixture(const SceneSpec& spec, const NoiseSpec& noise, const fs::path& dir, int threads) {
  spec.validate();
  noise.validate();
  for (const char* sub : {"global", "masks", "canonical", "truth"}) fs::create_directories(dir / sub);
  const BoundingBox box = outlier_box(spec);
  const auto frames = static_cast<std::size_t>(spec.frames);
  std::vector<std::vector<fs::path>> written(frames);

  parallel_for(frames, threads, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const std::string tag = io::frame_tag(ti);
    auto& files = written[ti];
    const GlobalFrame capture = simulate_capture(spec, t);
    const GlobalFrame global = corrupt_monocular(capture, spec.source_camera(t), noise, box);

    files.push_back(dir / "global" / ("frame_" + tag + ".pmap"));
    io::write_pointmap(global.pointmap, files.back());
    const fs::path stem = dir / "global" / ("frame_" + tag);
    io::write_rgb_planes(*global.colors, stem);
    for (char ch : {'r', 'g', 'b'}) files.push_back(io::rgb_plane_path(stem, ch));
    files.push_back(dir / "masks" / ("mask_" + tag + ".pgm"));
    io::write_mask(global.mask, files.back());

    const CanonicalFrame canon = simulate_canonical(spec, capture, t, NoiseSpec{});
    const fs::path cdir = dir / "canonical" / tag;
    fs::create_directories(cdir);
    files.push_back(cdir / "ref.pmap");
    io::write_pointmap(canon.ref_pointmap, files.back());
    for (std::size_t k = 0; k < canon.novel_views.size(); ++k) {
      const std::string name = "view" + std::to_string(k + 1);
      files.push_back(cdir / (name + ".pmap"));
      io::write_pointmap(canon.novel_views[k].pointmap, files.back());
      io::write_rgb_planes(*canon.novel_views[k].image, cdir / name);
      for (char ch : {'r', 'g', 'b'}) files.push_back(io::rgb_plane_path(cdir / name, ch));
    }
  });

  std::vector<fs::path> out;
  for (auto& f : written) out.insert(out.end(), f.begin(), f.end());

  const Truth truth = generate_truth(spec);
  json track = json::object();
  json scales = json::array(), expected = json::array(), translations = json::array(), jitters = json::array();
  for (int t = 0; t < spec.frames; ++t) {
    const SimilarityST& p = truth.poses[static_cast<std::size_t>(t)];
    scales.push_back(p.scale);
    expected.push_back(p.scale / spec.canonical.scale);
    translations.push_back(json_of(p.translation));
    jitters.push_back(frame_jitter(noise, t));
  }
  BoundingBox tb;
  tb.extend(truth.background);
  track["frames"] = spec.frames;
  track["canonical_scale"] = spec.canonical.scale;
  track["object_scale"] = scales;
  track["expected_fit_scale"] = expected;
  track["translation"] = translations;
  track["depth_jitter"] = jitters;
  track["scene_scale"] = tb.diagonal();
  out.push_back(dir / "truth" / "track.json");
  io::write_text(out.back(), track.dump(2) + "\n");
  out.push_back(dir / "truth" / "background.ply");
  io::write_ply(truth.background, out.back());

  Trajectory source;
  for (int t = 0; t < spec.frames; ++t) source.cameras.push_back(spec.source_camera(t));
  out.push_back(dir / "source_trajectory.json");
  io::write_trajectory(source, out.back());

  json scene = json::parse(scene_to_json(spec));
  scene["noise"] = {{"scale_jitter", noise.scale_jitter},
                    {"depth_noise", noise.depth_noise},
                    {"outlier_fraction", noise.outlier_fraction},
                    {"seed", noise.seed}};
  out.push_back(dir / "scene.json");
  io::write_text(out.back(), scene.dump(2) + "\n");
  return out;
}

}  // namespace scaffold4d::synth
