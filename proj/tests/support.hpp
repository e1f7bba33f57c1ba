#pragma once

// Shared fixtures and independent oracles for the test suites.

#include "scaffold4d/core.hpp"
#include "scaffold4d/render.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace scaffold4d;

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

inline CameraIntrinsics simple_intrinsics(int w, int h, double f) {
  return {f, f, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi, bool colors = true) {
  PointCloud c;
  std::uniform_int_distribution<int> byte(0, 255);
  for (std::size_t i = 0; i < n; ++i) {
    c.positions.push_back(random_vec(rng, lo, hi).cast<float>());
    if (colors)
      c.colors.push_back(
          Rgb{static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng))});
  }
  return c;
}

/// Per-pixel exhaustive z-buffer: for every pixel scan every point and keep
/// the lexicographically smallest (depth, index) among points whose square
/// splat covers the pixel.
inline DepthFrame brute_force_render(const PointCloud& cloud, const Camera& cam, int radius) {
  const int w = cam.intrinsics.width;
  const int h = cam.intrinsics.height;
  struct P {
    bool ok;
    long px, py;
    float d;
  };
  std::vector<P> proj;
  for (const auto& p : cloud.positions) {
    const Vec3 c = cam.pose.rotation * p.cast<double>() + cam.pose.translation;
    if (!(c.z() > 0.0)) {
      proj.push_back({false, 0, 0, 0});
      continue;
    }
    const double u = cam.intrinsics.fx * c.x() / c.z() + cam.intrinsics.cx;
    const double v = cam.intrinsics.fy * c.y() / c.z() + cam.intrinsics.cy;
    proj.push_back({true, static_cast<long>(std::floor(u + 0.5)), static_cast<long>(std::floor(v + 0.5)),
                    static_cast<float>(c.z())});
  }
  DepthFrame f;
  f.width = w;
  f.height = h;
  f.depth.assign(static_cast<std::size_t>(w) * h, 0.0f);
  f.colors.assign(f.depth.size(), Rgb{0, 0, 0});
  f.visibility = BinaryMask(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float best = std::numeric_limits<float>::infinity();
      long owner = -1;
      for (std::size_t i = 0; i < proj.size(); ++i) {
        if (!proj[i].ok) continue;
        if (std::abs(proj[i].px - x) > radius || std::abs(proj[i].py - y) > radius) continue;
        if (proj[i].d < best) {
          best = proj[i].d;
          owner = static_cast<long>(i);
        }
      }
      if (owner < 0) continue;
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      f.depth[k] = best;
      f.colors[k] = cloud.color_at(static_cast<std::size_t>(owner));
      f.visibility.values[k] = 1;
    }
  }
  return f;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("scaffold4d_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
