#pragma once

// The 4D proxy: one static background cloud plus an aligned foreground cloud
// per frame, and the edits that operate on it.

#include "scaffold4d/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scaffold4d {

struct Proxy4D {
  PointCloud background;
  std::vector<PointCloud> foreground;
  double scene_scale = 0.0;  // background bounding-box diagonal
  std::map<std::string, std::string> provenance;

  std::size_t frame_count() const { return foreground.size(); }
  void validate() const;
};

/// Bounding-box diagonal of the background, or of all foreground points when
/// the background is empty; 0 when there are no points at all.
double scene_scale_of(const PointCloud& background, const std::vector<PointCloud>& foreground);

Proxy4D assemble(PointCloud background, std::vector<PointCloud> foreground);

/// Background followed by foreground[t].
PointCloud frame_view(const Proxy4D& proxy, std::size_t t);

/// p -> pivot + factor * (p - pivot) on every foreground point. Without a
/// pivot each frame scales about its own foreground centroid.
Proxy4D scale_foreground(const Proxy4D& proxy, double factor, const std::optional<Vec3>& pivot);

/// Union of `a` and `b` transformed by `placement`. Output frame t shows
/// a[t + max(0, -offset)] and b[t + max(0, offset)]; the output spans the
/// overlap of both ranges.
Proxy4D composite(const Proxy4D& a, const Proxy4D& b, const SimilarityST& placement, int frame_offset);

inline constexpr std::uint64_t kDecimateSeed = 0x5eed5eedULL;

/// Stratified subsample: one uniformly drawn point from each of `budget`
/// equal index strata, in index order.
PointCloud subsample(const PointCloud& cloud, std::size_t budget, std::uint64_t seed);

/// Caps every frame view at `budget` points, splitting the budget between
/// background and foreground by their share of the largest frame view.
Proxy4D decimate(const Proxy4D& proxy, std::size_t budget);

/// Directory layout: background.ply, fg_%04d.ply, proxy.json.
void save_proxy(const Proxy4D& proxy, const std::filesystem::path& dir);
Proxy4D load_proxy(const std::filesystem::path& dir);

}  // namespace scaffold4d
