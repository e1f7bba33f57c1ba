#pragma once

// Z-buffer point splatting of proxy frame views into depth scaffolds.

#include "scaffold4d/core.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/proxy.hpp"
#include "scaffold4d/trajectory.hpp"

#include <span>
#include <vector>

namespace scaffold4d {

struct RenderConfig {
  int splat_radius = 1;     // square splat of side 2r + 1 pixels
  int dilation_passes = 0;  // hole filling passes after splatting

  void validate() const;
};

struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<float> depth;  // camera-frame z, 0 = no geometry
  BinaryMask visibility;     // depth > 0
  std::vector<Rgb> colors;   // color of the winning point, black on holes

  bool operator==(const DepthFrame&) const = default;
};

/// Every point covers the (2r+1)^2 pixels around its projection; each pixel
/// keeps the smallest depth, ties going to the lower point index. With
/// threads > 1 points are split into chunks whose buffers are merged
/// lexicographically on (depth, index), which reproduces the serial result.
DepthFrame render_depth(const PointCloud& cloud, const Camera& camera, const RenderConfig& cfg, int threads = 1);

/// Renders the concatenation of `clouds` without materializing it.
DepthFrame render_depth(std::span<const PointCloud* const> clouds, const Camera& camera, const RenderConfig& cfg,
                        int threads = 1);

/// Fills holes with at least 5 visible 8-neighbours using their minimum
/// depth; repeats up to `passes` times.
void dilate_holes(DepthFrame& frame, int passes);

struct RenderStats {
  std::vector<std::size_t> points_per_frame;
  double seconds = 0.0;
  double frames_per_second = 0.0;
};

struct RenderedSequence {
  io::DepthSequence depth;
  std::vector<BinaryMask> visibility;
  RenderStats stats;
};

/// Output frame t renders frame_view(proxy, traj.source_frame(t)) through
/// traj.cameras[t]. Frames render in parallel.
RenderedSequence render_sequence(const Proxy4D& proxy, const Trajectory& traj, const RenderConfig& cfg,
                                 int threads = 1);

}  // namespace scaffold4d
