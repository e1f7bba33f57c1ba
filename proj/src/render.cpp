#include "scaffold4d/render.hpp"

#include "scaffold4d/error.hpp"
#include "scaffold4d/parallel.hpp"

#include <chrono>
#include <cstdint>
#include <limits>
#include <string>

namespace scaffold4d {
namespace {

constexpr float kEmpty = std::numeric_limits<float>::infinity();
constexpr std::uint64_t kNoOwner = std::numeric_limits<std::uint64_t>::max();

struct ZBuffer {
  std::vector<float> depth;
  std::vector<std::uint64_t> owner;

  explicit ZBuffer(std::size_t n) : depth(n, kEmpty), owner(n, kNoOwner) {}
};

struct IndexedCloud {
  const PointCloud* cloud;
  std::uint64_t offset;  // global index of the first point
};

// Splats points [begin, end) of the concatenated clouds. Points arrive in
// increasing index order, so a strict comparison keeps the lowest index on
// equal depths.
void splat_range(const std::vector<IndexedCloud>& clouds, std::uint64_t begin, std::uint64_t end,
                 const Camera& camera, int radius, ZBuffer& zb) {
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  const double margin = radius + 1.0;
  for (const auto& ic : clouds) {
    const std::uint64_t lo = std::max(begin, ic.offset);
    const std::uint64_t hi = std::min(end, ic.offset + ic.cloud->size());
    for (std::uint64_t g = lo; g < hi; ++g) {
      const Vec3f& p = ic.cloud->positions[g - ic.offset];
      const auto proj = project(p.cast<double>(), camera);
      if (!proj) continue;
      const double u = proj->pixel.x();
      const double v = proj->pixel.y();
      if (!(u > -margin && u < w + margin && v > -margin && v < h + margin)) continue;
      const float d = static_cast<float>(proj->depth);
      if (!(d > 0.0f)) continue;
      const long px = pixel_index(u);
      const long py = pixel_index(v);
      const long x0 = std::max<long>(px - radius, 0);
      const long x1 = std::min<long>(px + radius, w - 1);
      const long y0 = std::max<long>(py - radius, 0);
      const long y1 = std::min<long>(py + radius, h - 1);
      for (long y = y0; y <= y1; ++y) {
        std::size_t idx = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x0);
        for (long x = x0; x <= x1; ++x, ++idx) {
          if (d < zb.depth[idx]) {
            zb.depth[idx] = d;
            zb.owner[idx] = g;
          }
        }
      }
    }
  }
}

Rgb color_of(const std::vector<IndexedCloud>& clouds, std::uint64_t g) {
  for (const auto& ic : clouds)
    if (g >= ic.offset && g < ic.offset + ic.cloud->size()) return ic.cloud->color_at(g - ic.offset);
  return Rgb{0, 0, 0};
}

}  // namespace

void RenderConfig::validate() const {
  if (splat_radius < 0) throw ValidationError("splat radius must be >= 0");
  if (dilation_passes < 0) throw ValidationError("dilation passes must be >= 0");
}

DepthFrame render_depth(const PointCloud& cloud, const Camera& camera, const RenderConfig& cfg, int threads) {
  const PointCloud* one[] = {&cloud};
  return render_depth(std::span<const PointCloud* const>(one), camera, cfg, threads);
}

DepthFrame render_depth(std::span<const PointCloud* const> clouds, const Camera& camera, const RenderConfig& cfg,
                        int threads) {
  cfg.validate();
  camera.validate();
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  const std::size_t n_pixels = static_cast<std::size_t>(w) * h;

  std::vector<IndexedCloud> indexed;
  std::uint64_t total = 0;
  for (const PointCloud* c : clouds) {
    indexed.push_back({c, total});
    total += c->size();
  }

  const int workers = std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(total / 65536, 1));
  ZBuffer zb(n_pixels);
  if (workers <= 1) {
    splat_range(indexed, 0, total, camera, cfg.splat_radius, zb);
  } else {
    std::vector<ZBuffer> partial(static_cast<std::size_t>(workers), ZBuffer(0));
    parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t k) {
      partial[k] = ZBuffer(n_pixels);
      const std::uint64_t b = total * k / workers;
      const std::uint64_t e = total * (k + 1) / workers;
      splat_range(indexed, b, e, camera, cfg.splat_radius, partial[k]);
    });
    for (const ZBuffer& part : partial) {
      for (std::size_t i = 0; i < n_pixels; ++i) {
        if (part.depth[i] < zb.depth[i] || (part.depth[i] == zb.depth[i] && part.owner[i] < zb.owner[i])) {
          zb.depth[i] = part.depth[i];
          zb.owner[i] = part.owner[i];
        }
      }
    }
  }

  DepthFrame frame;
  frame.width = w;
  frame.height = h;
  frame.depth.assign(n_pixels, 0.0f);
  frame.colors.assign(n_pixels, Rgb{0, 0, 0});
  frame.visibility = BinaryMask(w, h, false);
  for (std::size_t i = 0; i < n_pixels; ++i) {
    if (zb.owner[i] == kNoOwner) continue;
    frame.depth[i] = zb.depth[i];
    frame.colors[i] = color_of(indexed, zb.owner[i]);
    frame.visibility.values[i] = 1;
  }
  if (cfg.dilation_passes > 0) dilate_holes(frame, cfg.dilation_passes);
  return frame;
}

void dilate_holes(DepthFrame& frame, int passes) {
  const int w = frame.width;
  const int h = frame.height;
  for (int pass = 0; pass < passes; ++pass) {
    const std::vector<float> snapshot = frame.depth;
    const std::vector<Rgb> colors = frame.colors;
    bool changed = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (snapshot[i] > 0.0f) continue;
        int visible = 0;
        float best = kEmpty;
        std::size_t best_idx = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            if (!(snapshot[j] > 0.0f)) continue;
            ++visible;
            if (snapshot[j] < best) {
              best = snapshot[j];
              best_idx = j;
            }
          }
        }
        if (visible >= 5) {
          frame.depth[i] = best;
          frame.colors[i] = colors[best_idx];
          frame.visibility.values[i] = 1;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
}

RenderedSequence render_sequence(const Proxy4D& proxy, const Trajectory& traj, const RenderConfig& cfg, int threads) {
  traj.validate();
  cfg.validate();
  if (traj.time_warp.empty() && traj.size() != proxy.frame_count())
    throw ValidationError("trajectory has " + std::to_string(traj.size()) + " frames but the proxy has " +
                          std::to_string(proxy.frame_count()) + " and no time warp is given");
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const int s = traj.source_frame(t);
    if (s < 0 || static_cast<std::size_t>(s) >= proxy.frame_count())
      throw ValidationError("time warp selects frame " + std::to_string(s) + " outside the proxy range");
  }
  const int w = traj.cameras.front().intrinsics.width;
  const int h = traj.cameras.front().intrinsics.height;
  for (const auto& cam : traj.cameras)
    if (cam.intrinsics.width != w || cam.intrinsics.height != h)
      throw ValidationError("trajectory cameras must share one image size");

  RenderedSequence out;
  out.depth.width = w;
  out.depth.height = h;
  out.depth.frames.resize(traj.size());
  out.visibility.resize(traj.size());
  out.stats.points_per_frame.resize(traj.size());

  const auto start = std::chrono::steady_clock::now();
  const int frame_workers = std::min<int>(resolve_threads(threads), static_cast<int>(traj.size()));
  const int inner_threads = std::max(1, resolve_threads(threads) / std::max(1, frame_workers));
  parallel_for(traj.size(), frame_workers, [&](std::size_t t) {
    const auto s = static_cast<std::size_t>(traj.source_frame(t));
    const PointCloud* parts[] = {&proxy.background, &proxy.foreground[s]};
    DepthFrame f = render_depth(std::span<const PointCloud* const>(parts), traj.cameras[t], cfg, inner_threads);
    out.stats.points_per_frame[t] = proxy.background.size() + proxy.foreground[s].size();
    out.depth.frames[t] = std::move(f.depth);
    out.visibility[t] = std::move(f.visibility);
  });
  out.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.stats.frames_per_second = out.stats.seconds > 0.0 ? traj.size() / out.stats.seconds : 0.0;
  return out;
}

}  // namespace scaffold4d
