#pragma once

// Canonical object completion: fuse the source view with four synthesized
// views of the isolated object into one geometry-complete canonical cloud.

#include "scaffold4d/core.hpp"

#include <array>
#include <optional>
#include <vector>

namespace scaffold4d {

inline constexpr int kNovelViewCount = 4;
inline constexpr int kDefaultWhiteThreshold = 240;

/// One synthesized view: its point map plus either the rendered image (white
/// background) or a precomputed object mask. A mask wins when both exist.
struct NovelView {
  PointMap pointmap;
  std::optional<RgbImage> image;
  std::optional<BinaryMask> mask;
};

struct CanonicalFrame {
  int index = 0;
  PointMap ref_pointmap;  // pixel-registered to the source image
  BinaryMask ref_mask;
  std::optional<RgbImage> ref_colors;
  std::vector<NovelView> novel_views;

  void validate() const;
};

struct CanonicalCompletion {
  PointCloud cloud;
  PointMap ref_pointmap;
  std::array<std::size_t, kNovelViewCount + 1> view_counts{};  // source view first
};

/// Background (false) iff every channel is >= white_thresh.
BinaryMask color_threshold_mask(const RgbImage& image, int white_thresh);

BinaryMask novel_view_mask(const NovelView& view, int white_thresh);

/// Source view first, then views 1..4, each in row-major order.
CanonicalCompletion merge_views(const CanonicalFrame& frame, double conf_min,
                                int white_thresh = kDefaultWhiteThreshold);

}  // namespace scaffold4d
