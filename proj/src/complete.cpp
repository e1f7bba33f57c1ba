#include "scaffold4d/complete.hpp"

#include "scaffold4d/error.hpp"

#include <algorithm>
#include <string>

namespace scaffold4d {

void CanonicalFrame::validate() const {
  const std::string tag = "canonical frame " + std::to_string(index);
  if (novel_views.size() != kNovelViewCount)
    throw ValidationError(tag + ": expected " + std::to_string(kNovelViewCount) + " novel views, got " +
                          std::to_string(novel_views.size()));
  ref_pointmap.validate();
  if (ref_mask.width != ref_pointmap.width || ref_mask.height != ref_pointmap.height)
    throw ValidationError(tag + ": source mask size differs from the source point map");
  for (std::size_t k = 0; k < novel_views.size(); ++k) {
    const NovelView& v = novel_views[k];
    v.pointmap.validate();
    if (!v.mask && !v.image) throw ValidationError(tag + ": view " + std::to_string(k + 1) + " has neither image nor mask");
    if (v.mask && (v.mask->width != v.pointmap.width || v.mask->height != v.pointmap.height))
      throw ValidationError(tag + ": view " + std::to_string(k + 1) + " mask size differs from its point map");
    if (v.image && (v.image->width != v.pointmap.width || v.image->height != v.pointmap.height))
      throw ValidationError(tag + ": view " + std::to_string(k + 1) + " image size differs from its point map");
  }
}

BinaryMask color_threshold_mask(const RgbImage& image, int white_thresh) {
  if (white_thresh < 0 || white_thresh > 255) throw ValidationError("white threshold must lie in [0, 255]");
  BinaryMask mask(image.width, image.height, false);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const Rgb& p = image.pixels[i];
    mask.values[i] = std::min({p[0], p[1], p[2]}) >= white_thresh ? 0 : 1;
  }
  return mask;
}

BinaryMask novel_view_mask(const NovelView& view, int white_thresh) {
  if (view.mask) return *view.mask;
  if (view.image) return color_threshold_mask(*view.image, white_thresh);
  throw ValidationError("novel view has neither image nor mask");
}

CanonicalCompletion merge_views(const CanonicalFrame& frame, double conf_min, int white_thresh) {
  frame.validate();
  CanonicalCompletion out;
  const RgbImage* ref_colors = frame.ref_colors ? &*frame.ref_colors : nullptr;
  out.cloud = mask_pointmap(frame.ref_pointmap, frame.ref_mask, true, conf_min, ref_colors);
  out.view_counts[0] = out.cloud.size();
  for (std::size_t k = 0; k < frame.novel_views.size(); ++k) {
    const NovelView& v = frame.novel_views[k];
    const BinaryMask mask = novel_view_mask(v, white_thresh);
    const PointCloud part = mask_pointmap(v.pointmap, mask, true, conf_min, v.image ? &*v.image : nullptr);
    out.view_counts[k + 1] = part.size();
    out.cloud.append(part);
  }
  out.ref_pointmap = frame.ref_pointmap;
  return out;
}

}  // namespace scaffold4d
