#include "doctest.h"

#include "scaffold4d/complete.hpp"
#include "scaffold4d/error.hpp"
#include "support.hpp"

using namespace scaffold4d;

namespace {

PointMap filled_map(int w, int h, float z) {
  PointMap pm(w, h, true);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      pm.points[pm.index(x, y)] = Vec3f(static_cast<float>(x), static_cast<float>(y), z);
      pm.confidence[pm.index(x, y)] = 1.0f;
    }
  return pm;
}

// View k: a white image with an object disc of radius k + 1 in the middle.
NovelView disc_view(int k) {
  NovelView v;
  v.pointmap = filled_map(9, 9, 10.0f + static_cast<float>(k));
  RgbImage img(9, 9, Rgb{255, 255, 255});
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      if ((x - 4) * (x - 4) + (y - 4) * (y - 4) <= (k + 1) * (k + 1)) img.pixels[static_cast<std::size_t>(y) * 9 + x] = Rgb{200, 60, 40};
  v.image = img;
  return v;
}

CanonicalFrame frame_with_views() {
  CanonicalFrame f;
  f.ref_pointmap = filled_map(6, 5, 1.0f);
  f.ref_mask = BinaryMask(6, 5, false);
  f.ref_mask.values[3] = 1;
  f.ref_mask.values[7] = 1;
  for (int k = 0; k < kNovelViewCount; ++k) f.novel_views.push_back(disc_view(k));
  return f;
}

}  // namespace

TEST_CASE("white threshold: background only when every channel reaches it") {
  RgbImage img(4, 1, Rgb{255, 255, 255});
  img.pixels[1] = Rgb{240, 240, 240};
  img.pixels[2] = Rgb{240, 255, 239};
  img.pixels[3] = Rgb{0, 0, 0};
  const BinaryMask m = color_threshold_mask(img, 240);
  CHECK(m.values == std::vector<std::uint8_t>{0, 0, 1, 1});
  CHECK_THROWS_AS(color_threshold_mask(img, 256), ValidationError);
}

TEST_CASE("merge_views: source view first, then each novel view's object pixels") {
  const CanonicalFrame f = frame_with_views();
  const CanonicalCompletion c = merge_views(f, 0.0, 240);
  // Independent count of lattice points in each disc.
  std::array<std::size_t, 5> expect{2, 0, 0, 0, 0};
  for (int k = 0; k < 4; ++k)
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) expect[k + 1] += (x - 4) * (x - 4) + (y - 4) * (y - 4) <= (k + 1) * (k + 1);
  CHECK(c.view_counts == expect);
  CHECK(c.cloud.size() == 2 + expect[1] + expect[2] + expect[3] + expect[4]);
  CHECK(c.cloud.positions[0] == Vec3f(3, 0, 1));
  CHECK(c.cloud.positions[1] == Vec3f(1, 1, 1));
  // Depth tags identify which view every point came from.
  std::size_t at = 2;
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < expect[k + 1]; ++i) CHECK(c.cloud.positions[at++].z() == 10.0f + k);
  CHECK(c.cloud.colors[2] == Rgb{200, 60, 40});
}

TEST_CASE("merge_views: junk geometry on white pixels never enters the cloud") {
  CanonicalFrame f = frame_with_views();
  const auto baseline = merge_views(f, 0.0).cloud.size();
  // Move every background pixel of view 1 far away; the count stays.
  NovelView& v = f.novel_views[0];
  for (std::size_t i = 0; i < v.pointmap.pixel_count(); ++i)
    if (v.image->pixels[i] == Rgb{255, 255, 255}) v.pointmap.points[i] = Vec3f(1e6f, 1e6f, 1e6f);
  const CanonicalCompletion c = merge_views(f, 0.0);
  CHECK(c.cloud.size() == baseline);
  for (const auto& p : c.cloud.positions) CHECK(p.x() < 1e5f);
}

TEST_CASE("merge_views: an explicit mask wins over the image") {
  CanonicalFrame f = frame_with_views();
  f.novel_views[2].mask = BinaryMask(9, 9, true);
  const CanonicalCompletion c = merge_views(f, 0.0);
  CHECK(c.view_counts[3] == 81);
}

TEST_CASE("merge_views: confidence gate and validation") {
  CanonicalFrame f = frame_with_views();
  f.ref_pointmap.confidence[3] = 0.05f;
  CHECK(merge_views(f, 0.1).view_counts[0] == 1);
  f.novel_views.pop_back();
  CHECK_THROWS_AS(merge_views(f, 0.0), ValidationError);
  CanonicalFrame g = frame_with_views();
  g.novel_views[1].image.reset();
  CHECK_THROWS_AS(merge_views(g, 0.0), ValidationError);
}
