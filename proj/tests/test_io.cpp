#include "doctest.h"

#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "support.hpp"

#include <bit>
#include <cstring>
#include <sstream>

using namespace scaffold4d;
namespace fs = std::filesystem;

namespace {

void put_u16(io::Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(io::Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void put_f32(io::Bytes& b, float f) { put_u32(b, std::bit_cast<std::uint32_t>(f)); }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

PointMap random_pointmap(std::mt19937_64& rng, int w, int h, bool conf) {
  PointMap pm(w, h, conf);
  std::uniform_real_distribution<float> u(-100.0f, 100.0f);
  std::uniform_real_distribution<float> c(0.0f, 1.0f);
  for (std::size_t i = 0; i < pm.pixel_count(); ++i) {
    if (rng() % 7 == 0) continue;
    pm.points[i] = Vec3f(u(rng), u(rng), u(rng));
    if (conf) pm.confidence[i] = c(rng);
  }
  return pm;
}

}  // namespace

TEST_CASE("pmap: hand-assembled 2x2 fixture decodes to exact values") {
  io::Bytes b{'P', 'M', 'A', 'P'};
  put_u16(b, 1);
  put_u16(b, 1);  // confidence present
  put_u32(b, 2);
  put_u32(b, 2);
  const float xyz[4][3] = {{1.0f, 2.0f, 3.0f}, {-0.5f, 0.25f, 8.0f}, {0, 0, 0}, {1e-3f, -7.0f, 100.0f}};
  for (int i = 0; i < 4; ++i) {
    if (i == 2) {
      for (int c = 0; c < 3; ++c) put_u32(b, 0x7fc00000u);
    } else {
      for (int c = 0; c < 3; ++c) put_f32(b, xyz[i][c]);
    }
  }
  for (float c : {1.0f, 0.5f, 0.0f, 0.125f}) put_f32(b, c);
  REQUIRE(b.size() == 16 + 12 * 4 + 4 * 4);

  const PointMap pm = io::decode_pointmap(b);
  CHECK(pm.width == 2);
  CHECK(pm.height == 2);
  CHECK(pm.points[0] == Vec3f(1, 2, 3));
  CHECK(pm.points[1] == Vec3f(-0.5f, 0.25f, 8.0f));
  CHECK_FALSE(pm.is_valid(2));
  CHECK(pm.points[3] == Vec3f(1e-3f, -7.0f, 100.0f));
  CHECK(pm.confidence == std::vector<float>{1.0f, 0.5f, 0.0f, 0.125f});
  CHECK(io::encode_pointmap(pm) == b);
}

TEST_CASE("pmap: random maps round trip bit-exactly through files") {
  std::mt19937_64 rng(21);
  const fs::path dir = testing::temp_dir("pmap");
  for (int i = 0; i < 30; ++i) {
    const PointMap pm = random_pointmap(rng, 1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 30), i % 2);
    const fs::path p = dir / "m.pmap";
    io::write_pointmap(pm, p);
    const io::Bytes first = io::read_file(p);
    const PointMap back = io::read_pointmap(p);
    CHECK(back.width == pm.width);
    CHECK(back.confidence == pm.confidence);
    for (std::size_t k = 0; k < pm.pixel_count(); ++k) {
      CHECK(back.is_valid(k) == pm.is_valid(k));
      if (pm.is_valid(k)) CHECK(std::memcmp(back.points[k].data(), pm.points[k].data(), 12) == 0);
    }
    io::write_pointmap(back, p);
    CHECK(io::read_file(p) == first);
  }
}

TEST_CASE("pmap: distinct diagnostics for bad magic, truncation and overflow") {
  std::mt19937_64 rng(2);
  const io::Bytes good = io::encode_pointmap(random_pointmap(rng, 3, 3, true));

  io::Bytes bad = good;
  bad[0] = 'X';
  CHECK(error_of([&] { io::decode_pointmap(bad); }).find("bad magic") != std::string::npos);

  const io::Bytes cut(good.begin(), good.end() - 5);
  CHECK(error_of([&] { io::decode_pointmap(cut); }).find("truncated payload") != std::string::npos);
  const io::Bytes header_only(good.begin(), good.begin() + 10);
  CHECK(error_of([&] { io::decode_pointmap(header_only); }).find("truncated payload") != std::string::npos);

  io::Bytes huge{'P', 'M', 'A', 'P'};
  put_u16(huge, 1);
  put_u16(huge, 0);
  put_u32(huge, 1u << 16);
  put_u32(huge, 1u << 16);
  CHECK(error_of([&] { io::decode_pointmap(huge); }).find("dimension overflow") != std::string::npos);

  io::Bytes trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(io::decode_pointmap(trailing), FormatError);

  CHECK_THROWS_AS(io::read_pointmap("/nonexistent/x.pmap"), IoError);
}

TEST_CASE("pgm masks: threshold at 128") {
  io::GrayImage all_on{3, 2, std::vector<std::uint8_t>(6, 255)};
  CHECK(io::mask_from_gray(all_on).count() == 6);
  io::GrayImage all_off{3, 2, std::vector<std::uint8_t>(6, 0)};
  CHECK(io::mask_from_gray(all_off).count() == 0);
  io::GrayImage edge{2, 1, {127, 128}};
  const BinaryMask m = io::mask_from_gray(io::decode_pgm(io::encode_pgm(edge)));
  CHECK_FALSE(m[0]);
  CHECK(m[1]);
}

TEST_CASE("pgm: header parsing") {
  const std::string text = "P5\n# comment\n2 1\n255\n";
  io::Bytes b(text.begin(), text.end());
  b.push_back(7);
  b.push_back(200);
  const io::GrayImage img = io::decode_pgm(b);
  CHECK(img.width == 2);
  CHECK(img.pixels == std::vector<std::uint8_t>{7, 200});

  const std::string ascii = "P2\n2 1\n255\n7 200\n";
  CHECK(error_of([&] { io::decode_pgm(io::Bytes(ascii.begin(), ascii.end())); }).find("non-P5") !=
        std::string::npos);
  const std::string deep = "P5\n1 1\n65535\n\x01\x02";
  CHECK_THROWS_AS(io::decode_pgm(io::Bytes(deep.begin(), deep.end())), FormatError);
}

TEST_CASE("dmap: single 1x1 frame has a 4-byte payload after the 20-byte header") {
  const io::DepthSequence seq{1, 1, {{5.0f}}};
  const io::Bytes b = io::encode_depth_sequence(seq);
  REQUIRE(b.size() == io::kDmapHeaderSize + 4);
  CHECK(std::memcmp(b.data(), "DMAP", 4) == 0);
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[20 + i]) << (8 * i);
  CHECK(bits == 0x40a00000u);  // 5.0f
  CHECK(io::decode_depth_sequence(b) == seq);
}

TEST_CASE("dmap: empty frame is an all-zero payload; round trips") {
  const io::DepthSequence seq{3, 2, {std::vector<float>(6, 0.0f), {0, 1, 2, 3, 4, 5}}};
  const io::Bytes b = io::encode_depth_sequence(seq);
  CHECK(b.size() == 20 + 4 * 6 * 2);
  for (std::size_t i = 20; i < 20 + 24; ++i) CHECK(b[i] == 0);
  CHECK(io::decode_depth_sequence(b) == seq);
  CHECK_THROWS_AS(io::encode_depth_sequence({1, 1, {{-1.0f}}}), ValidationError);
  io::Bytes cut(b.begin(), b.end() - 1);
  CHECK_THROWS_AS(io::decode_depth_sequence(cut), FormatError);
}

TEST_CASE("dmap previews: normalization, holes and constant frames") {
  const fs::path dir = testing::temp_dir("dmap");
  const io::DepthSequence constant{2, 2, {{3.0f, 3.0f, 0.0f, 3.0f}}};
  io::write_depth_sequence(constant, dir / "c.dmap", dir / "prev");
  const io::GrayImage p = io::read_pgm(dir / "prev" / "preview_0000.pgm");
  CHECK(p.pixels == std::vector<std::uint8_t>{255, 255, 0, 255});
  CHECK(io::read_depth_sequence(dir / "c.dmap") == constant);

  // Range [1, 5] across the sequence; gray = 1 + round(254 (hi - d) / (hi - lo)).
  const io::DepthSequence seq{3, 1, {{1.0f, 2.0f, 0.0f}, {5.0f, 4.5f, 3.0f}}};
  io::write_depth_sequence(seq, dir / "s.dmap", dir / "seq");
  const io::GrayImage f0 = io::read_pgm(dir / "seq" / "preview_0000.pgm");
  const io::GrayImage f1 = io::read_pgm(dir / "seq" / "preview_0001.pgm");
  CHECK(f0.pixels == std::vector<std::uint8_t>{255, static_cast<std::uint8_t>(1 + 191), 0});  // 254*3/4 = 190.5
  CHECK(f1.pixels == std::vector<std::uint8_t>{1, static_cast<std::uint8_t>(1 + 32), 128});   // 31.75, 127
}

TEST_CASE("ply: header and round trip through an independent reader") {
  PointCloud one;
  one.positions = {Vec3f(1.5f, -2.0f, 3.25f)};
  one.colors = {Rgb{10, 20, 30}};
  const io::Bytes b = io::encode_ply(one);
  const std::string text(b.begin(), b.end());
  CHECK(text.find("element vertex 1\n") != std::string::npos);
  CHECK(text.rfind("ply\nformat binary_little_endian 1.0\n", 0) == 0);

  // Independent parse: locate end_header and unpack one 15-byte record.
  const std::string marker = "end_header\n";
  const auto body = text.find(marker) + marker.size();
  REQUIRE(b.size() == body + 15);
  float xyz[3];
  std::memcpy(xyz, b.data() + body, 12);
  CHECK(xyz[0] == 1.5f);
  CHECK(xyz[1] == -2.0f);
  CHECK(xyz[2] == 3.25f);
  CHECK(b[body + 12] == 10);
  CHECK(b[body + 14] == 30);

  std::mt19937_64 rng(4);
  const PointCloud c = testing::random_cloud(rng, 777, -50, 50);
  const PointCloud back = io::decode_ply(io::encode_ply(c));
  CHECK(back.positions == c.positions);
  CHECK(back.colors == c.colors);
}

TEST_CASE("ply: empty cloud and default colors") {
  const io::Bytes b = io::encode_ply(PointCloud{});
  const std::string text(b.begin(), b.end());
  CHECK(text.find("element vertex 0\n") != std::string::npos);
  CHECK(io::decode_ply(b).empty());

  PointCloud plain;
  plain.positions = {Vec3f(0, 0, 0)};
  CHECK(io::decode_ply(io::encode_ply(plain)).colors == std::vector<Rgb>{kDefaultColor});
  io::Bytes cut(b.begin(), b.end() - 3);
  CHECK_THROWS_AS(io::decode_ply(cut), FormatError);
}

TEST_CASE("png: grayscale round trip") {
  io::GrayImage img{5, 3, {}};
  for (int i = 0; i < 15; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 17));
  const io::Bytes png = io::encode_png(img);
  CHECK(png[1] == 'P');
  CHECK(io::decode_png(png) == img);
  CHECK_THROWS_AS(io::decode_png(io::Bytes{1, 2, 3}), FormatError);
}

TEST_CASE("trajectory: identity single frame round trip") {
  Trajectory t;
  t.cameras.push_back({testing::simple_intrinsics(64, 48, 50.0), {}});
  const Trajectory back = io::trajectory_from_json(io::trajectory_to_json(t));
  REQUIRE(back.size() == 1);
  CHECK(back.cameras[0].pose.rotation == Mat3::Identity());
  CHECK(back.cameras[0].pose.translation == Vec3::Zero());
  CHECK(back.cameras[0].intrinsics == t.cameras[0].intrinsics);
  CHECK(back.time_warp.empty());
}

TEST_CASE("trajectory: orthonormality violations are rejected on load") {
  const std::string base = R"({"frame_count":1,"intrinsics":{"fx":10,"fy":10,"cx":5,"cy":5,"width":10,"height":10},)";
  const std::string bad = base + R"("frames":[{"rotation":[1.01,0,0,0,1,0,0,0,1],"translation":[0,0,0]}]})";
  CHECK_THROWS_AS(io::trajectory_from_json(bad), FormatError);
  // Within 1e-4 the rotation is accepted and re-orthonormalized.
  const std::string near = base + R"("frames":[{"rotation":[1.00002,0,0,0,1,0,0,0,1],"translation":[0,0,0]}]})";
  const Trajectory t = io::trajectory_from_json(near);
  CHECK(t.cameras[0].pose.is_valid(1e-12));
  CHECK_THROWS_AS(io::trajectory_from_json("{"), FormatError);
  CHECK_THROWS_AS(io::trajectory_from_json(base + R"("frames":[]})"), FormatError);
}

TEST_CASE("trajectory: frozen time warp accepted") {
  const std::string doc =
      R"({"frame_count":3,"intrinsics":{"fx":10,"fy":10,"cx":5,"cy":5,"width":10,"height":10},
          "frames":[{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,0]},
                    {"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,1]},
                    {"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,2]}],
          "time_warp":[0,0,0]})";
  const Trajectory t = io::trajectory_from_json(doc);
  CHECK(t.time_warp == std::vector<int>{0, 0, 0});
  const std::string bad_warp = std::string(doc).replace(doc.rfind("[0,0,0]"), 7, "[0,0,-1]");
  CHECK_THROWS_AS(io::trajectory_from_json(bad_warp), FormatError);
}

TEST_CASE("trajectory: random trajectories round trip exactly") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    Trajectory t;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int k = 0; k < n; ++k)
      t.cameras.push_back({{300.5, 301.25, 100.0, 80.0, 200, 160},
                           {testing::random_rotation(rng), testing::random_vec(rng, -5, 5)}});
    if (i % 2) {
      t.source_frame_count = 4;
      for (int k = 0; k < n; ++k) t.time_warp.push_back(static_cast<int>(rng() % 4));
    }
    const Trajectory back = io::trajectory_from_json(io::trajectory_to_json(t));
    REQUIRE(back.size() == t.size());
    for (int k = 0; k < n; ++k) {
      CHECK((back.cameras[k].pose.rotation - t.cameras[k].pose.rotation).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(back.cameras[k].pose.translation == t.cameras[k].pose.translation);
    }
    CHECK(back.time_warp == t.time_warp);
    CHECK(io::trajectory_to_json(back) == io::trajectory_to_json(t));
  }
}

TEST_CASE("rgb planes round trip") {
  const fs::path dir = testing::temp_dir("rgb");
  RgbImage img(3, 2, Rgb{1, 2, 3});
  img.pixels[4] = Rgb{250, 0, 9};
  io::write_rgb_planes(img, dir / "x");
  CHECK(io::rgb_planes_exist(dir / "x"));
  const RgbImage back = io::read_rgb_planes(dir / "x");
  CHECK(back.pixels == img.pixels);
}
