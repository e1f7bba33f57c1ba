#include "doctest.h"

#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/serve.hpp"
#include "support.hpp"

#include "httplib.h"
#include "json.hpp"

#include <cmath>

using namespace scaffold4d;
using namespace scaffold4d::serve;
using nlohmann::json;

namespace {

Proxy4D two_frame_proxy() {
  PointCloud bg;
  bg.positions = {Vec3f(-1, 0, 8), Vec3f(1, 0, 8)};
  bg.colors = {Rgb{10, 20, 30}, Rgb{40, 50, 60}};
  std::vector<PointCloud> fg(2);
  fg[0].positions = {Vec3f(0, 0, 4)};
  fg[0].colors = {Rgb{200, 0, 0}};
  fg[1].positions = {Vec3f(0.5f, 0, 4), Vec3f(0.5f, 0.5f, 4), Vec3f(0, 0.5f, 4)};
  return assemble(bg, fg);
}

const char* kIntrinsics = R"({"fx": 10, "fy": 10, "cx": 10, "cy": 10, "width": 21, "height": 21})";

std::string traj_doc(int frames, const std::string& warp = "") {
  json j = {{"frame_count", frames}, {"intrinsics", json::parse(kIntrinsics)}, {"frames", json::array()}};
  for (int i = 0; i < frames; ++i)
    j["frames"].push_back({{"rotation", {1, 0, 0, 0, 1, 0, 0, 0, 1}}, {"translation", {0, 0, 0.1 * i}}});
  if (!warp.empty()) j["time_warp"] = json::parse(warp);
  return j.dump();
}

std::string preview_body(int t, const std::string& extra = "") {
  return R"({"t": )" + std::to_string(t) + R"(, "camera": {"intrinsics": )" + kIntrinsics +
         R"(, "rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,0,0]})" + extra + "}";
}

std::uint32_t le32(const std::string& s, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 3])) << 24;
}

io::GrayImage png_of(const Response& r) {
  return io::decode_png(std::span(reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()));
}

int px(const io::GrayImage& img, int x, int y) { return img.pixels[static_cast<std::size_t>(y) * img.width + x]; }

}  // namespace

TEST_CASE("chunk layout: count then 15-byte little-endian records") {
  PointCloud c;
  c.positions = {Vec3f(1.0f, -2.0f, 0.5f)};
  c.colors = {Rgb{7, 8, 9}};
  const std::string b = encode_chunk(c);
  REQUIRE(b.size() == 4 + 15);
  CHECK(le32(b, 0) == 1);
  CHECK(le32(b, 4) == 0x3f800000u);
  CHECK(le32(b, 8) == 0xc0000000u);
  CHECK(le32(b, 12) == 0x3f000000u);
  CHECK(static_cast<unsigned char>(b[16]) == 7);
  CHECK(static_cast<unsigned char>(b[18]) == 9);

  std::mt19937_64 rng(5);
  const PointCloud r = testing::random_cloud(rng, 500, -3, 3);
  const PointCloud back = decode_chunk(encode_chunk(r));
  CHECK(back.positions == r.positions);
  CHECK(back.colors == r.colors);
  CHECK(decode_chunk(encode_chunk(PointCloud{})).size() == 0);
  CHECK_THROWS_AS(decode_chunk(b.substr(0, 18)), FormatError);
  CHECK_THROWS_AS(decode_chunk(b + "x"), FormatError);
}

TEST_CASE("meta reports counts and the suggested orbit") {
  const ServiceState s(two_frame_proxy());
  const Response r = handle_meta(s);
  CHECK(r.status == 200);
  const json j = json::parse(r.body);
  CHECK(j["frame_count"] == 2);
  CHECK(j["background_points"] == 2);
  CHECK(j["points_per_frame"] == json::array({3, 5}));
  CHECK(j["suggested_orbit"]["center"] == json::array({0.0, 0.0, 4.0}));
}

TEST_CASE("frame endpoint: bytes match the frame view and errors are classified") {
  const Proxy4D p = two_frame_proxy();
  const ServiceState s(p);
  const Response r = handle_frame(s, "1", "");
  CHECK(r.status == 200);
  CHECK(r.content_type == "application/octet-stream");
  CHECK(r.body == encode_chunk(frame_view(p, 1)));
  CHECK(decode_chunk(handle_frame(s, "1", "2").body).size() == 2);
  CHECK(decode_chunk(handle_frame(s, "0", "100").body).size() == 3);
  CHECK(handle_frame(s, "x", "").status == 400);
  CHECK(handle_frame(s, "1", "0").status == 400);
  CHECK(handle_frame(s, "1", "many").status == 400);
  CHECK(handle_frame(s, "2", "").status == 404);
  CHECK(handle_frame(s, "-1", "").status == 404);
}

TEST_CASE("preview renders the requested frame as a PNG") {
  const ServiceState s(two_frame_proxy(), {0, 0});
  const Response r = handle_preview(s, preview_body(0));
  REQUIRE(r.status == 200);
  CHECK(r.content_type == "image/png");
  const io::GrayImage img = png_of(r);
  REQUIRE(img.width == 21);
  // Foreground at depth 4 projects to the centre; the background at depth 8
  // lands at u = 10 +- 1.25, i.e. pixels 9 and 11.
  CHECK(px(img, 10, 10) == 255);
  CHECK(px(img, 9, 10) == 1);
  CHECK(px(img, 11, 10) == 1);
  CHECK(px(img, 0, 0) == 0);

  const Response fixed = handle_preview(s, preview_body(0, R"(, "depth_range": [4, 12])"));
  const io::GrayImage g = png_of(fixed);
  CHECK(px(g, 10, 10) == 255);
  CHECK(px(g, 9, 10) == 1 + static_cast<int>(std::lround(254.0 * 4.0 / 8.0)));

  CHECK(handle_preview(s, "{").status == 400);
  CHECK(handle_preview(s, R"({"t": 0})").status == 400);
  CHECK(handle_preview(s, preview_body(5)).status == 404);
  CHECK(handle_preview(s, preview_body(0, R"(, "budget": 0)")).status == 400);
  CHECK(handle_preview(s, preview_body(0, R"(, "depth_range": [0, 1])")).status == 400);
}

TEST_CASE("trajectory store hands out ids from 1 and validates frame counts") {
  ServiceState s(two_frame_proxy());
  const Response a = handle_post_trajectory(s, traj_doc(2));
  REQUIRE(a.status == 200);
  CHECK(json::parse(a.body)["id"] == 1);
  const Response b = handle_post_trajectory(s, traj_doc(5, "[0,0,1,1,1]"));
  REQUIRE(b.status == 200);
  CHECK(json::parse(b.body)["id"] == 2);

  const Response got = handle_get_trajectory(s, "2");
  CHECK(got.status == 200);
  const Trajectory t = io::trajectory_from_json(got.body);
  CHECK(t.size() == 5);
  CHECK(t.time_warp == std::vector<int>{0, 0, 1, 1, 1});

  CHECK(handle_post_trajectory(s, traj_doc(3)).status == 400);
  CHECK(handle_post_trajectory(s, traj_doc(2, "[0,2]")).status == 400);
  CHECK(handle_post_trajectory(s, "not json").status == 400);
  CHECK(handle_get_trajectory(s, "3").status == 404);
  CHECK(handle_get_trajectory(s, "0").status == 404);
  CHECK(handle_get_trajectory(s, "abc").status == 404);
}

TEST_CASE("live server answers over HTTP") {
  auto state = std::make_shared<ServiceState>(two_frame_proxy());
  Server server(state);
  const int port = server.start_background("127.0.0.1");
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  auto meta = client.Get("/proxy/meta");
  REQUIRE(meta);
  CHECK(meta->status == 200);
  CHECK(json::parse(meta->body)["frame_count"] == 2);

  auto frame = client.Get("/proxy/frame/1?budget=4");
  REQUIRE(frame);
  CHECK(frame->status == 200);
  CHECK(decode_chunk(frame->body).size() == 4);
  CHECK(client.Get("/proxy/frame/9")->status == 404);

  auto post = client.Post("/trajectory", traj_doc(2), "application/json");
  REQUIRE(post);
  CHECK(post->status == 200);
  const auto id = json::parse(post->body)["id"].get<int>();
  auto back = client.Get("/trajectory/" + std::to_string(id));
  REQUIRE(back);
  CHECK(back->status == 200);
  CHECK(io::trajectory_from_json(back->body).size() == 2);

  auto png = client.Post("/preview", preview_body(1), "application/json");
  REQUIRE(png);
  CHECK(png->status == 200);
  CHECK(png->get_header_value("Content-Type") == "image/png");
  CHECK(client.Get("/nowhere")->status == 404);
  server.stop();
}
