#include "scaffold4d/serve.hpp"

#include "scaffold4d/bytes.hpp"
#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/pipeline.hpp"

#include "httplib.h"
#include "json.hpp"

#include <charconv>
#include <cstring>
#include <thread>

namespace scaffold4d::serve {

using nlohmann::json;

namespace {

Response error(int status, const std::string& message) {
  return {status, "application/json", json{{"error", message}}.dump()};
}

std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

constexpr std::size_t kChunkRecord = 3 * 4 + 3;

}  // namespace

ServiceState::ServiceState(Proxy4D proxy, RenderConfig render) : proxy_(std::move(proxy)), render_(render) {
  render_.validate();
}

std::uint64_t ServiceState::store_trajectory(std::string document) {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  trajectories_.emplace(id, std::move(document));
  return id;
}

std::optional<std::string> ServiceState::find_trajectory(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  const auto it = trajectories_.find(id);
  if (it == trajectories_.end()) return std::nullopt;
  return it->second;
}

std::string encode_chunk(const PointCloud& cloud) {
  io::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) w.f32(cloud.positions[i][c]);
    const Rgb rgb = cloud.color_at(i);
    for (int c = 0; c < 3; ++c) w.u8(rgb[c]);
  }
  const io::Bytes b = w.take();
  return {b.begin(), b.end()};
}

PointCloud decode_chunk(std::string_view bytes) {
  io::ByteReader r(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), "chunk");
  const std::uint32_t n = r.u32();
  if (r.remaining() != static_cast<std::size_t>(n) * kChunkRecord) throw FormatError("chunk: size does not match count");
  PointCloud cloud;
  cloud.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Vec3f p;
    for (int c = 0; c < 3; ++c) p[c] = r.f32();
    Rgb rgb;
    for (int c = 0; c < 3; ++c) rgb[c] = r.u8();
    cloud.positions.push_back(p);
    cloud.colors.push_back(rgb);
  }
  return cloud;
}

Response handle_meta(const ServiceState& state) {
  const Proxy4D& p = state.proxy();
  json counts = json::array();
  for (const auto& fg : p.foreground) counts.push_back(p.background.size() + fg.size());
  const OrbitSuggestion orbit = suggest_orbit(p);
  const json doc = {
      {"frame_count", p.frame_count()},
      {"scene_scale", p.scene_scale},
      {"background_points", p.background.size()},
      {"points_per_frame", counts},
      {"suggested_orbit",
       {{"center", json::array({orbit.center.x(), orbit.center.y(), orbit.center.z()})}, {"radius", orbit.radius}}},
  };
  return {200, "application/json", doc.dump()};
}

Response handle_frame(const ServiceState& state, std::string_view t_text, std::string_view budget_text) {
  const auto t = parse_int(t_text);
  if (!t) return error(400, "frame index must be an integer");
  if (*t < 0 || static_cast<std::size_t>(*t) >= state.proxy().frame_count()) return error(404, "no such frame");
  std::optional<long long> budget;
  if (!budget_text.empty()) {
    budget = parse_int(budget_text);
    if (!budget || *budget <= 0) return error(400, "budget must be a positive integer");
  }
  PointCloud view = frame_view(state.proxy(), static_cast<std::size_t>(*t));
  if (budget) view = subsample(view, static_cast<std::size_t>(*budget), kDecimateSeed ^ static_cast<std::uint64_t>(*t));
  return {200, "application/octet-stream", encode_chunk(view)};
}

Response handle_preview(const ServiceState& state, std::string_view body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }
  try {
    const long long t = req.at("t").get<long long>();
    if (t < 0 || static_cast<std::size_t>(t) >= state.proxy().frame_count()) return error(404, "no such frame");
    const json& cam = req.at("camera");
    const json one = {{"frame_count", 1},
                      {"intrinsics", cam.at("intrinsics")},
                      {"frames", json::array({{{"rotation", cam.at("rotation")}, {"translation", cam.at("translation")}}})}};
    const Camera camera = io::trajectory_from_json(one.dump()).cameras.front();

    PointCloud view = frame_view(state.proxy(), static_cast<std::size_t>(t));
    if (req.contains("budget")) {
      const long long budget = req["budget"].get<long long>();
      if (budget <= 0) return error(400, "budget must be positive");
      view = subsample(view, static_cast<std::size_t>(budget), kDecimateSeed ^ static_cast<std::uint64_t>(t));
    }
    const DepthFrame frame = render_depth(view, camera, state.render_config());
    std::optional<io::DepthRange> range;
    if (req.contains("depth_range")) {
      const json& r = req["depth_range"];
      if (!r.is_array() || r.size() != 2) return error(400, "depth_range must hold two numbers");
      range = io::DepthRange{r[0].get<float>(), r[1].get<float>()};
      if (!(range->min > 0.0f) || range->max < range->min) return error(400, "depth_range must satisfy 0 < min <= max");
    } else {
      range = io::depth_range(io::DepthSequence{frame.width, frame.height, {frame.depth}});
    }
    const io::Bytes png = io::encode_png(io::depth_preview(frame.depth, frame.width, frame.height, range));
    return {200, "image/png", std::string(png.begin(), png.end())};
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const ValidationError& e) {
    return error(400, e.what());
  }
}

Response handle_post_trajectory(ServiceState& state, std::string_view body) {
  try {
    const Trajectory traj = io::trajectory_from_json(body);
    const std::size_t frames = state.proxy().frame_count();
    if (traj.time_warp.empty() && traj.size() != frames)
      return error(400, "trajectory has " + std::to_string(traj.size()) + " frames but the proxy has " +
                            std::to_string(frames) + " and no time warp is given");
    for (int s : traj.time_warp)
      if (s < 0 || static_cast<std::size_t>(s) >= frames) return error(400, "time warp index outside the proxy range");
    const std::uint64_t id = state.store_trajectory(io::trajectory_to_json(traj));
    return {200, "application/json", json{{"id", id}}.dump()};
  } catch (const ValidationError& e) {
    return error(400, e.what());
  }
}

Response handle_get_trajectory(const ServiceState& state, std::string_view id_text) {
  const auto id = parse_int(id_text);
  if (!id || *id <= 0) return error(404, "no such trajectory");
  const auto doc = state.find_trajectory(static_cast<std::uint64_t>(*id));
  if (!doc) return error(404, "no such trajectory");
  return {200, "application/json", *doc};
}

// ---------------------------------------------------------------------------

struct Server::Impl {
  std::shared_ptr<ServiceState> state;
  httplib::Server http;
  std::thread thread;
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

Server::Server(std::shared_ptr<ServiceState> state) : impl_(std::make_unique<Impl>()) {
  impl_->state = std::move(state);
  auto& http = impl_->http;
  ServiceState* s = impl_->state.get();
  http.Get("/proxy/meta", [s](const httplib::Request&, httplib::Response& res) { reply(res, handle_meta(*s)); });
  http.Get(R"(/proxy/frame/([^/]+))", [s](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_frame(*s, req.matches[1].str(), req.has_param("budget") ? req.get_param_value("budget") : ""));
  });
  http.Post("/preview", [s](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_preview(*s, req.body));
  });
  http.Post("/trajectory", [s](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_post_trajectory(*s, req.body));
  });
  http.Get(R"(/trajectory/([^/]+))", [s](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_get_trajectory(*s, req.matches[1].str()));
  });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, error(500, what));
  });
}

Server::~Server() { stop(); }

void Server::listen(const std::string& host, int port) {
  if (!impl_->http.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

int Server::start_background(const std::string& host) {
  const int port = impl_->http.bind_to_any_port(host);
  if (port < 0) throw IoError("cannot bind " + host);
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace scaffold4d::serve
