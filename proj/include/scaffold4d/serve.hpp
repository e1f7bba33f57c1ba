#pragma once

// Read-only HTTP preview service over one immutable proxy.
//
//   GET  /proxy/meta              JSON summary
//   GET  /proxy/frame/{t}?budget  binary chunk: u32 count, count x (3 f32, 3 u8)
//   POST /preview                 PNG depth preview for one camera
//   POST /trajectory              stores a trajectory document, returns its id
//   GET  /trajectory/{id}         returns a stored document
//
// Handlers are plain functions so they can be exercised without sockets.

#include "scaffold4d/proxy.hpp"
#include "scaffold4d/render.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace scaffold4d::serve {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class ServiceState {
 public:
  explicit ServiceState(Proxy4D proxy, RenderConfig render = {});

  const Proxy4D& proxy() const { return proxy_; }
  const RenderConfig& render_config() const { return render_; }

  /// Assigns the next id (1, 2, ...) to `document`.
  std::uint64_t store_trajectory(std::string document);
  std::optional<std::string> find_trajectory(std::uint64_t id) const;

 private:
  const Proxy4D proxy_;
  const RenderConfig render_;
  mutable std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::string> trajectories_;
};

Response handle_meta(const ServiceState& state);
/// `budget` is the raw query value; empty means the whole frame view.
Response handle_frame(const ServiceState& state, std::string_view t, std::string_view budget);
Response handle_preview(const ServiceState& state, std::string_view body);
Response handle_post_trajectory(ServiceState& state, std::string_view body);
Response handle_get_trajectory(const ServiceState& state, std::string_view id);

/// Encodes points as the binary frame chunk.
std::string encode_chunk(const PointCloud& cloud);
PointCloud decode_chunk(std::string_view bytes);

class Server {
 public:
  explicit Server(std::shared_ptr<ServiceState> state);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and serves until stop(); port 0 picks a free port.
  void listen(const std::string& host, int port);
  /// Binds to a free port, serves on a background thread and returns the port.
  int start_background(const std::string& host);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scaffold4d::serve
