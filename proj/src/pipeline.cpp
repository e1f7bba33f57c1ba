#include "scaffold4d/pipeline.hpp"

#include "scaffold4d/complete.hpp"
#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/parallel.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <memory>

namespace scaffold4d {

namespace fs = std::filesystem;
using nlohmann::json;

ExitCode exit_code_for_current_exception() {
  try {
    throw;
  } catch (const DegeneracyError&) {
    return ExitCode::kDegenerate;
  } catch (const ValidationError&) {
    return ExitCode::kValidation;
  } catch (const IoError&) {
    return ExitCode::kIo;
  } catch (const fs::filesystem_error&) {
    return ExitCode::kIo;
  } catch (...) {
    return ExitCode::kDegenerate;
  }
}

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  if (!(conf_min >= 0.0 && conf_min <= 1.0)) throw ValidationError("conf_min must be in [0, 1]");
  if (!(voxel >= 0.0) || !std::isfinite(voxel)) throw ValidationError("voxel must be >= 0");
  if (white_thresh < 0 || white_thresh > 255) throw ValidationError("white_thresh must be in [0, 255]");
  robust.validate();
  if (process_noise && !(*process_noise > 0.0)) throw ValidationError("process noise must be positive");
  if (measurement_noise && !(*measurement_noise > 0.0)) throw ValidationError("measurement noise must be positive");
  if (!(depth_ratio >= 1.0)) throw ValidationError("depth ratio must be >= 1");
  render.validate();
  if (threads < 0) throw ValidationError("threads must be >= 0");
}

void apply_config_json(PipelineConfig& cfg, std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config: document must be an object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "input") cfg.input_dir = value.get<std::string>();
      else if (key == "global_dir") cfg.global_dir = value.get<std::string>();
      else if (key == "masks_dir") cfg.masks_dir = value.get<std::string>();
      else if (key == "canonical_dir") cfg.canonical_dir = value.get<std::string>();
      else if (key == "output") cfg.output_dir = value.get<std::string>();
      else if (key == "conf_min") cfg.conf_min = value.get<double>();
      else if (key == "voxel") cfg.voxel = value.get<double>();
      else if (key == "white_thresh") cfg.white_thresh = value.get<int>();
      else if (key == "mad_k") cfg.robust.mad_k = value.get<double>();
      else if (key == "min_corr") cfg.robust.min_corr = value.get<int>();
      else if (key == "iters") cfg.robust.iters = value.get<int>();
      else if (key == "process_noise") cfg.process_noise = value.get<double>();
      else if (key == "measurement_noise") cfg.measurement_noise = value.get<double>();
      else if (key == "depth_ratio") cfg.depth_ratio = value.get<double>();
      else if (key == "smooth") cfg.smooth = value.get<bool>();
      else if (key == "completion") cfg.completion = value.get<bool>();
      else if (key == "splat_radius") cfg.render.splat_radius = value.get<int>();
      else if (key == "dilation") cfg.render.dilation_passes = value.get<int>();
      else if (key == "threads") cfg.threads = value.get<int>();
      else throw ValidationError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j = {
      {"input", cfg.input_dir.string()},
      {"global_dir", cfg.global_path().string()},
      {"masks_dir", cfg.masks_path().string()},
      {"canonical_dir", cfg.canonical_path().string()},
      {"output", cfg.output_dir.string()},
      {"conf_min", cfg.conf_min},
      {"voxel", cfg.voxel},
      {"white_thresh", cfg.white_thresh},
      {"mad_k", cfg.robust.mad_k},
      {"min_corr", cfg.robust.min_corr},
      {"iters", cfg.robust.iters},
      {"depth_ratio", cfg.depth_ratio},
      {"smooth", cfg.smooth},
      {"completion", cfg.completion},
      {"splat_radius", cfg.render.splat_radius},
      {"dilation", cfg.render.dilation_passes},
      {"threads", cfg.threads},
  };
  if (cfg.process_noise) j["process_noise"] = *cfg.process_noise;
  if (cfg.measurement_noise) j["measurement_noise"] = *cfg.measurement_noise;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Manifests

std::string sha256_file(const fs::path& path) {
  const io::Bytes bytes = io::read_file(path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw IoError("sha256 failed for " + path.string());
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void write_run_manifest(const RunManifest& manifest, const fs::path& dir, const std::string& name) {
  json artifacts = json::array();
  for (const auto& p : manifest.artifacts) {
    artifacts.push_back({{"path", fs::relative(p, dir).generic_string()},
                         {"sha256", sha256_file(p)},
                         {"bytes", fs::file_size(p)}});
  }
  const json doc = {
      {"command", manifest.command},
      {"config", json::parse(manifest.config_json)},
      {"artifacts", artifacts},
      {"stats", json::parse(manifest.stats_json)},
  };
  io::write_text(dir / name, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// build-proxy

std::size_t count_frames(const fs::path& global_dir) {
  if (!fs::is_directory(global_dir)) throw ValidationError("missing global point map directory " + global_dir.string());
  std::size_t n = 0;
  while (fs::exists(global_dir / ("frame_" + io::frame_tag(n) + ".pmap"))) ++n;
  if (n == 0) throw ValidationError("no frame_0000.pmap in " + global_dir.string());
  return n;
}

namespace {

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw ValidationError("missing input file " + p.string());
  return p;
}

GlobalFrame load_global_frame(const PipelineConfig& cfg, std::size_t t) {
  const std::string tag = io::frame_tag(t);
  GlobalFrame f;
  f.index = static_cast<int>(t);
  f.pointmap = io::read_pointmap(require(cfg.global_path() / ("frame_" + tag + ".pmap")));
  const fs::path mask_path = require(cfg.masks_path() / ("mask_" + tag + ".pgm"));
  f.mask = io::read_mask(mask_path);
  if (f.mask.width != f.pointmap.width || f.mask.height != f.pointmap.height)
    throw ValidationError("mask size differs from its point map: " + mask_path.string());
  const fs::path stem = cfg.global_path() / ("frame_" + tag);
  if (io::rgb_planes_exist(stem)) f.colors = io::read_rgb_planes(stem);
  f.validate();
  return f;
}

CanonicalFrame load_canonical_frame(const PipelineConfig& cfg, const GlobalFrame& global) {
  const fs::path dir = cfg.canonical_path() / io::frame_tag(static_cast<std::size_t>(global.index));
  CanonicalFrame c;
  c.index = global.index;
  c.ref_pointmap = io::read_pointmap(require(dir / "ref.pmap"));
  c.ref_mask = global.mask;
  c.ref_colors = global.colors;
  for (int k = 1; k <= kNovelViewCount; ++k) {
    const std::string name = "view" + std::to_string(k);
    NovelView view;
    view.pointmap = io::read_pointmap(require(dir / (name + ".pmap")));
    const fs::path mask_path = dir / (name + "_mask.pgm");
    if (fs::exists(mask_path)) view.mask = io::read_mask(mask_path);
    if (io::rgb_planes_exist(dir / name)) view.image = io::read_rgb_planes(dir / name);
    if (!view.mask && !view.image)
      throw ValidationError("missing input file " + io::rgb_plane_path(dir / name, 'r').string() + " (or " +
                            mask_path.string() + ")");
    c.novel_views.push_back(std::move(view));
  }
  c.validate();
  return c;
}

struct FrameWork {
  GlobalFrame global;
  PointCloud canonical;
  FrameAlignment fit;
};

}  // namespace

BuildProxyResult build_proxy(const PipelineConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t frames = count_frames(cfg.global_path());
  const int threads = resolve_threads(cfg.threads);

  SceneLiftBuilder lift_builder(LiftParams{cfg.conf_min, cfg.voxel});
  std::vector<FrameAlignment> fits;
  std::vector<PointCloud> canonical;
  std::vector<std::size_t> correspondences;

  for (std::size_t begin = 0; begin < frames; begin += static_cast<std::size_t>(threads)) {
    const std::size_t end = std::min(frames, begin + static_cast<std::size_t>(threads));
    std::vector<FrameWork> batch(end - begin);
    parallel_for(batch.size(), threads, [&](std::size_t i) {
      FrameWork& w = batch[i];
      w.global = load_global_frame(cfg, begin + i);
      if (!cfg.completion) return;
      const CanonicalFrame cf = load_canonical_frame(cfg, w.global);
      CanonicalCompletion completion = merge_views(cf, cfg.conf_min, cfg.white_thresh);
      w.fit = align_frame(completion, w.global.pointmap, w.global.mask, cfg.conf_min, cfg.robust);
      w.canonical = std::move(completion.cloud);
    });
    for (auto& w : batch) {
      lift_builder.add_frame(w.global);
      if (!cfg.completion) continue;
      correspondences.push_back(w.fit.inliers + w.fit.discarded);
      fits.push_back(std::move(w.fit));
      canonical.push_back(std::move(w.canonical));
    }
  }

  SceneLift lift = lift_builder.finish();
  BuildProxyResult result;
  result.empty_foreground_frames = lift.empty_foreground_frames;
  const double scene_scale = scene_scale_of(lift.background, lift.foreground_per_frame);
  std::vector<PointCloud> foreground;
  if (cfg.completion) {
    AlignParams params;
    params.conf_min = cfg.conf_min;
    params.white_thresh = cfg.white_thresh;
    params.robust = cfg.robust;
    params.smooth = cfg.smooth;
    SmootherConfig sc = SmootherConfig::for_scene_scale(scene_scale);
    if (cfg.process_noise) sc.process_noise = *cfg.process_noise;
    if (cfg.measurement_noise) sc.measurement_noise_lateral = *cfg.measurement_noise;
    sc.depth_ratio = cfg.depth_ratio;
    params.smoother = sc;
    AlignmentResult alignment = finish_alignment(fits, std::move(canonical), params, scene_scale);
    foreground = std::move(alignment.clouds);
    alignment.clouds.clear();
    result.alignment = std::move(alignment);
  } else {
    foreground = std::move(lift.foreground_per_frame);
  }

  result.proxy = assemble(std::move(lift.background), std::move(foreground));
  result.proxy.provenance["source"] = cfg.input_dir.string();
  result.proxy.provenance["conf_min"] = std::to_string(cfg.conf_min);
  result.proxy.provenance["voxel"] = std::to_string(cfg.voxel);
  result.proxy.provenance["completion"] = cfg.completion ? "true" : "false";
  result.proxy.provenance["smooth"] = cfg.smooth ? "true" : "false";

  const fs::path proxy_dir = cfg.output_dir / "proxy";
  save_proxy(result.proxy, proxy_dir);
  result.artifacts.push_back(proxy_dir / "proxy.json");
  result.artifacts.push_back(proxy_dir / "background.ply");
  for (std::size_t t = 0; t < result.proxy.frame_count(); ++t)
    result.artifacts.push_back(proxy_dir / ("fg_" + io::frame_tag(t) + ".ply"));
  if (result.alignment) {
    result.artifacts.push_back(cfg.output_dir / "alignment.csv");
    io::write_text(result.artifacts.back(), alignment_csv(*result.alignment));
  }

  json stats = {
      {"frames", frames},
      {"scene_scale", result.proxy.scene_scale},
      {"background_points", result.proxy.background.size()},
      {"empty_foreground_frames", result.empty_foreground_frames},
      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
  };
  json fg_points = json::array();
  for (const auto& fg : result.proxy.foreground) fg_points.push_back(fg.size());
  stats["foreground_points"] = fg_points;
  if (result.alignment) {
    std::size_t degenerate = 0;
    for (const auto& f : fits) degenerate += f.degenerate ? 1 : 0;
    stats["degenerate_frames"] = degenerate;
    stats["correspondences"] = correspondences;
  }
  write_run_manifest({"build-proxy", config_to_json(cfg), result.artifacts, stats.dump()}, cfg.output_dir);
  return result;
}

// ---------------------------------------------------------------------------
// render

RenderRun render_to_dir(const Proxy4D& proxy, const Trajectory& traj, const RenderConfig& cfg, int threads,
                        const fs::path& out_dir) {
  RenderRun run;
  run.sequence = render_sequence(proxy, traj, cfg, threads);
  fs::create_directories(out_dir / "previews");
  fs::create_directories(out_dir / "visibility");
  const fs::path dmap = out_dir / "depth.dmap";
  io::write_depth_sequence(run.sequence.depth, dmap, out_dir / "previews");
  run.artifacts.push_back(dmap);
  for (std::size_t t = 0; t < traj.size(); ++t)
    run.artifacts.push_back(out_dir / "previews" / ("preview_" + io::frame_tag(t) + ".pgm"));
  for (std::size_t t = 0; t < traj.size(); ++t) {
    run.artifacts.push_back(out_dir / "visibility" / ("vis_" + io::frame_tag(t) + ".pgm"));
    io::write_mask(run.sequence.visibility[t], run.artifacts.back());
  }

  const RenderStats& st = run.sequence.stats;
  const json stats = {{"frames", traj.size()},
                      {"width", run.sequence.depth.width},
                      {"height", run.sequence.depth.height},
                      {"points_per_frame", st.points_per_frame},
                      {"render_seconds", st.seconds},
                      {"frames_per_second", st.frames_per_second},
                      {"threads", resolve_threads(threads)}};
  const json config = {{"splat_radius", cfg.splat_radius}, {"dilation", cfg.dilation_passes}};
  write_run_manifest({"render", config.dump(), run.artifacts, stats.dump()}, out_dir);
  return run;
}

// ---------------------------------------------------------------------------
// traj

OrbitSuggestion suggest_orbit(const Proxy4D& proxy, std::size_t frame) {
  if (proxy.frame_count() > 0 && frame >= proxy.frame_count())
    throw ValidationError("orbit frame " + std::to_string(frame) + " outside proxy range [0, " +
                          std::to_string(proxy.frame_count()) + ")");
  OrbitSuggestion s;
  // Nearest frame at or after `frame` with a foreground, else the nearest before.
  const PointCloud* fg = nullptr;
  for (std::size_t t = frame; t < proxy.frame_count() && !fg; ++t)
    if (!proxy.foreground[t].empty()) fg = &proxy.foreground[t];
  for (std::size_t t = std::min(frame, proxy.frame_count()); t-- > 0 && !fg;)
    if (!proxy.foreground[t].empty()) fg = &proxy.foreground[t];
  if (fg) {
    s.center = fg->centroid();
    BoundingBox box;
    box.extend(*fg);
    s.radius = 1.5 * box.diagonal();
  } else if (!proxy.background.empty()) {
    s.center = proxy.background.centroid();
  }
  if (!(s.radius > 0.0)) s.radius = proxy.scene_scale > 0.0 ? 0.25 * proxy.scene_scale : 1.0;
  return s;
}

Trajectory keyframes_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("keyframes: ") + e.what());
  }
  try {
    const int frames = doc.at("frames").get<int>();
    const json& keys = doc.at("keyframes");
    if (!keys.is_array() || keys.empty()) throw ValidationError("keyframes: at least one keyframe is required");
    json as_traj = {{"frame_count", keys.size()}, {"intrinsics", doc.at("intrinsics")}, {"frames", json::array()}};
    for (const auto& k : keys)
      as_traj["frames"].push_back({{"rotation", k.at("rotation")}, {"translation", k.at("translation")}});
    const Trajectory poses = io::trajectory_from_json(as_traj.dump());
    std::vector<CameraKeyframe> kf;
    for (std::size_t i = 0; i < keys.size(); ++i) kf.push_back({keys[i].at("frame").get<int>(), poses.cameras[i]});
    return interpolate_keyframes(kf, frames);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("keyframes: ") + e.what());
  }
}

}  // namespace scaffold4d
