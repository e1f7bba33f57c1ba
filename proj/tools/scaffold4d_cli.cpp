// scaffold4d: command-line front end.
//
//   scaffold4d synth        --spec scene.json --out DIR
//   scaffold4d build-proxy  --input DIR --out DIR [module flags]
//   scaffold4d traj orbit|keyframes|bullet-time ... --out traj.json
//   scaffold4d render       --proxy DIR --trajectory traj.json --out DIR
//   scaffold4d edit         --proxy DIR --out DIR (--scale F | --composite DIR | --decimate N)
//   scaffold4d serve        --proxy DIR [--bind ADDR] [--port N]

#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/pipeline.hpp"
#include "scaffold4d/proxy.hpp"
#include "scaffold4d/serve.hpp"
#include "scaffold4d/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using namespace scaffold4d;
using nlohmann::json;

namespace {

Vec3 vec3_of(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

void run_synth(const fs::path& spec_path, const fs::path& out, int threads) {
  const std::string text = io::read_text(spec_path);
  const synth::SceneSpec spec = synth::scene_from_json(text);
  const synth::NoiseSpec noise = synth::noise_from_json(text);
  const auto files = synth::write_fixture(spec, noise, out, threads);
  const json stats = {{"frames", spec.frames}, {"width", spec.width}, {"height", spec.height}};
  write_run_manifest({"synth", synth::scene_to_json(spec), files, stats.dump()}, out);
  std::cout << "wrote " << files.size() << " fixture files for " << spec.frames << " frames to " << out.string()
            << "\n";
}

void run_build_proxy(PipelineConfig cfg) {
  if (cfg.input_dir.empty() && !cfg.global_dir) throw ValidationError("build-proxy needs --input");
  if (cfg.output_dir.empty()) throw ValidationError("build-proxy needs --out");
  const BuildProxyResult r = build_proxy(cfg);
  std::cout << "proxy: " << r.proxy.frame_count() << " frames, " << r.proxy.background.size()
            << " background points, scene scale " << r.proxy.scene_scale << "\n";
  if (!r.empty_foreground_frames.empty())
    std::cout << "frames with empty foreground: " << r.empty_foreground_frames.size() << "\n";
}

void run_render(const fs::path& proxy_dir, const fs::path& traj_path, const fs::path& out, const RenderConfig& rc,
                int threads) {
  const Proxy4D proxy = load_proxy(proxy_dir);
  const Trajectory traj = io::read_trajectory(traj_path);
  const RenderRun run = render_to_dir(proxy, traj, rc, threads, out);
  const RenderStats& st = run.sequence.stats;
  std::size_t max_points = 0;
  for (std::size_t n : st.points_per_frame) max_points = std::max(max_points, n);
  std::cout << "rendered " << traj.size() << " frames (" << run.sequence.depth.width << "x"
            << run.sequence.depth.height << ", up to " << max_points << " points) at " << st.frames_per_second
            << " frames/s\n";
}

void write_traj(const Trajectory& traj, const fs::path& out, const json& params) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_trajectory(traj, out);
  const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  write_run_manifest({"traj", params.dump(), {out}, json{{"frames", traj.size()}}.dump()}, dir,
                     out.filename().string() + ".manifest.json");
  std::cout << "wrote " << traj.size() << "-frame trajectory to " << out.string() << "\n";
}

std::atomic<serve::Server*> g_server{nullptr};

void on_signal(int) {
  if (serve::Server* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-complete 4D point-cloud proxies and depth scaffolds"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic fixture with ground truth");
  fs::path spec_path, synth_out;
  synth_cmd->add_option("--spec", spec_path, "Scene spec (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  // build-proxy
  auto* build_cmd = app.add_subcommand("build-proxy", "Lift, complete, align and assemble the 4D proxy");
  PipelineConfig cfg;
  fs::path config_path;
  std::string input, out, global_dir, masks_dir, canonical_dir;
  double conf_min = 0, voxel = 0, mad_k = 0, q = 0, r = 0, rho = 0;
  int white = 0, min_corr = 0, iters = 0, splat = 0;
  bool no_smooth = false, no_completion = false;
  build_cmd->add_option("--config", config_path, "Config file (JSON); flags override it");
  auto* o_input = build_cmd->add_option("--input", input, "Fixture directory with global/, masks/, canonical/");
  auto* o_out = build_cmd->add_option("--out", out, "Output directory");
  auto* o_global = build_cmd->add_option("--global-dir", global_dir, "Lifted point maps (frame_%04d.pmap)");
  auto* o_masks = build_cmd->add_option("--masks-dir", masks_dir, "Object masks (mask_%04d.pgm)");
  auto* o_canon = build_cmd->add_option("--canonical-dir", canonical_dir, "Canonical view sets (%04d/)");
  auto* o_conf = build_cmd->add_option("--conf-min", conf_min, "Minimum point confidence");
  auto* o_voxel = build_cmd->add_option("--voxel", voxel, "Background dedup voxel size (0 = raw union)");
  auto* o_white = build_cmd->add_option("--white-thresh", white, "Novel-view white background threshold");
  auto* o_madk = build_cmd->add_option("--mad-k", mad_k, "MAD rejection multiplier");
  auto* o_minc = build_cmd->add_option("--min-corr", min_corr, "Minimum inlier correspondences per frame");
  auto* o_iters = build_cmd->add_option("--iters", iters, "Robust refit rounds");
  auto* o_q = build_cmd->add_option("--process-noise", q, "Smoother process noise q");
  auto* o_r = build_cmd->add_option("--measurement-noise", r, "Smoother lateral measurement noise r_xy");
  auto* o_rho = build_cmd->add_option("--depth-ratio", rho, "Depth measurement noise ratio r_z / r_xy");
  auto* o_splat = build_cmd->add_option("--splat-radius", splat, "Recorded render splat radius");
  auto* o_nosmooth = build_cmd->add_flag("--no-smooth", no_smooth, "Skip temporal smoothing");
  auto* o_nocomp = build_cmd->add_flag("--no-completion", no_completion, "Use the visible-surface foreground only");

  // traj
  auto* traj_cmd = app.add_subcommand("traj", "Author camera trajectories");
  traj_cmd->require_subcommand(1);
  fs::path traj_out;
  auto* orbit_cmd = traj_cmd->add_subcommand("orbit", "Object-centred orbit");
  OrbitParams orbit_params;
  std::vector<double> center;
  fs::path orbit_proxy;
  std::size_t orbit_frame = 0;
  int width = 832, height = 480;
  double focal = 0.0;
  double radius = 0.0;
  orbit_cmd->add_option("--out", traj_out, "Output trajectory file")->required();
  orbit_cmd->add_option("--proxy", orbit_proxy, "Proxy whose suggested centre/radius to use");
  orbit_cmd->add_option("--center-frame", orbit_frame, "Proxy frame whose foreground centroid is the default centre");
  orbit_cmd->add_option("--center", center, "Orbit centre x y z")->expected(3);
  orbit_cmd->add_option("--radius", radius, "Orbit radius");
  orbit_cmd->add_option("--start-yaw", orbit_params.start_yaw_deg, "Start yaw in degrees");
  orbit_cmd->add_option("--sweep", orbit_params.sweep_yaw_deg, "Yaw sweep in degrees");
  orbit_cmd->add_option("--pitch", orbit_params.pitch_deg, "Pitch in degrees");
  orbit_cmd->add_option("--frames", orbit_params.frames, "Frame count");
  orbit_cmd->add_option("--width", width, "Image width");
  orbit_cmd->add_option("--height", height, "Image height");
  orbit_cmd->add_option("--focal", focal, "Focal length in pixels (0 = 0.8 * width)");

  auto* key_cmd = traj_cmd->add_subcommand("keyframes", "Interpolate camera keyframes");
  fs::path keys_path;
  key_cmd->add_option("--keys", keys_path, "Keyframe document (JSON)")->required();
  key_cmd->add_option("--out", traj_out, "Output trajectory file")->required();

  auto* bullet_cmd = traj_cmd->add_subcommand("bullet-time", "Freeze time over a span of an existing trajectory");
  fs::path bullet_in;
  int freeze_at = 0, span_begin = 0, span_end = 0;
  bullet_cmd->add_option("--input", bullet_in, "Input trajectory file")->required();
  bullet_cmd->add_option("--freeze-at", freeze_at, "Source frame shown during the span")->required();
  bullet_cmd->add_option("--begin", span_begin, "First frozen output frame")->required();
  bullet_cmd->add_option("--end", span_end, "One past the last frozen output frame")->required();
  bullet_cmd->add_option("--out", traj_out, "Output trajectory file")->required();

  // render
  auto* render_cmd = app.add_subcommand("render", "Render depth scaffolds along a trajectory");
  fs::path render_proxy, render_traj, render_out;
  RenderConfig rc;
  render_cmd->add_option("--proxy", render_proxy, "Proxy directory")->required();
  render_cmd->add_option("--trajectory", render_traj, "Trajectory file")->required();
  render_cmd->add_option("--out", render_out, "Output directory")->required();
  render_cmd->add_option("--splat-radius", rc.splat_radius, "Square splat radius in pixels");
  render_cmd->add_option("--dilation", rc.dilation_passes, "Hole dilation passes");

  // edit
  auto* edit_cmd = app.add_subcommand("edit", "Scale, composite or decimate a proxy");
  fs::path edit_proxy, edit_out, composite_dir;
  double scale_factor = 1.0, placement_scale = 1.0;
  std::vector<double> pivot, placement_t{0.0, 0.0, 0.0};
  int offset = 0;
  std::size_t budget = 0;
  edit_cmd->add_option("--proxy", edit_proxy, "Input proxy directory")->required();
  edit_cmd->add_option("--out", edit_out, "Output proxy directory")->required();
  auto* o_scale = edit_cmd->add_option("--scale", scale_factor, "Uniform foreground scale factor");
  edit_cmd->add_option("--pivot", pivot, "Scale pivot x y z (default: per-frame centroid)")->expected(3);
  auto* o_comp = edit_cmd->add_option("--composite", composite_dir, "Second proxy to composite in");
  edit_cmd->add_option("--placement-scale", placement_scale, "Scale applied to the second proxy");
  edit_cmd->add_option("--placement-translation", placement_t, "Translation applied to the second proxy")
      ->expected(3);
  edit_cmd->add_option("--offset", offset, "Frame offset of the second proxy");
  auto* o_budget = edit_cmd->add_option("--decimate", budget, "Cap every frame view at N points");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve an immutable proxy over HTTP");
  fs::path serve_proxy;
  std::string bind = "127.0.0.1";
  int port = 8080;
  RenderConfig serve_rc;
  serve_cmd->add_option("--proxy", serve_proxy, "Proxy directory")->required();
  serve_cmd->add_option("--bind", bind, "Bind address");
  serve_cmd->add_option("--port", port, "Port");
  serve_cmd->add_option("--splat-radius", serve_rc.splat_radius, "Preview splat radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (*synth_cmd) {
      run_synth(spec_path, synth_out, threads);
    } else if (*build_cmd) {
      if (!config_path.empty()) apply_config_json(cfg, io::read_text(config_path));
      if (*o_input) cfg.input_dir = input;
      if (*o_out) cfg.output_dir = out;
      if (*o_global) cfg.global_dir = fs::path(global_dir);
      if (*o_masks) cfg.masks_dir = fs::path(masks_dir);
      if (*o_canon) cfg.canonical_dir = fs::path(canonical_dir);
      if (*o_conf) cfg.conf_min = conf_min;
      if (*o_voxel) cfg.voxel = voxel;
      if (*o_white) cfg.white_thresh = white;
      if (*o_madk) cfg.robust.mad_k = mad_k;
      if (*o_minc) cfg.robust.min_corr = min_corr;
      if (*o_iters) cfg.robust.iters = iters;
      if (*o_q) cfg.process_noise = q;
      if (*o_r) cfg.measurement_noise = r;
      if (*o_rho) cfg.depth_ratio = rho;
      if (*o_splat) cfg.render.splat_radius = splat;
      if (*o_nosmooth) cfg.smooth = false;
      if (*o_nocomp) cfg.completion = false;
      if (app.get_option("--threads")->count() > 0) cfg.threads = threads;
      run_build_proxy(cfg);
    } else if (*traj_cmd) {
      if (*orbit_cmd) {
        orbit_params.intrinsics = {focal > 0 ? focal : 0.8 * width, focal > 0 ? focal : 0.8 * width,
                                   (width - 1) / 2.0, (height - 1) / 2.0, width, height};
        if (!orbit_proxy.empty()) {
          const OrbitSuggestion s = suggest_orbit(load_proxy(orbit_proxy), orbit_frame);
          orbit_params.center = s.center;
          orbit_params.radius = s.radius;
        }
        if (!center.empty()) orbit_params.center = vec3_of(center);
        if (radius > 0.0) orbit_params.radius = radius;
        const json params = {{"kind", "orbit"},
                             {"center", center.empty() ? std::vector<double>{orbit_params.center.x(),
                                                                             orbit_params.center.y(),
                                                                             orbit_params.center.z()}
                                                       : center},
                             {"radius", orbit_params.radius},
                             {"start_yaw_deg", orbit_params.start_yaw_deg},
                             {"sweep_yaw_deg", orbit_params.sweep_yaw_deg},
                             {"pitch_deg", orbit_params.pitch_deg},
                             {"frames", orbit_params.frames}};
        write_traj(orbit(orbit_params), traj_out, params);
      } else if (*key_cmd) {
        write_traj(keyframes_from_json(io::read_text(keys_path)), traj_out,
                   json{{"kind", "keyframes"}, {"keys", keys_path.string()}});
      } else {
        const Trajectory in = io::read_trajectory(bullet_in);
        write_traj(bullet_time(in, freeze_at, {span_begin, span_end}), traj_out,
                   json{{"kind", "bullet-time"},
                        {"input", bullet_in.string()},
                        {"freeze_at", freeze_at},
                        {"begin", span_begin},
                        {"end", span_end}});
      }
    } else if (*render_cmd) {
      run_render(render_proxy, render_traj, render_out, rc, threads);
    } else if (*edit_cmd) {
      const int ops = (*o_scale ? 1 : 0) + (*o_comp ? 1 : 0) + (*o_budget ? 1 : 0);
      if (ops != 1) throw ValidationError("edit needs exactly one of --scale, --composite, --decimate");
      const Proxy4D proxy = load_proxy(edit_proxy);
      Proxy4D edited;
      json params;
      if (*o_scale) {
        std::optional<Vec3> p;
        if (!pivot.empty()) p = vec3_of(pivot);
        edited = scale_foreground(proxy, scale_factor, p);
        params = {{"op", "scale"}, {"factor", scale_factor}};
      } else if (*o_comp) {
        const Proxy4D other = load_proxy(composite_dir);
        edited = composite(proxy, other, SimilarityST{placement_scale, vec3_of(placement_t)}, offset);
        params = {{"op", "composite"}, {"other", composite_dir.string()}, {"offset", offset}};
      } else {
        edited = decimate(proxy, budget);
        params = {{"op", "decimate"}, {"budget", budget}};
      }
      save_proxy(edited, edit_out);
      std::vector<fs::path> files{edit_out / "proxy.json", edit_out / "background.ply"};
      for (std::size_t t = 0; t < edited.frame_count(); ++t)
        files.push_back(edit_out / ("fg_" + io::frame_tag(t) + ".ply"));
      write_run_manifest({"edit", params.dump(), files, json{{"frames", edited.frame_count()}}.dump()}, edit_out);
      std::cout << "wrote edited proxy (" << edited.frame_count() << " frames) to " << edit_out.string() << "\n";
    } else if (*serve_cmd) {
      auto state = std::make_shared<serve::ServiceState>(load_proxy(serve_proxy), serve_rc);
      serve::Server server(state);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << serve_proxy.string() << " on http://" << bind << ":" << port << std::endl;
      server.listen(bind, port);
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    const ExitCode code = exit_code_for_current_exception();
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(code);
  }
  return 0;
}
