#include "doctest.h"

#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/pipeline.hpp"
#include "scaffold4d/synth.hpp"
#include "support.hpp"

#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace scaffold4d;
namespace fs = std::filesystem;
using nlohmann::json;

#ifndef SCAFFOLD4D_CLI
#error "SCAFFOLD4D_CLI must name the command-line binary"
#endif

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "scaffold4d_test_cli.log";
  const std::string cmd = std::string(SCAFFOLD4D_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = io::read_text(log);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

synth::SceneSpec tiny_scene() {
  synth::SceneSpec s;
  s.width = 80;
  s.height = 48;
  s.frames = 3;
  s.track.translation_start = Vec3(-0.3, 0.3, 4.0);
  s.track.translation_end = Vec3(0.3, 0.3, 4.0);
  s.canonical = {0.5, 64, 64};
  s.object.samples = 1000;
  return s;
}

// Fixture shared by the tests; written once.
const fs::path& fixture() {
  static const fs::path dir = [] {
    const fs::path d = testing::temp_dir("pipeline_fixture");
    synth::write_fixture(tiny_scene(), {}, d, 1);
    return d;
  }();
  return dir;
}

json read_json(const fs::path& p) { return json::parse(io::read_text(p)); }

}  // namespace

TEST_CASE("sha256 of a known vector") {
  const fs::path dir = testing::temp_dir("sha");
  io::write_text(dir / "abc", "abc");
  CHECK(sha256_file(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  io::write_text(dir / "empty", "");
  CHECK(sha256_file(dir / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("exit codes follow the error class") {
  auto code = [](auto fn) {
    try {
      fn();
    } catch (...) {
      return exit_code_for_current_exception();
    }
    return ExitCode::kOk;
  };
  CHECK(code([] { throw ValidationError("x"); }) == ExitCode::kValidation);
  CHECK(code([] { throw FormatError("x"); }) == ExitCode::kValidation);
  CHECK(code([] { throw IoError("x"); }) == ExitCode::kIo);
  CHECK(code([] { throw DegeneracyError("x"); }) == ExitCode::kDegenerate);
}

TEST_CASE("config documents: keys apply, unknown keys are rejected, output round trips") {
  PipelineConfig cfg;
  apply_config_json(cfg, R"({"conf_min": 0.3, "mad_k": 2.5, "smooth": false, "process_noise": 0.01})");
  CHECK(cfg.conf_min == 0.3);
  CHECK(cfg.robust.mad_k == 2.5);
  CHECK_FALSE(cfg.smooth);
  CHECK(*cfg.process_noise == 0.01);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"conf_mn": 0.3})"), ValidationError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"conf_min": "high"})"), ValidationError);

  PipelineConfig again;
  apply_config_json(again, config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("build_proxy: noiseless fixture, manifest hashes every artifact") {
  const fs::path out = testing::temp_dir("pipeline_build");
  PipelineConfig cfg;
  cfg.input_dir = fixture();
  cfg.output_dir = out;
  cfg.threads = 1;
  const BuildProxyResult r = build_proxy(cfg);
  REQUIRE(r.alignment);
  CHECK(r.proxy.frame_count() == 3);
  const json track = read_json(fixture() / "truth" / "track.json");
  for (std::size_t t = 0; t < 3; ++t) {
    const double expect = track["expected_fit_scale"][t].get<double>();
    CHECK(r.alignment->raw[t].st.scale == doctest::Approx(expect).epsilon(1e-5));
    CHECK_FALSE(r.alignment->raw[t].degenerate);
  }

  const json manifest = read_json(out / "run_manifest.json");
  CHECK(manifest["command"] == "build-proxy");
  CHECK(manifest["artifacts"].size() == r.artifacts.size());
  for (const auto& a : manifest["artifacts"]) {
    const fs::path p = out / a["path"].get<std::string>();
    REQUIRE(fs::exists(p));
    CHECK(a["sha256"] == sha256_file(p));
    CHECK(a["bytes"] == fs::file_size(p));
  }
  CHECK(fs::exists(out / "alignment.csv"));
}

TEST_CASE("build_proxy: output bytes do not depend on the thread count") {
  const fs::path a = testing::temp_dir("pipeline_t1");
  const fs::path b = testing::temp_dir("pipeline_t3");
  PipelineConfig cfg;
  cfg.input_dir = fixture();
  cfg.output_dir = a;
  cfg.threads = 1;
  build_proxy(cfg);
  cfg.output_dir = b;
  cfg.threads = 3;
  build_proxy(cfg);
  for (const char* f : {"proxy/proxy.json", "proxy/background.ply", "proxy/fg_0000.ply", "proxy/fg_0002.ply",
                        "alignment.csv"})
    CHECK(io::read_file(a / f) == io::read_file(b / f));
}

TEST_CASE("build_proxy: without completion the foreground is the visible surface") {
  const fs::path out = testing::temp_dir("pipeline_nocomp");
  PipelineConfig cfg;
  cfg.input_dir = fixture();
  cfg.output_dir = out;
  cfg.completion = false;
  const BuildProxyResult r = build_proxy(cfg);
  CHECK_FALSE(r.alignment);
  CHECK_FALSE(fs::exists(out / "alignment.csv"));
  const GlobalFrame g = synth::simulate_capture(tiny_scene(), 1);
  CHECK(r.proxy.foreground[1].size() == g.mask.count());
}

TEST_CASE("cli: synth then build-proxy then orbit then render") {
  const fs::path dir = testing::temp_dir("pipeline_cli");
  io::write_text(dir / "scene.json", synth::scene_to_json(tiny_scene()));
  Run r = cli("synth --spec " + q(dir / "scene.json") + " --out " + q(dir / "fx"));
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "fx" / "run_manifest.json"));

  r = cli("build-proxy --input " + q(dir / "fx") + " --out " + q(dir / "out") + " --threads 2");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("3 frames") != std::string::npos);

  r = cli("traj orbit --proxy " + q(dir / "out" / "proxy") + " --sweep 120 --width 64 --height 48 --frames 3 --out " +
          q(dir / "orbit.json"));
  REQUIRE(r.code == 0);
  const Trajectory traj = io::read_trajectory(dir / "orbit.json");
  CHECK(traj.size() == 3);
  CHECK(fs::exists(dir / "orbit.json.manifest.json"));

  r = cli("render --proxy " + q(dir / "out" / "proxy") + " --trajectory " + q(dir / "orbit.json") + " --out " +
          q(dir / "render"));
  REQUIRE(r.code == 0);
  const io::DepthSequence seq = io::read_depth_sequence(dir / "render" / "depth.dmap");
  CHECK(seq.frames.size() == 3);
  CHECK(seq.width == 64);
  CHECK(fs::exists(dir / "render" / "previews" / "preview_0002.pgm"));
  CHECK(fs::exists(dir / "render" / "visibility" / "vis_0002.pgm"));
  const json m = read_json(dir / "render" / "run_manifest.json");
  CHECK(m["stats"]["frames_per_second"].get<double>() > 0.0);
}

TEST_CASE("cli: the default orbit of 45 frames sweeping 120 degrees validates") {
  const fs::path dir = testing::temp_dir("pipeline_orbit");
  const Run r = cli("traj orbit --center 0 0 4 --radius 2 --sweep 120 --out " + q(dir / "o.json"));
  REQUIRE(r.code == 0);
  const Trajectory t = io::read_trajectory(dir / "o.json");
  CHECK(t.size() == 45);
  CHECK_NOTHROW(t.validate());
  for (const auto& c : t.cameras) CHECK((c.pose.center() - Vec3(0, 0, 4)).norm() == doctest::Approx(2.0));
}

TEST_CASE("cli: a missing mask exits with code 2 and names the file") {
  const fs::path dir = testing::temp_dir("pipeline_missing");
  fs::copy(fixture(), dir / "fx", fs::copy_options::recursive);
  fs::remove(dir / "fx" / "masks" / "mask_0001.pgm");
  const Run r = cli("build-proxy --input " + q(dir / "fx") + " --out " + q(dir / "out"));
  CHECK(r.code == 2);
  CHECK(r.output.find("mask_0001.pgm") != std::string::npos);
}

TEST_CASE("cli: flags override the config file") {
  const fs::path dir = testing::temp_dir("pipeline_config");
  io::write_text(dir / "cfg.json", R"({"conf_min": 0.5, "voxel": 0.02, "input": ")" + fixture().string() + R"("})");
  const Run r = cli("build-proxy --config " + q(dir / "cfg.json") + " --conf-min 0.2 --out " + q(dir / "out"));
  REQUIRE(r.code == 0);
  const json m = read_json(dir / "out" / "run_manifest.json");
  CHECK(m["config"]["conf_min"] == 0.2);
  CHECK(m["config"]["voxel"] == 0.02);

  io::write_text(dir / "bad.json", R"({"bogus": 1})");
  CHECK(cli("build-proxy --config " + q(dir / "bad.json") + " --out " + q(dir / "o2")).code == 2);
}

TEST_CASE("cli: malformed inputs map to validation and io exit codes") {
  const fs::path dir = testing::temp_dir("pipeline_bad");
  io::write_text(dir / "bad_traj.json",
                 R"({"frame_count":1,"intrinsics":{"fx":10,"fy":10,"cx":5,"cy":5,"width":10,"height":10},
                     "frames":[{"rotation":[1.01,0,0,0,1,0,0,0,1],"translation":[0,0,0]}]})");
  PipelineConfig cfg;
  cfg.input_dir = fixture();
  cfg.output_dir = dir / "out";
  build_proxy(cfg);
  CHECK(cli("render --proxy " + q(dir / "out" / "proxy") + " --trajectory " + q(dir / "bad_traj.json") + " --out " +
            q(dir / "r"))
            .code == 2);
  CHECK(cli("render --proxy " + q(dir / "out" / "proxy") + " --trajectory " + q(dir / "nope.json") + " --out " +
            q(dir / "r"))
            .code == 3);
  CHECK(cli("build-proxy --out " + q(dir / "x")).code == 2);
  CHECK(cli("no-such-command").code == 2);
}

TEST_CASE("cli: keyframes and bullet time") {
  const fs::path dir = testing::temp_dir("pipeline_keys");
  io::write_text(dir / "keys.json", R"({"frames": 5,
      "intrinsics": {"fx": 50, "fy": 50, "cx": 31.5, "cy": 23.5, "width": 64, "height": 48},
      "keyframes": [{"frame": 0, "rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,0,0]},
                    {"frame": 4, "rotation": [0,0,-1,0,1,0,1,0,0], "translation": [0,0,2]}]})");
  REQUIRE(cli("traj keyframes --keys " + q(dir / "keys.json") + " --out " + q(dir / "k.json")).code == 0);
  const Trajectory k = io::read_trajectory(dir / "k.json");
  REQUIRE(k.size() == 5);
  CHECK((k.cameras[2].pose.translation - Vec3(0, 0, 1)).norm() < 1e-12);

  REQUIRE(cli("traj bullet-time --input " + q(dir / "k.json") + " --freeze-at 1 --begin 1 --end 4 --out " +
              q(dir / "b.json"))
              .code == 0);
  CHECK(io::read_trajectory(dir / "b.json").time_warp == std::vector<int>{0, 1, 1, 1, 4});
}

TEST_CASE("cli: edits write loadable proxies") {
  const fs::path dir = testing::temp_dir("pipeline_edit");
  PipelineConfig cfg;
  cfg.input_dir = fixture();
  cfg.output_dir = dir / "out";
  const BuildProxyResult base = build_proxy(cfg);
  const std::string proxy = q(dir / "out" / "proxy");

  REQUIRE(cli("edit --proxy " + proxy + " --scale 2 --out " + q(dir / "scaled")).code == 0);
  const Proxy4D scaled = load_proxy(dir / "scaled");
  CHECK((scaled.foreground[0].centroid() - base.proxy.foreground[0].centroid()).norm() < 1e-4);

  REQUIRE(cli("edit --proxy " + proxy + " --composite " + proxy + " --placement-translation 1 0 0 --offset 1 --out " +
              q(dir / "comp"))
              .code == 0);
  const Proxy4D comp = load_proxy(dir / "comp");
  CHECK(comp.frame_count() == 2);
  CHECK(comp.foreground[0].size() == base.proxy.foreground[0].size() + base.proxy.foreground[1].size());

  REQUIRE(cli("edit --proxy " + proxy + " --decimate 500 --out " + q(dir / "dec")).code == 0);
  const Proxy4D dec = load_proxy(dir / "dec");
  for (std::size_t t = 0; t < dec.frame_count(); ++t) CHECK(frame_view(dec, t).size() <= 500);

  CHECK(cli("edit --proxy " + proxy + " --scale 2 --decimate 5 --out " + q(dir / "x")).code == 2);
}

TEST_CASE("suggested orbit centres on the chosen frame's foreground") {
  PointCloud bg;
  bg.positions = {Vec3f(0, 0, 0), Vec3f(10, 0, 0)};
  PointCloud a, b;
  a.positions = {Vec3f(1, 0, 0), Vec3f(3, 0, 0)};
  b.positions = {Vec3f(5, 1, 0), Vec3f(5, 3, 0)};
  const Proxy4D p = assemble(bg, {PointCloud{}, a, b});
  const OrbitSuggestion s0 = suggest_orbit(p, 0);  // empty: falls forward to frame 1
  CHECK((s0.center - Vec3(2, 0, 0)).norm() < 1e-12);
  CHECK(s0.radius == doctest::Approx(3.0));
  CHECK((suggest_orbit(p, 2).center - Vec3(5, 2, 0)).norm() < 1e-12);
  CHECK_THROWS_AS(suggest_orbit(p, 3), ValidationError);
}
