#include "scaffold4d/align.hpp"
#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"
#include "scaffold4d/pipeline.hpp"
#include "scaffold4d/proxy.hpp"
#include "scaffold4d/render.hpp"
#include "scaffold4d/synth.hpp"
#include "scaffold4d/trajectory.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace scaffold4d;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> rows_of(const Points& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ValidationError(std::string(what) + " must have shape (N, 3)");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

PointCloud cloud_of(const Points& a) {
  PointCloud c;
  for (const Vec3& p : rows_of(a, "points")) c.positions.push_back(p.cast<float>());
  return c;
}

py::array_t<float> positions_of(const PointCloud& c) {
  py::array_t<float> out({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
  if (c.size() > 0) std::memcpy(out.mutable_data(), c.positions.data(), c.size() * sizeof(Vec3f));
  return out;
}

CameraIntrinsics intrinsics_of(const py::dict& d) {
  CameraIntrinsics k;
  k.fx = d["fx"].cast<double>();
  k.fy = d["fy"].cast<double>();
  k.cx = d["cx"].cast<double>();
  k.cy = d["cy"].cast<double>();
  k.width = d["width"].cast<int>();
  k.height = d["height"].cast<int>();
  k.validate();
  return k;
}

py::dict dict_of(const CameraIntrinsics& k) {
  py::dict d;
  d["fx"] = k.fx;
  d["fy"] = k.fy;
  d["cx"] = k.cx;
  d["cy"] = k.cy;
  d["width"] = k.width;
  d["height"] = k.height;
  return d;
}

py::array_t<float> image_of(const std::vector<float>& v, int w, int h) {
  py::array_t<float> out({h, w});
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(float));
  return out;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::array_t<double> rot({static_cast<py::ssize_t>(t.size()), py::ssize_t{3}, py::ssize_t{3}});
  py::array_t<double> trans({static_cast<py::ssize_t>(t.size()), py::ssize_t{3}});
  auto r = rot.mutable_unchecked<3>();
  auto q = trans.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& pose = t.cameras[i].pose;
    for (int a = 0; a < 3; ++a) {
      q(i, a) = pose.translation[a];
      for (int b = 0; b < 3; ++b) r(i, a, b) = pose.rotation(a, b);
    }
  }
  py::dict d;
  d["rotation"] = rot;
  d["translation"] = trans;
  d["intrinsics"] = t.size() > 0 ? dict_of(t.cameras.front().intrinsics) : py::dict();
  d["time_warp"] = t.time_warp;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "4D point-cloud proxies and depth scaffolds";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<DegeneracyError>(m, "DegeneracyError", PyExc_RuntimeError);

  m.def(
      "fit_scale_translation",
      [](const Points& canonical, const Points& global, std::optional<std::vector<double>> weights) {
        CorrespondenceSet c;
        const auto p = rows_of(canonical, "canonical");
        const auto q = rows_of(global, "global");
        if (p.size() != q.size()) throw ValidationError("canonical and global must have the same length");
        if (weights && weights->size() != p.size()) throw ValidationError("one weight per pair is required");
        for (std::size_t i = 0; i < p.size(); ++i) c.push(p[i], q[i], weights ? (*weights)[i] : 1.0, 0, 0);
        const ScaleTranslationFit fit = fit_scale_translation(c);
        return py::make_tuple(fit.st.scale, fit.st.translation);
      },
      py::arg("canonical"), py::arg("global_points"), py::arg("weights") = py::none(),
      "Weighted least-squares scale s and translation t with s * canonical + t ~ global.");

  m.def(
      "render_depth",
      [](const Points& points, const py::dict& intrinsics, const Mat3& rotation, const Vec3& translation,
         int splat_radius, int dilation) {
        const Camera cam{intrinsics_of(intrinsics), {rotation, translation}};
        cam.pose.validate();
        const DepthFrame f = render_depth(cloud_of(points), cam, {splat_radius, dilation});
        return image_of(f.depth, f.width, f.height);
      },
      py::arg("points"), py::arg("intrinsics"), py::arg("rotation"), py::arg("translation"),
      py::arg("splat_radius") = 1, py::arg("dilation") = 0,
      "Z-buffered depth image (H, W) of world points; 0 marks holes.");

  m.def(
      "orbit",
      [](const Vec3& center, double radius, const py::dict& intrinsics, double start_yaw_deg, double sweep_yaw_deg,
         double pitch_deg, int frames) {
        OrbitParams p;
        p.center = center;
        p.radius = radius;
        p.intrinsics = intrinsics_of(intrinsics);
        p.start_yaw_deg = start_yaw_deg;
        p.sweep_yaw_deg = sweep_yaw_deg;
        p.pitch_deg = pitch_deg;
        p.frames = frames;
        return trajectory_dict(orbit(p));
      },
      py::arg("center"), py::arg("radius"), py::arg("intrinsics"), py::arg("start_yaw_deg") = 0.0,
      py::arg("sweep_yaw_deg") = 180.0, py::arg("pitch_deg") = 0.0, py::arg("frames") = 45);

  m.def("read_trajectory", [](const std::filesystem::path& p) { return trajectory_dict(io::read_trajectory(p)); });

  m.def("read_pointmap", [](const std::filesystem::path& p) {
    const PointMap pm = io::read_pointmap(p);
    py::array_t<float> pts({pm.height, pm.width, 3});
    std::memcpy(pts.mutable_data(), pm.points.data(), pm.pixel_count() * sizeof(Vec3f));
    py::object conf = py::none();
    if (pm.has_confidence()) conf = image_of(pm.confidence, pm.width, pm.height);
    return py::make_tuple(pts, conf);
  });

  m.def("read_depth_sequence", [](const std::filesystem::path& p) {
    const io::DepthSequence seq = io::read_depth_sequence(p);
    py::array_t<float> out({static_cast<py::ssize_t>(seq.frames.size()), py::ssize_t{seq.height},
                            py::ssize_t{seq.width}});
    float* dst = out.mutable_data();
    for (const auto& f : seq.frames) dst = std::copy(f.begin(), f.end(), dst);
    return out;
  });

  m.def("read_ply", [](const std::filesystem::path& p) { return positions_of(io::read_ply(p)); });

  m.def(
      "write_fixture",
      [](const std::string& scene_json, const std::filesystem::path& out, int threads) {
        const auto spec = synth::scene_from_json(scene_json);
        const auto noise = synth::noise_from_json(scene_json);
        return synth::write_fixture(spec, noise, out, threads).size();
      },
      py::arg("scene_json"), py::arg("out_dir"), py::arg("threads") = 1,
      "Writes a synthetic fixture; returns the number of files written.");

  m.def(
      "build_proxy",
      [](const std::filesystem::path& input, const std::filesystem::path& output, const std::string& config_json) {
        PipelineConfig cfg;
        apply_config_json(cfg, config_json);
        cfg.input_dir = input;
        cfg.output_dir = output;
        const BuildProxyResult r = build_proxy(cfg);
        py::dict d;
        d["frames"] = r.proxy.frame_count();
        d["scene_scale"] = r.proxy.scene_scale;
        d["background_points"] = r.proxy.background.size();
        std::vector<double> scales;
        if (r.alignment)
          for (const auto& a : r.alignment->smoothed) scales.push_back(a.st.scale);
        d["scales"] = scales;
        d["empty_foreground_frames"] = r.empty_foreground_frames;
        return d;
      },
      py::arg("input_dir"), py::arg("output_dir"), py::arg("config_json") = "{}");

  m.def("sha256_file", &sha256_file);
}
