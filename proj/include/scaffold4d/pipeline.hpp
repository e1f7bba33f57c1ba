#pragma once

// End-to-end commands behind the command-line tool. Every command writes a
// run_manifest.json next to its outputs recording the configuration, a
// SHA-256 content hash per artifact and command statistics.

#include "scaffold4d/align.hpp"
#include "scaffold4d/lift.hpp"
#include "scaffold4d/proxy.hpp"
#include "scaffold4d/render.hpp"
#include "scaffold4d/trajectory.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scaffold4d {

/// Exit codes of the command-line tool.
enum class ExitCode : int { kOk = 0, kDegenerate = 1, kValidation = 2, kIo = 3 };

/// Maps the exception in flight to an exit code; call inside a catch block.
ExitCode exit_code_for_current_exception();

struct PipelineConfig {
  std::filesystem::path input_dir;  // holds global/, masks/, canonical/
  std::optional<std::filesystem::path> global_dir;
  std::optional<std::filesystem::path> masks_dir;
  std::optional<std::filesystem::path> canonical_dir;
  std::filesystem::path output_dir;

  double conf_min = 0.1;
  double voxel = 0.0;
  int white_thresh = 240;
  RobustFitParams robust;
  std::optional<double> process_noise;  // unset: derived from the scene scale
  std::optional<double> measurement_noise;
  double depth_ratio = 10.0;
  bool smooth = true;
  bool completion = true;  // false keeps the visible-surface foreground only
  RenderConfig render;
  int threads = 0;

  std::filesystem::path global_path() const { return global_dir.value_or(input_dir / "global"); }
  std::filesystem::path masks_path() const { return masks_dir.value_or(input_dir / "masks"); }
  std::filesystem::path canonical_path() const { return canonical_dir.value_or(input_dir / "canonical"); }

  void validate() const;
};

/// Applies the keys of a JSON-syntax config document onto `cfg`. Unknown keys
/// are rejected.
void apply_config_json(PipelineConfig& cfg, std::string_view text);
std::string config_to_json(const PipelineConfig& cfg);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_json = "{}";
  std::vector<std::filesystem::path> artifacts;
  std::string stats_json = "{}";
};

/// Writes `dir/name`; artifact paths are stored relative to dir.
void write_run_manifest(const RunManifest& manifest, const std::filesystem::path& dir,
                        const std::string& name = "run_manifest.json");

struct BuildProxyResult {
  Proxy4D proxy;
  std::optional<AlignmentResult> alignment;  // absent without completion
  std::vector<int> empty_foreground_frames;
  std::vector<std::filesystem::path> artifacts;
};

/// Lift, complete, align and assemble. Writes output_dir/proxy/,
/// output_dir/alignment.csv (with completion) and the run manifest.
BuildProxyResult build_proxy(const PipelineConfig& cfg);

/// Number of consecutive global/frame_%04d.pmap files starting at 0.
std::size_t count_frames(const std::filesystem::path& global_dir);

struct RenderRun {
  RenderedSequence sequence;
  std::vector<std::filesystem::path> artifacts;
};

/// Writes depth.dmap, previews/preview_%04d.pgm, visibility/vis_%04d.pgm and
/// the run manifest under `out_dir`.
RenderRun render_to_dir(const Proxy4D& proxy, const Trajectory& traj, const RenderConfig& cfg, int threads,
                        const std::filesystem::path& out_dir);

/// Orbit centre and radius suggested for a proxy: the foreground centroid of
/// `frame` and three times its foreground bounding-box half diagonal. Empty
/// frames fall back to the nearest later, then earlier, non-empty frame.
struct OrbitSuggestion {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};
OrbitSuggestion suggest_orbit(const Proxy4D& proxy, std::size_t frame = 0);

/// Keyframe document: {"frames": T, "intrinsics": {...}, "keyframes":
/// [{"frame": i, "rotation": [9], "translation": [3]}, ...]}.
Trajectory keyframes_from_json(std::string_view text);

}  // namespace scaffold4d
