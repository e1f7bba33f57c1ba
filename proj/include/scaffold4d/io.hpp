#pragma once

// Readers and writers for every on-disk format. All multi-byte fields are
// little-endian regardless of the host. Byte layouts are listed in
// docs/formats.md.

#include "scaffold4d/core.hpp"
#include "scaffold4d/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scaffold4d::io {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kPmapVersion = 1;
inline constexpr std::uint16_t kDmapVersion = 1;
inline constexpr std::size_t kPmapHeaderSize = 16;
inline constexpr std::size_t kDmapHeaderSize = 20;
/// Upper bound on pixels per grid accepted by the readers.
inline constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 28;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// PMAP point maps.
Bytes encode_pointmap(const PointMap& pm);
PointMap decode_pointmap(std::span<const std::uint8_t> bytes);
PointMap read_pointmap(const std::filesystem::path& path);
void write_pointmap(const PointMap& pm, const std::filesystem::path& path);

// Binary PGM (P5, maxval 255).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  bool operator==(const GrayImage&) const = default;
};

Bytes encode_pgm(const GrayImage& img);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Pixels >= 128 are foreground.
BinaryMask mask_from_gray(const GrayImage& img);
GrayImage mask_to_gray(const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Color image stored as three PGM planes `<stem>_r.pgm`, `_g`, `_b`.
std::filesystem::path rgb_plane_path(const std::filesystem::path& stem, char channel);
bool rgb_planes_exist(const std::filesystem::path& stem);
RgbImage read_rgb_planes(const std::filesystem::path& stem);
void write_rgb_planes(const RgbImage& img, const std::filesystem::path& stem);

// DMAP depth sequences. Depth 0 marks a pixel with no geometry.
struct DepthSequence {
  int width = 0;
  int height = 0;
  std::vector<std::vector<float>> frames;
  bool operator==(const DepthSequence&) const = default;
};

struct DepthRange {
  float min = 0.0f;
  float max = 0.0f;
};

/// Min/max over strictly positive depths of all frames; empty if none.
std::optional<DepthRange> depth_range(const DepthSequence& seq);
/// Gray preview: 0 for holes, 255 for the nearest depth, 1 for the farthest.
/// A singleton range maps every hit to 255.
GrayImage depth_preview(std::span<const float> depth, int width, int height, std::optional<DepthRange> range);

Bytes encode_depth_sequence(const DepthSequence& seq);
DepthSequence decode_depth_sequence(std::span<const std::uint8_t> bytes);
DepthSequence read_depth_sequence(const std::filesystem::path& path);
/// Writes the DMAP container and, when `preview_dir` is set, one
/// `preview_%04d.pgm` per frame normalized over the whole sequence.
void write_depth_sequence(const DepthSequence& seq, const std::filesystem::path& path,
                          const std::optional<std::filesystem::path>& preview_dir = std::nullopt);

// 8-bit grayscale PNG.
Bytes encode_png(const GrayImage& img);
GrayImage decode_png(std::span<const std::uint8_t> bytes);

// Binary little-endian PLY with float xyz and uchar rgb. Clouds without colors
// are written with the default gray.
Bytes encode_ply(const PointCloud& cloud);
PointCloud decode_ply(std::span<const std::uint8_t> bytes);
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_ply(const std::filesystem::path& path);

// Trajectory documents (JSON syntax).
/// Rotations further than this from orthonormal are rejected on load.
inline constexpr double kTrajectoryOrthoTolerance = 1e-4;
std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(std::string_view text);
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);

/// Formats a frame index as four zero-padded digits.
std::string frame_tag(std::size_t t);

}  // namespace scaffold4d::io
