#include "scaffold4d/io.hpp"

#include "scaffold4d/bytes.hpp"
#include "scaffold4d/error.hpp"

#include <png.h>

#include <Eigen/SVD>
#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scaffold4d::io {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Canonical bit pattern written for invalid pixels.
constexpr std::uint32_t kSentinelBits = 0x7fc00000u;

std::uint64_t checked_pixels(std::uint32_t w, std::uint32_t h, std::uint64_t per_pixel_limit, const std::string& what) {
  if (w == 0 || h == 0) throw FormatError(what + ": zero dimension");
  const std::uint64_t n = std::uint64_t{w} * h;
  if (n > kMaxPixels || n > per_pixel_limit) throw FormatError(what + ": dimension overflow");
  return n;
}

// Skips whitespace and '#' comments in a netpbm header.
void skip_pnm_space(std::span<const std::uint8_t> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
}

std::uint32_t parse_pnm_uint(std::span<const std::uint8_t> b, std::size_t& pos) {
  skip_pnm_space(b, pos);
  if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError("pgm: malformed header");
  std::uint64_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos++] - '0');
    if (v > 0xffffffffu) throw FormatError("pgm: dimension overflow");
  }
  return static_cast<std::uint32_t>(v);
}

std::vector<double> json_reals(const json& j, std::size_t n, const char* field) {
  if (!j.is_array() || j.size() != n)
    throw FormatError(std::string("trajectory: '") + field + "' must hold " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(std::string("trajectory: '") + field + "' must be numeric");
    out.push_back(v.get<double>());
  }
  return out;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

// ---------------------------------------------------------------- PMAP

Bytes encode_pointmap(const PointMap& pm) {
  pm.validate();
  const std::size_t n = pm.pixel_count();
  ByteWriter w(kPmapHeaderSize + n * (pm.has_confidence() ? 16 : 12));
  w.raw("PMAP");
  w.u16(kPmapVersion);
  w.u16(pm.has_confidence() ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(pm.width));
  w.u32(static_cast<std::uint32_t>(pm.height));
  for (std::size_t i = 0; i < n; ++i) {
    if (pm.is_valid(i)) {
      for (int c = 0; c < 3; ++c) w.f32(pm.points[i][c]);
    } else {
      for (int c = 0; c < 3; ++c) w.u32(kSentinelBits);
    }
  }
  if (pm.has_confidence())
    for (std::size_t i = 0; i < n; ++i) w.f32(pm.is_valid(i) ? pm.confidence[i] : 0.0f);
  return w.take();
}

PointMap decode_pointmap(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "pmap");
  if (bytes.size() < 4 || r.raw(4) != "PMAP") throw FormatError("pmap: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kPmapVersion) throw FormatError("pmap: unsupported version " + std::to_string(version));
  const std::uint16_t flags = r.u16();
  if (flags & ~1u) throw FormatError("pmap: unknown flag bits");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const bool has_conf = flags & 1u;
  const std::size_t per_pixel = has_conf ? 16 : 12;
  const std::uint64_t n = checked_pixels(w, h, std::numeric_limits<std::size_t>::max() / per_pixel, "pmap");
  r.need(n * per_pixel);
  if (r.remaining() != n * per_pixel) throw FormatError("pmap: trailing bytes after payload");

  PointMap pm(static_cast<int>(w), static_cast<int>(h), has_conf);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3f p;
    for (int c = 0; c < 3; ++c) p[c] = r.f32();
    if (p.allFinite()) {
      pm.points[i] = p;
    } else if (!p.array().isNaN().all()) {
      throw FormatError("pmap: non-finite value outside the invalid-pixel sentinel");
    }
  }
  if (has_conf) {
    for (std::size_t i = 0; i < n; ++i) {
      const float c = r.f32();
      if (!(c >= 0.0f && c <= 1.0f)) throw FormatError("pmap: confidence outside [0, 1]");
      if (!pm.is_valid(i) && c != 0.0f) throw FormatError("pmap: invalid pixel with nonzero confidence");
      pm.confidence[i] = c;
    }
  }
  return pm;
}

PointMap read_pointmap(const fs::path& path) {
  try {
    return decode_pointmap(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pointmap(const PointMap& pm, const fs::path& path) { write_file(path, encode_pointmap(pm)); }

// ---------------------------------------------------------------- PGM

Bytes encode_pgm(const GrayImage& img) {
  if (img.width <= 0 || img.height <= 0 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw ValidationError("pgm: image dimensions do not match pixel count");
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("pgm: non-P5 header");
  std::size_t pos = 2;
  const std::uint32_t w = parse_pnm_uint(bytes, pos);
  const std::uint32_t h = parse_pnm_uint(bytes, pos);
  const std::uint32_t maxval = parse_pnm_uint(bytes, pos);
  if (maxval != 255) throw FormatError("pgm: maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("pgm: malformed header");
  ++pos;
  const std::uint64_t n = checked_pixels(w, h, std::numeric_limits<std::size_t>::max(), "pgm");
  if (bytes.size() - pos < n) throw FormatError("pgm: truncated payload");
  GrayImage img{static_cast<int>(w), static_cast<int>(h), {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

GrayImage read_pgm(const fs::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pgm(const GrayImage& img, const fs::path& path) { write_file(path, encode_pgm(img)); }

BinaryMask mask_from_gray(const GrayImage& img) {
  BinaryMask m(img.width, img.height, false);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) m.values[i] = img.pixels[i] >= 128 ? 1 : 0;
  return m;
}

GrayImage mask_to_gray(const BinaryMask& mask) {
  GrayImage img{mask.width, mask.height, std::vector<std::uint8_t>(mask.pixel_count())};
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
  return img;
}

BinaryMask read_mask(const fs::path& path) { return mask_from_gray(read_pgm(path)); }
void write_mask(const BinaryMask& mask, const fs::path& path) { write_pgm(mask_to_gray(mask), path); }

fs::path rgb_plane_path(const fs::path& stem, char channel) {
  return fs::path(stem.string() + "_" + channel + ".pgm");
}

bool rgb_planes_exist(const fs::path& stem) {
  return fs::exists(rgb_plane_path(stem, 'r')) && fs::exists(rgb_plane_path(stem, 'g')) &&
         fs::exists(rgb_plane_path(stem, 'b'));
}

RgbImage read_rgb_planes(const fs::path& stem) {
  const GrayImage r = read_pgm(rgb_plane_path(stem, 'r'));
  const GrayImage g = read_pgm(rgb_plane_path(stem, 'g'));
  const GrayImage b = read_pgm(rgb_plane_path(stem, 'b'));
  if (g.width != r.width || g.height != r.height || b.width != r.width || b.height != r.height)
    throw ValidationError(stem.string() + ": color planes differ in size");
  RgbImage img(r.width, r.height, Rgb{0, 0, 0});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = {r.pixels[i], g.pixels[i], b.pixels[i]};
  return img;
}

void write_rgb_planes(const RgbImage& img, const fs::path& stem) {
  for (int c = 0; c < 3; ++c) {
    GrayImage plane{img.width, img.height, std::vector<std::uint8_t>(img.pixels.size())};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) plane.pixels[i] = img.pixels[i][c];
    write_pgm(plane, rgb_plane_path(stem, "rgb"[c]));
  }
}

// ---------------------------------------------------------------- DMAP

std::optional<DepthRange> depth_range(const DepthSequence& seq) {
  std::optional<DepthRange> range;
  for (const auto& frame : seq.frames) {
    for (float d : frame) {
      if (!(d > 0.0f)) continue;
      if (!range) {
        range = DepthRange{d, d};
      } else {
        range->min = std::min(range->min, d);
        range->max = std::max(range->max, d);
      }
    }
  }
  return range;
}

GrayImage depth_preview(std::span<const float> depth, int width, int height, std::optional<DepthRange> range) {
  GrayImage img{width, height, std::vector<std::uint8_t>(depth.size(), 0)};
  if (!range) return img;
  const double lo = range->min;
  const double hi = range->max;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = depth[i];
    if (!(d > 0.0)) continue;
    if (hi <= lo) {
      img.pixels[i] = 255;
      continue;
    }
    const double t = std::clamp((hi - d) / (hi - lo), 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(1 + std::lround(254.0 * t));
  }
  return img;
}

Bytes encode_depth_sequence(const DepthSequence& seq) {
  if (seq.width <= 0 || seq.height <= 0) throw ValidationError("dmap: dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(seq.width) * seq.height;
  ByteWriter w(kDmapHeaderSize + 4 * n * seq.frames.size());
  w.raw("DMAP");
  w.u16(kDmapVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(seq.width));
  w.u32(static_cast<std::uint32_t>(seq.height));
  w.u32(static_cast<std::uint32_t>(seq.frames.size()));
  for (const auto& frame : seq.frames) {
    if (frame.size() != n) throw ValidationError("dmap: frame size does not match dimensions");
    for (float d : frame) {
      if (!(d >= 0.0f) || !std::isfinite(d)) throw ValidationError("dmap: depths must be finite and >= 0");
      w.f32(d);
    }
  }
  return w.take();
}

DepthSequence decode_depth_sequence(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "dmap");
  if (bytes.size() < 4 || r.raw(4) != "DMAP") throw FormatError("dmap: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kDmapVersion) throw FormatError("dmap: unsupported version " + std::to_string(version));
  if (r.u16() != 0) throw FormatError("dmap: reserved field must be zero");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t frames = r.u32();
  const std::uint64_t n = checked_pixels(w, h, std::numeric_limits<std::size_t>::max() / 4, "dmap");
  if (frames != 0 && n > std::numeric_limits<std::size_t>::max() / 4 / frames) throw FormatError("dmap: dimension overflow");
  r.need(4 * n * frames);
  if (r.remaining() != 4 * n * frames) throw FormatError("dmap: trailing bytes after payload");
  DepthSequence seq{static_cast<int>(w), static_cast<int>(h), {}};
  seq.frames.resize(frames);
  for (auto& frame : seq.frames) {
    frame.resize(n);
    for (auto& d : frame) {
      d = r.f32();
      if (!(d >= 0.0f) || !std::isfinite(d)) throw FormatError("dmap: negative or non-finite depth");
    }
  }
  return seq;
}

DepthSequence read_depth_sequence(const fs::path& path) {
  try {
    return decode_depth_sequence(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_depth_sequence(const DepthSequence& seq, const fs::path& path, const std::optional<fs::path>& preview_dir) {
  write_file(path, encode_depth_sequence(seq));
  if (!preview_dir) return;
  fs::create_directories(*preview_dir);
  const auto range = depth_range(seq);
  for (std::size_t t = 0; t < seq.frames.size(); ++t)
    write_pgm(depth_preview(seq.frames[t], seq.width, seq.height, range),
              *preview_dir / ("preview_" + frame_tag(t) + ".pgm"));
}

// ---------------------------------------------------------------- PNG

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_noop_flush(png_structp) {}

struct PngSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_consume(png_structp png, png_bytep data, png_size_t length) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->bytes.size() - src->pos < length) png_error(png, "truncated png");
  std::memcpy(data, src->bytes.data() + src->pos, length);
  src->pos += length;
}

void png_quiet(png_structp, png_const_charp) {}

}  // namespace

// libpng reports errors by longjmp; only trivially destructible locals live
// between setjmp and the libpng calls below.
Bytes encode_png(const GrayImage& img) {
  if (img.width <= 0 || img.height <= 0 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw ValidationError("png: image dimensions do not match pixel count");
  Bytes out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_quiet);
  if (!png) throw IoError("png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: encoding failed");
  }
  png_set_write_fn(png, &out, png_append, png_noop_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("png: bad signature");
  GrayImage img;
  PngSource src{bytes, 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_quiet);
  if (!png) throw IoError("png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: malformed or truncated stream");
  }
  png_set_read_fn(png, &src, png_consume);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: only 8-bit grayscale is supported");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// ---------------------------------------------------------------- PLY

namespace {
constexpr std::string_view kPlyProperties[] = {"float x", "float y", "float z",
                                               "uchar red", "uchar green", "uchar blue"};
}

Bytes encode_ply(const PointCloud& cloud) {
  cloud.validate();
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(cloud.size()) + "\n";
  for (auto p : kPlyProperties) header += "property " + std::string(p) + "\n";
  header += "end_header\n";
  ByteWriter w(header.size() + 15 * cloud.size());
  w.raw(header);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) w.f32(cloud.positions[i][c]);
    const Rgb rgb = cloud.color_at(i);
    for (int c = 0; c < 3; ++c) w.u8(rgb[c]);
  }
  return w.take();
}

PointCloud decode_ply(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto begin = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw FormatError("ply: unterminated header");
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(begin), bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    ++pos;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "ply") throw FormatError("ply: bad magic");
  std::uint64_t vertices = 0;
  bool saw_format = false;
  bool saw_vertex = false;
  std::size_t prop = 0;
  for (;;) {
    const std::string line = next_line();
    if (line == "end_header") break;
    if (line.rfind("comment", 0) == 0 || line.rfind("obj_info", 0) == 0) continue;
    if (line.rfind("format ", 0) == 0) {
      if (line != "format binary_little_endian 1.0") throw FormatError("ply: unsupported format '" + line + "'");
      saw_format = true;
    } else if (line.rfind("element ", 0) == 0) {
      std::istringstream ss(line.substr(8));
      std::string name;
      ss >> name >> vertices;
      if (name != "vertex" || saw_vertex || !ss) throw FormatError("ply: only a single vertex element is supported");
      saw_vertex = true;
    } else if (line.rfind("property ", 0) == 0) {
      if (!saw_vertex || prop >= std::size(kPlyProperties) || line.substr(9) != kPlyProperties[prop])
        throw FormatError("ply: unexpected property '" + line + "'");
      ++prop;
    } else {
      throw FormatError("ply: unexpected header line '" + line + "'");
    }
  }
  if (!saw_format || !saw_vertex || prop != std::size(kPlyProperties)) throw FormatError("ply: incomplete header");
  if (vertices > std::numeric_limits<std::size_t>::max() / 15) throw FormatError("ply: dimension overflow");
  ByteReader r(bytes.subspan(pos), "ply");
  r.need(vertices * 15);
  PointCloud cloud;
  cloud.positions.resize(vertices);
  cloud.colors.resize(vertices);
  for (std::size_t i = 0; i < vertices; ++i) {
    for (int c = 0; c < 3; ++c) cloud.positions[i][c] = r.f32();
    if (!cloud.positions[i].allFinite()) throw FormatError("ply: non-finite vertex");
    cloud.colors[i] = {r.u8(), r.u8(), r.u8()};
  }
  return cloud;
}

void write_ply(const PointCloud& cloud, const fs::path& path) { write_file(path, encode_ply(cloud)); }

PointCloud read_ply(const fs::path& path) {
  try {
    return decode_ply(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- trajectory

std::string trajectory_to_json(const Trajectory& traj) {
  traj.validate();
  const CameraIntrinsics& k = traj.cameras.front().intrinsics;
  json doc;
  doc["frame_count"] = traj.size();
  doc["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  json frames = json::array();
  for (const auto& cam : traj.cameras) {
    if (!(cam.intrinsics == k)) throw ValidationError("trajectory: all frames must share one set of intrinsics");
    json rot = json::array();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rot.push_back(cam.pose.rotation(i, j));
    const Vec3& t = cam.pose.translation;
    frames.push_back({{"rotation", rot}, {"translation", {t.x(), t.y(), t.z()}}});
  }
  doc["frames"] = std::move(frames);
  if (!traj.time_warp.empty()) doc["time_warp"] = traj.time_warp;
  if (traj.source_frame_count) doc["source_frame_count"] = *traj.source_frame_count;
  return doc.dump(2) + "\n";
}

Trajectory trajectory_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("trajectory: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw FormatError("trajectory: document must be an object");
    const auto count = doc.at("frame_count").get<long long>();
    if (count < 1) throw FormatError("trajectory: frame_count must be >= 1");
    const json& kj = doc.at("intrinsics");
    CameraIntrinsics k;
    k.fx = kj.at("fx").get<double>();
    k.fy = kj.at("fy").get<double>();
    k.cx = kj.at("cx").get<double>();
    k.cy = kj.at("cy").get<double>();
    k.width = kj.at("width").get<int>();
    k.height = kj.at("height").get<int>();
    k.validate();

    const json& frames = doc.at("frames");
    if (!frames.is_array() || static_cast<long long>(frames.size()) != count)
      throw FormatError("trajectory: 'frames' length differs from frame_count");
    Trajectory traj;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto rot = json_reals(frames[f].at("rotation"), 9, "rotation");
      const auto tr = json_reals(frames[f].at("translation"), 3, "translation");
      Camera cam;
      cam.intrinsics = k;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cam.pose.rotation(i, j) = rot[3 * i + j];
      cam.pose.translation = Vec3(tr[0], tr[1], tr[2]);
      if (!cam.pose.is_valid(kTrajectoryOrthoTolerance))
        throw FormatError("trajectory: frame " + std::to_string(f) + " rotation is not orthonormal");
      const double err = (cam.pose.rotation * cam.pose.rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
      if (err > 1e-12) cam.pose.rotation = nearest_rotation(cam.pose.rotation);
      traj.cameras.push_back(cam);
    }
    if (doc.contains("source_frame_count")) traj.source_frame_count = doc["source_frame_count"].get<int>();
    if (doc.contains("time_warp")) {
      const json& warp = doc["time_warp"];
      if (!warp.is_array() || static_cast<long long>(warp.size()) != count)
        throw FormatError("trajectory: 'time_warp' length differs from frame_count");
      for (const auto& v : warp) traj.time_warp.push_back(v.get<int>());
    }
    traj.validate();
    return traj;
  } catch (const json::exception& e) {
    throw FormatError(std::string("trajectory: ") + e.what());
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    throw FormatError(std::string("trajectory: ") + e.what());
  }
}

Trajectory read_trajectory(const fs::path& path) {
  try {
    return trajectory_from_json(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_trajectory(const Trajectory& traj, const fs::path& path) { write_text(path, trajectory_to_json(traj)); }

std::string frame_tag(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", t);
  return buf;
}

}  // namespace scaffold4d::io
