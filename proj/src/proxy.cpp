#include "scaffold4d/proxy.hpp"

#include "scaffold4d/error.hpp"
#include "scaffold4d/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <random>

namespace scaffold4d {

namespace fs = std::filesystem;
using nlohmann::json;

void Proxy4D::validate() const {
  background.validate();
  for (const auto& fg : foreground) fg.validate();
}

double scene_scale_of(const PointCloud& background, const std::vector<PointCloud>& foreground) {
  BoundingBox box;
  box.extend(background);
  if (box.empty())
    for (const auto& fg : foreground) box.extend(fg);
  return box.diagonal();
}

Proxy4D assemble(PointCloud background, std::vector<PointCloud> foreground) {
  Proxy4D proxy;
  proxy.background = std::move(background);
  proxy.foreground = std::move(foreground);
  proxy.validate();
  proxy.scene_scale = scene_scale_of(proxy.background, proxy.foreground);
  return proxy;
}

PointCloud frame_view(const Proxy4D& proxy, std::size_t t) {
  if (t >= proxy.frame_count())
    throw ValidationError("frame " + std::to_string(t) + " outside proxy range [0, " +
                          std::to_string(proxy.frame_count()) + ")");
  PointCloud view = proxy.background;
  view.append(proxy.foreground[t]);
  return view;
}

Proxy4D scale_foreground(const Proxy4D& proxy, double factor, const std::optional<Vec3>& pivot) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("scale factor must be positive and finite");
  Proxy4D out = proxy;
  for (auto& fg : out.foreground) {
    if (fg.empty()) continue;
    const Vec3 c = pivot.value_or(fg.centroid());
    const SimilarityST st{factor, (1.0 - factor) * c};
    fg = apply_similarity(st, fg);
  }
  out.provenance["edit.scale_foreground"] = std::to_string(factor);
  return out;
}

Proxy4D composite(const Proxy4D& a, const Proxy4D& b, const SimilarityST& placement, int frame_offset) {
  placement.validate();
  const long a_start = std::max(0, -frame_offset);
  const long b_start = std::max(0, frame_offset);
  const long frames = std::min(static_cast<long>(a.frame_count()) - a_start, static_cast<long>(b.frame_count()) - b_start);
  if (frames <= 0) throw ValidationError("composite sources do not overlap in time");

  PointCloud bg = a.background;
  bg.append(apply_similarity(placement, b.background));
  std::vector<PointCloud> fg;
  fg.reserve(static_cast<std::size_t>(frames));
  for (long t = 0; t < frames; ++t) {
    PointCloud f = a.foreground[static_cast<std::size_t>(t + a_start)];
    f.append(apply_similarity(placement, b.foreground[static_cast<std::size_t>(t + b_start)]));
    fg.push_back(std::move(f));
  }
  Proxy4D out = assemble(std::move(bg), std::move(fg));
  out.provenance = a.provenance;
  out.provenance["edit.composite_offset"] = std::to_string(frame_offset);
  return out;
}

PointCloud subsample(const PointCloud& cloud, std::size_t budget, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (budget >= n) return cloud;
  PointCloud out;
  if (budget == 0) return out;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t begin = i * n / budget;
    const std::size_t end = (i + 1) * n / budget;
    out.push_from(cloud, begin + static_cast<std::size_t>(rng() % (end - begin)));
  }
  return out;
}

Proxy4D decimate(const Proxy4D& proxy, std::size_t budget) {
  std::size_t max_fg = 0;
  for (const auto& fg : proxy.foreground) max_fg = std::max(max_fg, fg.size());
  const std::size_t total = proxy.background.size() + max_fg;
  if (total <= budget) return proxy;

  const auto bg_budget = static_cast<std::size_t>(static_cast<long double>(budget) * proxy.background.size() / total);
  const std::size_t fg_budget = budget - bg_budget;
  Proxy4D out;
  out.background = subsample(proxy.background, bg_budget, kDecimateSeed);
  out.foreground.reserve(proxy.frame_count());
  for (std::size_t t = 0; t < proxy.frame_count(); ++t)
    out.foreground.push_back(subsample(proxy.foreground[t], fg_budget, kDecimateSeed ^ (t + 1)));
  out.scene_scale = proxy.scene_scale;
  out.provenance = proxy.provenance;
  out.provenance["decimate.budget"] = std::to_string(budget);
  return out;
}

void save_proxy(const Proxy4D& proxy, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "scaffold4d-proxy";
  manifest["version"] = 1;
  manifest["frame_count"] = proxy.frame_count();
  manifest["scene_scale"] = proxy.scene_scale;
  manifest["background"] = {{"file", "background.ply"}, {"points", proxy.background.size()}};
  io::write_ply(proxy.background, dir / "background.ply");
  json frames = json::array();
  for (std::size_t t = 0; t < proxy.frame_count(); ++t) {
    const std::string name = "fg_" + io::frame_tag(t) + ".ply";
    io::write_ply(proxy.foreground[t], dir / name);
    frames.push_back({{"file", name}, {"points", proxy.foreground[t].size()}});
  }
  manifest["foreground"] = std::move(frames);
  manifest["provenance"] = proxy.provenance;
  io::write_text(dir / "proxy.json", manifest.dump(2) + "\n");
}

Proxy4D load_proxy(const fs::path& dir) {
  const fs::path manifest_path = dir / "proxy.json";
  if (!fs::exists(manifest_path)) throw ValidationError("missing proxy manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(io::read_text(manifest_path));
    Proxy4D proxy;
    proxy.background = io::read_ply(dir / manifest.at("background").at("file").get<std::string>());
    for (const auto& f : manifest.at("foreground"))
      proxy.foreground.push_back(io::read_ply(dir / f.at("file").get<std::string>()));
    if (manifest.at("frame_count").get<std::size_t>() != proxy.frame_count())
      throw FormatError("proxy manifest frame_count disagrees with its frame list");
    proxy.scene_scale = manifest.at("scene_scale").get<double>();
    if (manifest.contains("provenance"))
      proxy.provenance = manifest["provenance"].get<std::map<std::string, std::string>>();
    return proxy;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace scaffold4d
