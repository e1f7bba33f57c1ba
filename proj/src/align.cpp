#include "scaffold4d/align.hpp"

#include "scaffold4d/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace scaffold4d {
namespace {

// Consistency constant turning a MAD into a Gaussian standard deviation.
constexpr double kMadToSigma = 1.4826;

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

double weighted_rms(const CorrespondenceSet& c, std::span<const std::size_t> idx, const SimilarityST& st) {
  double num = 0.0;
  double den = 0.0;
  for (auto i : idx) {
    num += c.weights[i] * (st.apply(c.canonical[i]) - c.global[i]).squaredNorm();
    den += c.weights[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Orthonormal frame whose third axis is the depth direction.
Mat3 depth_basis(const Vec3& depth_axis) {
  const Vec3 d = depth_axis.normalized();
  if (d == Vec3::UnitZ()) return Mat3::Identity();
  const Vec3 helper = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = d.cross(helper).normalized();
  const Vec3 e2 = d.cross(e1);
  Mat3 b;
  b.row(0) = e1.transpose();
  b.row(1) = e2.transpose();
  b.row(2) = d.transpose();
  return b;
}

}  // namespace

void CorrespondenceSet::push(const Vec3& p, const Vec3& q, double w, int u, int v) {
  canonical.push_back(p);
  global.push_back(q);
  weights.push_back(w);
  pixels.push_back({u, v});
}

CorrespondenceSet build_correspondences(const PointMap& ref_canonical, const PointMap& global, const BinaryMask& mask,
                                        double conf_min) {
  if (ref_canonical.width != global.width || ref_canonical.height != global.height)
    throw ValidationError("canonical and global point maps differ in size");
  if (mask.width != global.width || mask.height != global.height)
    throw ValidationError("mask size differs from the point maps");
  CorrespondenceSet out;
  for (int v = 0; v < global.height; ++v) {
    for (int u = 0; u < global.width; ++u) {
      const std::size_t i = global.index(u, v);
      if (!mask[i] || !ref_canonical.is_valid(i) || !global.is_valid(i)) continue;
      const double cp = ref_canonical.confidence_at(i);
      const double cq = global.confidence_at(i);
      if (cp < conf_min || cq < conf_min) continue;
      out.push(ref_canonical.points[i].cast<double>(), global.points[i].cast<double>(), cp * cq, u, v);
    }
  }
  return out;
}

ScaleTranslationFit fit_scale_translation(const CorrespondenceSet& corrs) {
  const auto idx = all_indices(corrs.size());
  return fit_scale_translation(corrs, idx);
}

ScaleTranslationFit fit_scale_translation(const CorrespondenceSet& corrs, std::span<const std::size_t> subset) {
  if (subset.size() < 2) throw ValidationError("scale/translation fit needs at least 2 pairs");
  double wsum = 0.0;
  Vec3 pbar = Vec3::Zero();
  Vec3 qbar = Vec3::Zero();
  for (auto i : subset) {
    const double w = corrs.weights[i];
    if (!(w >= 0.0)) throw ValidationError("correspondence weights must be >= 0");
    wsum += w;
    pbar += w * corrs.canonical[i];
    qbar += w * corrs.global[i];
  }
  if (!(wsum > 0.0)) throw ValidationError("scale/translation fit needs positive total weight");
  pbar /= wsum;
  qbar /= wsum;

  double cross = 0.0;
  double spread = 0.0;
  for (auto i : subset) {
    const double w = corrs.weights[i];
    const Vec3 dp = corrs.canonical[i] - pbar;
    cross += w * dp.dot(corrs.global[i] - qbar);
    spread += w * dp.squaredNorm();
  }
  const double rms_spread = std::sqrt(spread / wsum);
  if (!(rms_spread > 1e-12 * pbar.norm()) || spread == 0.0)
    throw ValidationError("scale/translation fit: canonical points have zero spread");

  ScaleTranslationFit fit;
  fit.unclamped_scale = cross / spread;
  fit.clamped = !(fit.unclamped_scale > 0.0);
  fit.st.scale = fit.clamped ? kMinFitScale : fit.unclamped_scale;
  fit.st.translation = qbar - fit.st.scale * pbar;
  return fit;
}

double weighted_sq_residual(const CorrespondenceSet& corrs, const SimilarityST& st) {
  double sum = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i)
    sum += corrs.weights[i] * (st.apply(corrs.canonical[i]) - corrs.global[i]).squaredNorm();
  return sum;
}

void RobustFitParams::validate() const {
  if (min_corr < 2) throw ValidationError("min_corr must be >= 2");
  if (!(mad_k > 0.0)) throw ValidationError("mad_k must be positive");
  if (iters < 0) throw ValidationError("robust fit iterations must be >= 0");
}

FrameAlignment robust_fit(const CorrespondenceSet& corrs, const RobustFitParams& params) {
  params.validate();
  FrameAlignment out;
  std::vector<std::size_t> idx = all_indices(corrs.size());
  ScaleTranslationFit fit;
  try {
    fit = fit_scale_translation(corrs, idx);
  } catch (const ValidationError&) {
    out.degenerate = true;
    out.inliers = idx.size();
    return out;
  }
  out.rms_history.push_back(weighted_rms(corrs, idx, fit.st));

  // Residuals below this are at the precision of float32 point maps and are
  // never rejected.
  double qrms = 0.0;
  {
    double wsum = 0.0;
    for (auto i : idx) {
      wsum += corrs.weights[i];
      qrms += corrs.weights[i] * corrs.global[i].squaredNorm();
    }
    qrms = std::sqrt(qrms / wsum);
  }
  const double floor = kResidualFloor * qrms;

  for (int it = 0; it < params.iters; ++it) {
    std::vector<double> res(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      res[k] = (fit.st.apply(corrs.canonical[idx[k]]) - corrs.global[idx[k]]).norm();
    const double med = median_of(res);
    std::vector<double> dev(res.size());
    for (std::size_t k = 0; k < res.size(); ++k) dev[k] = std::abs(res[k] - med);
    const double mad = median_of(dev);
    const double threshold = std::max(med + params.mad_k * kMadToSigma * mad, floor);

    std::vector<std::size_t> kept;
    kept.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (res[k] <= threshold) kept.push_back(idx[k]);
    if (kept.size() == idx.size()) break;

    ScaleTranslationFit refit;
    try {
      refit = fit_scale_translation(corrs, kept);
    } catch (const ValidationError&) {
      out.degenerate = true;
      break;
    }
    out.discarded += idx.size() - kept.size();
    idx = std::move(kept);
    fit = refit;
    out.rms_history.push_back(weighted_rms(corrs, idx, fit.st));
  }

  out.st = fit.st;
  out.scale_clamped = fit.clamped;
  out.inliers = idx.size();
  out.rms_residual = out.rms_history.back();
  out.degenerate = out.degenerate || fit.clamped || out.inliers < static_cast<std::size_t>(params.min_corr);
  // Pair-based centroid; align_frame replaces it with the full-cloud centroid.
  Vec3 c = Vec3::Zero();
  for (auto i : idx) c += out.st.apply(corrs.canonical[i]);
  out.centroid_global = idx.empty() ? c : Vec3(c / static_cast<double>(idx.size()));
  return out;
}

void SmootherConfig::validate() const {
  if (!(process_noise > 0.0) || !(measurement_noise_lateral > 0.0))
    throw ValidationError("smoother noise levels must be positive");
  if (!(depth_ratio >= 1.0)) throw ValidationError("smoother depth ratio must be >= 1");
  if (!(depth_axis.norm() > 0.0) || !depth_axis.allFinite()) throw ValidationError("smoother depth axis must be nonzero");
}

SmootherConfig SmootherConfig::for_scene_scale(double scene_scale) {
  const double l2 = scene_scale > 0.0 && std::isfinite(scene_scale) ? scene_scale * scene_scale : 1.0;
  SmootherConfig cfg;
  cfg.process_noise = 1e-3 * l2;
  cfg.measurement_noise_lateral = 1e-2 * l2;
  cfg.depth_ratio = 10.0;
  return cfg;
}

std::vector<double> smooth_track(std::span<const double> z, double q, double r) {
  using M2 = Eigen::Matrix2d;
  using V2 = Eigen::Vector2d;
  const std::size_t n = z.size();
  if (n == 0) throw ValidationError("cannot smooth an empty track");
  if (n == 1) return {z[0]};

  M2 F;
  F << 1.0, 1.0, 0.0, 1.0;
  M2 Q;
  Q << q / 3.0, q / 2.0, q / 2.0, q;

  std::vector<V2> x_pred(n), x_filt(n);
  std::vector<M2> p_pred(n), p_filt(n);
  // Diffuse prior centred on the first measurement with zero velocity.
  const double diffuse = 1e8 * (r + q);
  x_pred[0] = V2(z[0], 0.0);
  p_pred[0] = M2::Identity() * diffuse;

  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      x_pred[k] = F * x_filt[k - 1];
      p_pred[k] = F * p_filt[k - 1] * F.transpose() + Q;
    }
    const double s = p_pred[k](0, 0) + r;
    const V2 gain = p_pred[k].col(0) / s;
    x_filt[k] = x_pred[k] + gain * (z[k] - x_pred[k](0));
    M2 p = p_pred[k] - gain * s * gain.transpose();
    p_filt[k] = 0.5 * (p + p.transpose());
  }

  std::vector<V2> x_smooth(n);
  x_smooth[n - 1] = x_filt[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    const M2 c = p_filt[k] * F.transpose() * p_pred[k + 1].inverse();
    x_smooth[k] = x_filt[k] + c * (x_smooth[k + 1] - x_pred[k + 1]);
  }
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = x_smooth[k](0);
  return out;
}

std::vector<FrameAlignment> smooth_placements(const std::vector<FrameAlignment>& alignments,
                                              const SmootherConfig& cfg) {
  cfg.validate();
  if (alignments.empty()) throw ValidationError("cannot smooth an empty alignment sequence");
  std::vector<FrameAlignment> out = alignments;
  if (alignments.size() == 1) return out;

  const Mat3 basis = depth_basis(cfg.depth_axis);
  const std::size_t n = alignments.size();
  std::array<std::vector<double>, 3> tracks;
  for (auto& tr : tracks) tr.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Vec3 local = basis * alignments[t].centroid_global;
    for (int a = 0; a < 3; ++a) tracks[a][t] = local[a];
  }
  const double r_xy = cfg.measurement_noise_lateral;
  const std::array<double, 3> r = {r_xy, r_xy, cfg.depth_ratio * r_xy};
  for (int a = 0; a < 3; ++a) tracks[a] = smooth_track(tracks[a], cfg.process_noise, r[a]);

  for (std::size_t t = 0; t < n; ++t) {
    const Vec3 smoothed = basis.transpose() * Vec3(tracks[0][t], tracks[1][t], tracks[2][t]);
    out[t].st.translation = alignments[t].st.translation + (smoothed - alignments[t].centroid_global);
    out[t].centroid_global = smoothed;
  }
  return out;
}

std::vector<FrameAlignment> fill_degenerate(const std::vector<FrameAlignment>& alignments,
                                            const std::vector<Vec3>& canonical_centroids) {
  if (alignments.size() != canonical_centroids.size())
    throw ValidationError("centroid list length differs from alignment list length");
  std::vector<FrameAlignment> out = alignments;
  const long n = static_cast<long>(alignments.size());
  bool any_valid = false;
  for (const auto& a : alignments) any_valid = any_valid || !a.degenerate;
  if (!any_valid) throw DegeneracyError("every frame produced a degenerate alignment");

  for (long i = 0; i < n; ++i) {
    if (!alignments[i].degenerate) continue;
    for (long d = 1; d < n; ++d) {
      long j = -1;
      if (i - d >= 0 && !alignments[i - d].degenerate)
        j = i - d;
      else if (i + d < n && !alignments[i + d].degenerate)
        j = i + d;
      if (j < 0) continue;
      out[i].st = alignments[j].st;
      out[i].centroid_global = out[i].st.apply(canonical_centroids[i]);
      break;
    }
  }
  return out;
}

FrameAlignment align_frame(const CanonicalCompletion& completion, const PointMap& global, const BinaryMask& mask,
                           double conf_min, const RobustFitParams& params) {
  const CorrespondenceSet corrs = build_correspondences(completion.ref_pointmap, global, mask, conf_min);
  FrameAlignment fa = robust_fit(corrs, params);
  if (completion.cloud.empty()) {
    fa.degenerate = true;
  } else {
    fa.centroid_global = fa.st.apply(completion.cloud.centroid());
  }
  return fa;
}

AlignmentResult finish_alignment(const std::vector<FrameAlignment>& fits, std::vector<PointCloud> canonical_clouds,
                                 const AlignParams& params, double scene_scale) {
  if (fits.size() != canonical_clouds.size()) throw ValidationError("one canonical cloud per frame is required");
  if (fits.empty()) throw ValidationError("alignment needs at least one frame");
  std::vector<Vec3> centroids;
  centroids.reserve(canonical_clouds.size());
  for (const auto& c : canonical_clouds) centroids.push_back(c.centroid());

  AlignmentResult result;
  result.raw = fill_degenerate(fits, centroids);
  const SmootherConfig cfg = params.smoother.value_or(SmootherConfig::for_scene_scale(scene_scale));
  result.smoothed = params.smooth ? smooth_placements(result.raw, cfg) : result.raw;
  result.clouds = std::move(canonical_clouds);
  for (std::size_t t = 0; t < result.clouds.size(); ++t)
    result.clouds[t] = apply_similarity(result.smoothed[t].st, result.clouds[t]);
  return result;
}

AlignmentResult align_sequence(const std::vector<CanonicalFrame>& canonical_frames,
                               const std::vector<GlobalFrame>& global_frames, const AlignParams& params,
                               double scene_scale) {
  if (canonical_frames.size() != global_frames.size())
    throw ValidationError("canonical and global sequences differ in length");
  std::vector<FrameAlignment> fits;
  std::vector<PointCloud> clouds;
  for (std::size_t t = 0; t < global_frames.size(); ++t) {
    CanonicalCompletion completion = merge_views(canonical_frames[t], params.conf_min, params.white_thresh);
    fits.push_back(align_frame(completion, global_frames[t].pointmap, global_frames[t].mask, params.conf_min,
                               params.robust));
    clouds.push_back(std::move(completion.cloud));
  }
  return finish_alignment(fits, std::move(clouds), params, scene_scale);
}

std::string alignment_csv(const AlignmentResult& result) {
  std::string out =
      "t,scale,tx,ty,tz,inliers,discarded,rms_residual,degenerate,raw_cx,raw_cy,raw_cz,smooth_cx,smooth_cy,smooth_cz\n";
  char buf[512];
  for (std::size_t t = 0; t < result.smoothed.size(); ++t) {
    const FrameAlignment& s = result.smoothed[t];
    const FrameAlignment& r = result.raw[t];
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%.12g,%zu,%zu,%.12g,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  t, s.st.scale, s.st.translation.x(), s.st.translation.y(), s.st.translation.z(), s.inliers,
                  s.discarded, s.rms_residual, s.degenerate ? 1 : 0, r.centroid_global.x(), r.centroid_global.y(),
                  r.centroid_global.z(), s.centroid_global.x(), s.centroid_global.y(), s.centroid_global.z());
    out += buf;
  }
  return out;
}

}  // namespace scaffold4d
