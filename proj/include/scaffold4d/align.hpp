#pragma once

// Correspondence-aware placement of canonical object clouds in global scene
// space.
//
// The canonical source-view point map and the lifted global point map are
// both pixel-registered to the same source frame, so each foreground pixel
// yields a 3D-3D pair (canonical p, global q). Rotation is shared by
// construction; only a uniform scale s and translation t are estimated by
// weighted least squares, with MAD-based pair rejection. The resulting
// per-frame centroid track is then smoothed with a constant-velocity
// forward filter / backward (Rauch-Tung-Striebel) smoother. Scale is never
// smoothed.

#include "scaffold4d/complete.hpp"
#include "scaffold4d/core.hpp"
#include "scaffold4d/lift.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scaffold4d {

struct CorrespondenceSet {
  std::vector<Vec3> canonical;
  std::vector<Vec3> global;
  std::vector<double> weights;
  std::vector<std::array<int, 2>> pixels;  // (u, v)

  std::size_t size() const { return canonical.size(); }
  bool empty() const { return canonical.empty(); }
  void push(const Vec3& p, const Vec3& q, double w, int u, int v);
};

/// One pair per foreground pixel where both points are finite and both
/// confidences reach `conf_min`; weight is the product of the confidences.
CorrespondenceSet build_correspondences(const PointMap& ref_canonical, const PointMap& global, const BinaryMask& mask,
                                        double conf_min);

struct ScaleTranslationFit {
  SimilarityST st;
  double unclamped_scale = 1.0;
  bool clamped = false;  // optimum scale was <= 0 and got clamped
};

/// Smallest scale accepted from a fit; non-positive optima clamp to it.
inline constexpr double kMinFitScale = 1e-12;

/// Closed-form weighted least squares for s * p + t ~ q.
ScaleTranslationFit fit_scale_translation(const CorrespondenceSet& corrs);
ScaleTranslationFit fit_scale_translation(const CorrespondenceSet& corrs, std::span<const std::size_t> subset);

/// Sum of w_i * |s p_i + t - q_i|^2 over all pairs.
double weighted_sq_residual(const CorrespondenceSet& corrs, const SimilarityST& st);

struct RobustFitParams {
  int min_corr = 10;
  double mad_k = 3.0;
  int iters = 3;

  void validate() const;
};

struct FrameAlignment {
  SimilarityST st;
  Vec3 centroid_global = Vec3::Zero();
  std::size_t inliers = 0;
  std::size_t discarded = 0;
  double rms_residual = 0.0;  // weighted, over inliers
  bool degenerate = false;
  bool scale_clamped = false;
  std::vector<double> rms_history;  // one entry per fit
};

/// Relative residual (to the RMS magnitude of the global points) below which
/// pairs are never rejected.
inline constexpr double kResidualFloor = 1e-6;

/// Alternates fitting and discarding pairs whose residual exceeds
/// median + mad_k * 1.4826 * MAD. Degeneracy is flagged, never thrown.
FrameAlignment robust_fit(const CorrespondenceSet& corrs, const RobustFitParams& params);

struct SmootherConfig {
  double process_noise = 1e-3;
  double measurement_noise_lateral = 1e-2;
  double depth_ratio = 10.0;  // depth measurement noise = ratio * lateral
  Vec3 depth_axis = Vec3::UnitZ();

  void validate() const;
  /// q = 1e-3 L^2, r_xy = 1e-2 L^2, ratio 10, where L is the scene scale.
  static SmootherConfig for_scene_scale(double scene_scale);
};

/// Fixed-interval smoother of one scalar track under a constant-velocity
/// model with white-noise acceleration of intensity q and measurement
/// variance r.
std::vector<double> smooth_track(std::span<const double> measurements, double q, double r);

/// Smooths centroid_global over time and shifts each translation by the
/// centroid correction. Scales are copied untouched.
std::vector<FrameAlignment> smooth_placements(const std::vector<FrameAlignment>& alignments,
                                              const SmootherConfig& cfg);

/// Degenerate frames inherit the transform of the nearest non-degenerate
/// frame (earlier frame on ties); their centroid is recomputed from their own
/// canonical centroid. Throws DegeneracyError if every frame is degenerate.
std::vector<FrameAlignment> fill_degenerate(const std::vector<FrameAlignment>& alignments,
                                            const std::vector<Vec3>& canonical_centroids);

struct AlignParams {
  double conf_min = 0.1;
  int white_thresh = kDefaultWhiteThreshold;
  RobustFitParams robust;
  std::optional<SmootherConfig> smoother;  // derived from the scene scale when unset
  bool smooth = true;
};

/// Correspondences plus robust fit for one frame. centroid_global is the
/// centroid of the whole transformed canonical cloud.
FrameAlignment align_frame(const CanonicalCompletion& completion, const PointMap& global, const BinaryMask& mask,
                           double conf_min, const RobustFitParams& params);

struct AlignmentResult {
  std::vector<FrameAlignment> raw;       // per-frame fits after degenerate fill
  std::vector<FrameAlignment> smoothed;  // final placements
  std::vector<PointCloud> clouds;        // aligned foreground per frame
};

/// Fills degenerate frames, smooths, and applies the final transforms.
AlignmentResult finish_alignment(const std::vector<FrameAlignment>& fits, std::vector<PointCloud> canonical_clouds,
                                 const AlignParams& params, double scene_scale);

AlignmentResult align_sequence(const std::vector<CanonicalFrame>& canonical_frames,
                               const std::vector<GlobalFrame>& global_frames, const AlignParams& params,
                               double scene_scale);

/// Per-frame diagnostics table.
std::string alignment_csv(const AlignmentResult& result);

}  // namespace scaffold4d
