#pragma once

#include <string>
#include <vector>

#include "mapjoin/local_map.hpp"

namespace mapjoin {

/// Weighted sum of squared integrated-observation residuals of the solution
/// against the given maps, with angle residuals wrapped. Zero when the
/// solution reproduces every map exactly. Throws MissingEntityError when a
/// map entry is absent from the solution.
double chi2(const LocalMap& solution, const std::vector<LocalMap>& maps);

struct RmseResult {
  double abs_pose = 0.0;     // meters, over common pose positions
  double abs_feature = 0.0;  // meters, over common feature positions
  double rel_pose = 0.0;     // meters, over consecutive-pose relative translations
  double rel_rot = 0.0;      // radians, relative rotations reported separately
  int common_poses = 0;
  int common_features = 0;
};

/// Root-mean-square errors between two maps after expressing both in
/// align_frame. Throws MissingEntityError when they share no common keys.
RmseResult rmse(const LocalMap& solution, const LocalMap& reference,
                const FrameDescriptor& align_frame);

/// Deterministic alignment rule: the lowest-id common pose, or the
/// lowest-id non-degenerate common feature tuple for feature-only maps.
FrameDescriptor default_alignment_frame(const LocalMap& a, const LocalMap& b);

/// Normalized estimation error squared over feature entries: e^T I e with
/// e = estimate - truth. The estimate must be feature-only (marginalize poses
/// first) and expressed in the frame the truth is supplied in. Throws
/// SingularSystemError when the information matrix is not positive definite.
double nees(const StateVector& estimate, const SparseSymMatrix& info, const StateVector& truth);

/// Chi-square quantile: Wilson-Hilferty start refined by Newton steps on the
/// regularized incomplete gamma CDF. Accurate to ~1e-10 relative for all df.
double chi2_quantile(double p, int df);

/// Interprets a ground-truth state (absolute coordinates) as a map framed by
/// its lowest-id pose, with identity information. Evaluation plumbing: lets
/// truth ride through the same re-framing machinery as the estimates.
LocalMap truth_as_map(const StateVector& truth, Dimension dim, bool translation_only = false);

/// The bundle of evaluation numbers the toolkit reports.
struct MetricReport {
  double chi2 = -1.0;
  double rmse_abs_pose = -1.0;
  double rmse_abs_feature = -1.0;
  double rmse_rel_pose = -1.0;
  double rmse_rel_rot = -1.0;
  double nees = -1.0;
  double nees_bound_95 = -1.0;
  int dims = 0;
};

/// Line-oriented key=value rendering; unset metrics (negative) are omitted.
std::string metric_report_text(const MetricReport& r);

/// Flat JSON object; unset metrics are omitted.
std::string metric_report_json(const MetricReport& r);

}  // namespace mapjoin
