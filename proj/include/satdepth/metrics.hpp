#pragma once

#include <string>
#include <vector>

#include "satdepth/alignment.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"

namespace satdepth {

/// 1/2 (x_i^T F x_j)^2 (1/|(F x_j)_{1,2}|^2 + 1/|(F^T x_i)_{1,2}|^2).
/// Invariant to the scale of F.
double symmetric_epipolar_distance(const AffineFundamental& f, const PixelPoint& xi, const PixelPoint& xj);

inline constexpr double kDefaultDeltaEpi = 3.0;

/// Percent of matches with d_epi < delta_epi.
double precision(const std::vector<MatchRecord>& matches, const AffineFundamental& f_gt,
                 double delta_epi = kDefaultDeltaEpi);

/// Affine relative motion read off F. theta in (-pi/2, pi/2], phi in [0, pi/2].
struct PoseParams {
  double theta = 0.0;
  double phi = 0.0;
  double s = 1.0;
};

PoseParams decompose_affine_f(const AffineFundamental& f);

/// max(|d theta| folded mod pi, |d phi|), degrees.
double pose_error_deg(const PoseParams& gt, const PoseParams& est);

/// Area under the recall curve up to each threshold, percent.
std::vector<double> pose_auc(std::vector<double> errors_deg, const std::vector<double>& thresholds = {5, 10, 20});

struct DsmComparison {
  double completeness = 0.0;  ///< percent of joint cells with |dh| < tolerance
  double rmse = 0.0;
  double mae = 0.0;  ///< median absolute height error
  long long valid_count = 0;
};

/// Both rasters must share shape and geotransform.
DsmComparison dsm_compare(const RasterF64& test, const RasterF64& truth, double tolerance_m = 1.0);

/// One evaluated image pair.
struct PairEvaluation {
  std::string pair_id;
  int n_matches = 0;
  double precision = 0.0;
  double pose_error_deg = 0.0;
};

struct EvaluationReport {
  std::vector<PairEvaluation> pairs;
  double mean_precision = 0.0;
  double mean_matches = 0.0;
  std::vector<double> thresholds{5, 10, 20};
  std::vector<double> auc;
};

/// Scores a pair's matches against its ground-truth F: precision, and the
/// pose error of an F robustly re-estimated from the matches. A pair whose
/// estimate fails scores 90 degrees, the largest possible error.
PairEvaluation evaluate_pair(const std::string& pair_id, const std::vector<MatchRecord>& matches,
                             const AffineFundamental& f_gt, double delta_epi = kDefaultDeltaEpi,
                             const RansacConfig& ransac = {});

EvaluationReport summarize(std::vector<PairEvaluation> pairs, const std::vector<double>& thresholds = {5, 10, 20});

std::string report_csv(const EvaluationReport& r);
std::string report_table(const EvaluationReport& r);

}  // namespace satdepth
