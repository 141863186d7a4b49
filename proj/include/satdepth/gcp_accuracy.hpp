#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "satdepth/ingest.hpp"
#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"
#include "satdepth/satdepth_map.hpp"

namespace satdepth {

struct AbsError {
  std::string gcp_id, image_id;
  double abs3d = 0.0;
  /// ECEF(X_i) - ECEF(X_gcp), meters.
  Eigen::Vector3d error = Eigen::Vector3d::Zero();
};

struct RelError {
  std::string gcp_id, image_i, image_j;
  double rel3d = 0.0;
  /// |x_j - P_j(X_i)| in pixels.
  double rel2d = 0.0;
};

struct AnnotationIssue {
  std::string gcp_id, image_id, reason;
};

struct Summary {
  int count = 0;
  double mean = 0.0, stddev = 0.0, median = 0.0;
};

Summary summarize_values(std::vector<double> v);

struct GcpErrorReport {
  std::vector<AbsError> abs;
  std::vector<RelError> rel;
  std::vector<AnnotationIssue> issues;
  Summary abs3d, rel3d, rel2d;
};

/// Annotation pixels are looked up at the rounded position. Annotated entries
/// whose pixel is invalid in the map are listed as issues and excluded.
/// Unknown gcp or image ids throw DomainError.
GcpErrorReport gcp_errors(const std::vector<GcpRecord>& gcps, const std::vector<AnnotationRecord>& annotations,
                          const std::map<std::string, SatDepthMap>& maps,
                          const std::map<std::string, Camera>& cams);

/// measure,gcp_id,image_i,image_j,value rows, then mean and median rows per measure.
std::string error_report_csv(const GcpErrorReport& report);

/// Shift in ECEF meters.
using EcefShift = Eigen::Vector3d;

struct ShiftObservation {
  std::string gcp_id;
  Eigen::Vector3d error = Eigen::Vector3d::Zero();
};

std::vector<ShiftObservation> shift_observations(const GcpErrorReport& report);

struct ShiftEstimate {
  /// Mean error vector over every observation.
  EcefShift shift = EcefShift::Zero();
  int n_sims = 0;
  double before_mean = 0.0, before_std = 0.0;
  double after_mean = 0.0, after_std = 0.0;
};

/// Repeated 70/30 splits by GCP: the train mean is the shift, the test set is
/// scored before and after subtracting it. Needs >= 4 distinct GCPs.
ShiftEstimate monte_carlo_shift(const std::vector<ShiftObservation>& obs, int n_sims, std::uint64_t seed);

/// (dlat, dlon, dh) equivalent of an ECEF shift, linearized at `center`.
Eigen::Vector3d shift_to_geodetic(const EcefShift& shift, const GeoPoint& center);

RasterF64 apply_shift(const RasterF64& dsm, const EcefShift& shift, const GeoPoint& center);
SatDepthMap apply_shift(const SatDepthMap& map, const EcefShift& shift, const GeoPoint& center);
/// Shifted camera P' with P'(X - delta) = P(X).
RpcModel apply_shift(const RpcModel& cam, const EcefShift& shift, const GeoPoint& center);

std::string shift_to_json(const EcefShift& shift, const GeoPoint& center);
EcefShift shift_from_json(const std::string& json, GeoPoint* center = nullptr);

}  // namespace satdepth
