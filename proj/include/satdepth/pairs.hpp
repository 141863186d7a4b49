#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "satdepth/depthify.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"
#include "satdepth/satdepth_map.hpp"

namespace satdepth {

/// [cos El cos Az, cos El sin Az, sin El] from the satellite angles.
Eigen::Vector3d view_vector(const ImdRecord& meta);

/// Angle between view vectors, degrees in [0, 180].
double view_angle_diff(const ImdRecord& a, const ImdRecord& b);

/// Unit ground direction (easting, northing) of a map's middle row, fitted
/// by total least squares in UTM and pointing toward increasing column.
Eigen::Vector2d track_direction(const SatDepthMap& map, int zone, Hemisphere hemisphere);

/// Angle between the middle-row ground tracks of two maps, degrees in [0, 180].
/// Both fits share the UTM zone of the first map's first valid point.
double track_angle_diff(const SatDepthMap& map_i, const SatDepthMap& map_j);

struct PairRecord {
  std::string image_i;
  std::string image_j;
  double alpha_v = 0.0;
  double alpha_t = 0.0;
  /// Days.
  double dt = 0.0;
  std::string split;
  bool operator==(const PairRecord&) const = default;
};

inline constexpr std::string_view kPairHeader = "image_i,image_j,alpha_v,alpha_t,dt,split";

std::vector<PairRecord> parse_pairs(std::string_view csv);
std::string serialize_pairs(const std::vector<PairRecord>& pairs);

/// Acquisition time difference in days, non-negative.
double time_difference_days(const ImdRecord& a, const ImdRecord& b);

PairRecord make_pair_record(const ImdRecord& a, const ImdRecord& b, const SatDepthMap& map_a,
                            const SatDepthMap& map_b, const std::string& split = "");

struct BalanceConfig {
  int n_bins = 10;
  int target_per_bin = 100;
  std::uint64_t seed = 0;
  /// Upper end of the histogram; the observed max of alpha_v when unset.
  std::optional<double> range_max;
};

/// Bin index of each pair's alpha_v over n_bins equal bins on [0, max].
std::vector<int> alpha_v_bins(const std::vector<PairRecord>& pairs, const BalanceConfig& cfg);

/// Keeps min(count, target) pairs per bin, sampled without replacement.
/// Output preserves input order.
std::vector<PairRecord> balance_pairs(const std::vector<PairRecord>& pairs, const BalanceConfig& cfg);

struct GridRect {
  int row0 = 0, col0 = 0;
  int rows = 0, cols = 0;
  long long area() const { return 1LL * rows * cols; }
};

struct Coverage {
  /// Camera count per cell, stored as f32 with no nodata cells.
  RasterF32 counts;
  /// Largest axis-aligned rectangle whose every cell has count >= n_min.
  GridRect best;
};

/// Counts, per grid cell center at height h_ref, the cameras whose projection
/// lands on a pixel of their image.
Coverage coverage_heatmap(const std::vector<Camera>& cams, const std::vector<ImageDims>& dims,
                          const GeoTransform& gt, int height, int width, double h_ref, int n_min = 1);

/// Largest rectangle of cells with value >= n_min. Ties keep the first found
/// scanning rows downward.
GridRect largest_rectangle_at_least(const RasterF32& counts, double n_min);

}  // namespace satdepth
