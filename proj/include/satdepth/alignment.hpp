#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "satdepth/ingest.hpp"
#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"

namespace satdepth {

// ---------------------------------------------------------------------------
// Affine F estimation

/// Least-squares affine F from >= 4 correspondences (centered linear system,
/// smallest singular direction). Throws DegenerateError on rank deficiency.
AffineFundamental estimate_affine_f(const std::vector<MatchRecord>& matches);

struct RansacConfig {
  /// Inlier threshold on the symmetric epipolar distance.
  double threshold_px = 3.0;
  double confidence = 0.999;
  int max_iter = 10000;
  /// Inliers required beyond the 4-point sample itself.
  int min_support = 4;
  std::uint64_t seed = 0;
};

struct RansacResult {
  AffineFundamental f;
  /// Indices into the input, ascending.
  std::vector<int> inliers;
  int iterations = 0;
};

/// Adaptive RANSAC over 4-point samples with a final refit on the inliers.
/// The result depends only on the set of matches and the seed, not their order.
RansacResult ransac_affine_f(const std::vector<MatchRecord>& matches, const RansacConfig& cfg = {});

// ---------------------------------------------------------------------------
// Bundle adjustment

struct BaConfig {
  double lambda = 0.5;
  int max_iter = 200;
  /// Relative cost decrease below which LM stops.
  double tol = 1e-14;
  /// Stop once |gradient|_inf < gradient_tol * (1 + cost).
  double gradient_tol = 1e-10;
  double ransac_threshold_px = 3.0;
  int min_inliers_edge = 16;
  double min_component_density = 0.3;
  /// Observations closer than this in the same image merge into one track node.
  double track_merge_px = 0.5;
  /// Images whose bias is held at zero.
  std::vector<int> pinned;
  /// Biases above this magnitude produce a warning.
  double bias_warning_px = 50.0;
};

struct Observation {
  int image = 0;
  PixelPoint x;
};

struct TieTrack {
  std::vector<Observation> observations;
  GeoPoint world;
};

using PairMatches = std::map<std::pair<int, int>, std::vector<MatchRecord>>;

/// Union-find track building. Observations within `merge_px` of each other
/// in one image are the same node; tracks that still hold two distinct
/// observations of one image are dropped.
std::vector<TieTrack> build_tracks(const PairMatches& pairs, double merge_px = 0.5,
                                   int* dropped_conflicts = nullptr);

struct BaResult {
  /// Per image (db_row, db_col).
  std::vector<Eigen::Vector2d> biases;
  std::vector<TieTrack> tracks;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double rms_px = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  int dropped_tracks = 0;
  std::vector<std::string> warnings;
};

/// Jacobian d(row, col)/d(lat, lon, h) of either camera kind.
Eigen::Matrix<double, 2, 3> camera_jacobian(const Camera& cam, const GeoPoint& x);

/// Levenberg-Marquardt over per-image biases and track points, minimizing
/// sum |x - (P(X) + b)|^2 + lambda sum |b|^2.
BaResult bundle_adjust(const std::vector<Camera>& cams, const PairMatches& pairs, const BaConfig& cfg = {});

/// Same solver on prebuilt tracks.
BaResult bundle_adjust_tracks(const std::vector<Camera>& cams, std::vector<TieTrack> tracks,
                              const BaConfig& cfg = {});

struct TriangulatedPoint {
  GeoPoint world;
  double residual_px = 0.0;
};

/// Minimizes reprojection error of one track with frozen biases. Throws
/// DegenerateError when the rays are near-parallel.
TriangulatedPoint triangulate_track(const std::vector<Camera>& cams, const std::vector<Eigen::Vector2d>& biases,
                                    const std::vector<Observation>& obs);

std::vector<TriangulatedPoint> triangulate(const std::vector<Camera>& cams,
                                           const std::vector<Eigen::Vector2d>& biases, int image_i,
                                           int image_j, const std::vector<MatchRecord>& matches);

// ---------------------------------------------------------------------------
// Connectivity

struct GraphEdge {
  int i = 0, j = 0;
  int inliers = 0;
};

struct ConnectivityGraph {
  std::vector<int> nodes;
  std::vector<GraphEdge> edges;
};

struct ComponentResult {
  std::vector<int> nodes;  ///< ascending
  int edge_count = 0;
  double density = 0.0;
  bool accepted = false;
};

/// Largest connected component over edges with inliers >= min_inliers_edge.
/// Ties prefer more edges, then the smallest node label.
ComponentResult largest_aligned_component(const ConnectivityGraph& g, const BaConfig& cfg = {});

// ---------------------------------------------------------------------------
// DSM fusion

inline constexpr int kDefaultTopN = 5;

/// North-up grid with `gsd` meter cells covering all points, sized at the
/// cloud's center.
GeoTransform fusion_grid(const std::vector<std::vector<GeoPoint>>& clouds, double gsd, int* height, int* width);

/// Median of the top-N heights per cell on the grid from fusion_grid.
RasterF64 fuse_and_rasterize(const std::vector<std::vector<GeoPoint>>& clouds, double gsd, int top_n = kDefaultTopN);

/// As above on a caller-supplied grid; points outside are ignored.
RasterF64 fuse_and_rasterize(const std::vector<std::vector<GeoPoint>>& clouds, const GeoTransform& gt, int height,
                             int width, int top_n = kDefaultTopN);

/// Median of the first min(n, size) values after sorting descending.
double top_n_median(std::vector<double> heights, int top_n);

}  // namespace satdepth
