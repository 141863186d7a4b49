#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"
#include "satdepth/satdepth_map.hpp"

namespace satdepth {

using Image = Grid<float>;

/// World-to-pixel map of the second image.
using Projector = std::function<PixelPoint(const GeoPoint&)>;

inline Projector projector(const Camera& cam) {
  return [cam](const GeoPoint& x) { return project(cam, x); };
}

struct Correspondence {
  PixelPoint xi;
  PixelPoint xj;
  GeoPoint world;
  double dist3d = 0.0;
};

inline constexpr double kDefaultDelta3d = 1.0;

/// Ground-truth matches: read X_i at each sampled valid x_i, project into
/// image j, read X_j at the rounded pixel and accept when the ECEF distance
/// is below delta3d. x_j keeps the unrounded projection; projections with a
/// negative coordinate (beyond 1e-6 px of round-off) are skipped.
std::vector<Correspondence> extract_gt_matches(const SatDepthMap& map_i, const Projector& cam_j,
                                               const SatDepthMap& map_j, int stride = 1,
                                               double delta3d = kDefaultDelta3d);

inline std::vector<Correspondence> extract_gt_matches(const SatDepthMap& map_i, const Camera& cam_j,
                                                      const SatDepthMap& map_j, int stride = 1,
                                                      double delta3d = kDefaultDelta3d) {
  return extract_gt_matches(map_i, projector(cam_j), map_j, stride, delta3d);
}

/// Pure translation on homogeneous (col, row, 1).
Eigen::Matrix3d translation(double dcol, double drow);
/// Rotation by theta (radians) about `pivot` = (col, row).
Eigen::Matrix3d rotation_about(double theta, const Eigen::Vector2d& pivot);

/// One image's share of a patch pair.
struct PatchHalf {
  Image image;
  SatDepthMap map;
  AffineCamera cam;
  /// Source-image pixel (row, col) of the crop origin before rotation.
  int row0 = 0, col0 = 0;
  double theta_deg = 0.0;
  /// Source image coordinates -> patch coordinates.
  Eigen::Matrix3d to_patch = Eigen::Matrix3d::Identity();
};

struct PatchPair {
  PatchHalf i, j;
  GeoPoint anchor;
};

/// Everything one image contributes to patch extraction.
struct PatchSource {
  const Image* image = nullptr;
  const SatDepthMap* map = nullptr;
  Camera cam;
};

/// First-order camera at x, anchored there.
AffineCamera local_affine(const Camera& cam, const GeoPoint& x);

/// Axis-aligned p x p crop with origin round(center) - p/2.
PatchHalf crop_patch(const PatchSource& src, const GeoPoint& anchor, const PixelPoint& center, int p);

/// Random valid DSM cell -> world point -> centered windows in both images.
/// Windows leaving either image are redrawn, up to `max_tries`.
PatchPair extract_patch_pair_train(const RasterF64& dsm, const PatchSource& src_i, const PatchSource& src_j, int p,
                                   std::mt19937_64& rng, int max_tries = 1000);

/// One candidate per DSM strip of `stride` cells, centered in the strip;
/// candidates with nodata or out-of-bounds windows are skipped.
std::vector<PatchPair> extract_patch_grid_test(const RasterF64& dsm, const PatchSource& src_i,
                                               const PatchSource& src_j, int p, int stride);

/// The crop-rotate-crop factors, each a rigid motion on (col, row, 1).
struct HomographyChain {
  Eigen::Matrix3d t1 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d h_rot = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d t2 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d composite() const { return t2 * h_rot * t1; }
};

struct RotatedPatch {
  PatchHalf half;
  HomographyChain chain;
  /// Size of the intermediate bounding-box crop.
  int bbox_size = 0;
};

/// p x p window about `center` rotated by theta_deg. Intensity bilinear, map
/// planes nearest. Throws OutOfBoundsError when the bounding box leaves the image.
RotatedPatch rotate_augment(const Image& img, const SatDepthMap& map, const AffineCamera& cam,
                            const PixelPoint& center, int p, double theta_deg);

}  // namespace satdepth
