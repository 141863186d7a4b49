#pragma once

#include <optional>
#include <string>
#include <vector>

#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"
#include "satdepth/satdepth_map.hpp"

namespace satdepth {

struct ImageDims {
  int height = 0;
  int width = 0;
};

struct DepthifyConfig {
  /// Height step of the sweep between ground and roof, meters.
  double dz = 0.25;
  /// Image block edge for tiling, pixels.
  int block = 256;
  /// World buffer around each back-projected block, meters.
  double buffer_m = 120.0;
  int workers = 1;
  /// Also sample Z = Z_UB (the roof). Off reproduces the strict `Z < Z_UB` loop.
  bool include_roof = true;
  /// Initialize the z-buffer at 0 instead of -1e30 (drops terrain at or below 0 m).
  bool zero_init = false;
  /// Abort when more than this fraction of projections fail.
  double max_failure_fraction = 0.01;
};

void validate(const DepthifyConfig& cfg);

struct DepthifyInputs {
  ImageDims image;
  Camera cam;
  RasterF64 dsm;
  RasterF64 dem;
  /// Nonzero cells are water. Optional.
  std::optional<RasterF64> water;
};

struct DepthifyStats {
  long long samples = 0;
  long long failures = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kHeightSentinel = -1e30;

SatDepthMap depthify_sequential(const DepthifyInputs& in, const DepthifyConfig& cfg = {},
                                DepthifyStats* stats = nullptr);

/// Block-parallel variant. Bit-identical to depthify_sequential whenever
/// buffer_m covers the relief parallax; a warning is emitted otherwise.
SatDepthMap depthify_tiled(const DepthifyInputs& in, const DepthifyConfig& cfg = {},
                           DepthifyStats* stats = nullptr);

/// Ground-distance parallax (meters) between back-projections of the image
/// corners at the lowest and highest scene heights.
double measure_parallax(const DepthifyInputs& in);

/// Nearest-cell read. std::nullopt for an invalid pixel; OutOfBoundsError
/// when the rounded pixel lies outside the map.
std::optional<GeoPoint> lookup(const SatDepthMap& map, const PixelPoint& x);

/// Round half away from zero, as used for every pixel binning step.
inline long round_pixel(double v) { return std::lround(v); }

}  // namespace satdepth
