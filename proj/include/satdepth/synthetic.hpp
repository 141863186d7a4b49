#pragma once

// Deterministic synthetic scenes and cameras for tests, benchmarks and the
// packaged demo AOI.

#include <random>

#include "satdepth/correspondence.hpp"
#include "satdepth/depthify.hpp"
#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"
#include "satdepth/satdepth_map.hpp"

namespace satdepth::synth {

/// North-up grid of `height` x `width` square cells of `cell_m` meters whose
/// center is `center`.
GeoTransform grid_around(const GeoPoint& center, int height, int width, double cell_m);

struct BoxWorldConfig {
  int height = 64, width = 64;
  GeoPoint center{30.3322, -81.6557, 0.0};
  double cell_m = 1.0;
  double ground = 10.0;
  int n_boxes = 6;
  double min_box_h = 3.0, max_box_h = 20.0;
  int min_box_cells = 3, max_box_cells = 14;
  /// Round box heights and the ground to whole meters.
  bool integer_heights = false;
};

struct BoxWorld {
  RasterF64 dsm;
  RasterF64 dem;
};

/// Flat ground plus axis-aligned boxes; overlapping boxes keep the taller top.
BoxWorld box_world(const BoxWorldConfig& cfg, std::mt19937_64& rng);

struct ViewConfig {
  /// Ground meters per pixel.
  double gsd_m = 0.5;
  /// Image-axis rotation relative to north-up, degrees.
  double roll_deg = 0.0;
  /// Pixel displacement per meter of height, and its image direction (degrees
  /// from the +col axis toward +row).
  double parallax_px_per_m = 0.0;
  double parallax_dir_deg = 0.0;
  /// Pixel of `anchor` at height 0.
  PixelPoint anchor_pixel;
};

/// Affine camera over flat local meters around `anchor`.
AffineCamera view_camera(const GeoPoint& anchor, const ViewConfig& v);

/// Camera whose pixel (r, c) at height 0 is DSM cell (r, c), with `parallax`
/// pixels per meter added along +col.
AffineCamera grid_camera(const GeoTransform& gt, double parallax);

/// Linear RPC reproducing an affine camera exactly; normalization centered
/// on the camera anchor.
RpcModel rpc_from_affine(const AffineCamera& cam, double lat_scale = 0.05, double lon_scale = 0.05,
                         double height_scale = 500.0);

/// Random well-conditioned RPC with cubic terms of relative size `nonlinearity`.
RpcModel random_rpc(std::mt19937_64& rng, double nonlinearity = 0.01);

/// Every pixel back-projected onto the plane h.
SatDepthMap flat_map(const Camera& cam, ImageDims dims, double h);

/// Band-limited texture in [0, 1000].
Image textured_image(ImageDims dims, std::uint64_t seed);

/// Rectangular extents that a camera's image covers at height h, as a DSM grid
/// covering the footprint plus `margin_m`.
GeoTransform footprint_grid(const Camera& cam, ImageDims dims, double h, double cell_m, double margin_m,
                            int* height, int* width);

}  // namespace satdepth::synth
