#pragma once

// Box-world scenes and the brute-force depth oracle shared by the depthify
// tests and the acceptance runner.

#include <algorithm>
#include <cstring>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "satdepth/correspondence.hpp"
#include "satdepth/depthify.hpp"
#include "satdepth/synthetic.hpp"

namespace satdepth::testing {

struct Scene {
  DepthifyInputs inputs;
  synth::BoxWorld world;
};

/// 64x64 box world seen by a rotated oblique affine camera at 0.4 m GSD, so
/// the image (160x160) spans several 64-pixel blocks.
inline Scene random_scene(std::uint64_t seed, int image_size = 160) {
  std::mt19937_64 rng(seed);
  synth::BoxWorldConfig wc;
  wc.integer_heights = true;
  Scene s{{}, synth::box_world(wc, rng)};
  std::uniform_real_distribution<double> roll(-30, 30), dir(0, 360), par(0.3, 1.2);
  synth::ViewConfig v;
  v.gsd_m = 0.4;
  v.roll_deg = roll(rng);
  v.parallax_px_per_m = par(rng);
  v.parallax_dir_deg = dir(rng);
  v.anchor_pixel = {image_size / 2.0, image_size / 2.0};
  s.inputs.image = {image_size, image_size};
  s.inputs.cam = synth::view_camera(wc.center, v);
  s.inputs.dsm = s.world.dsm;
  s.inputs.dem = s.world.dem;
  return s;
}

/// Expected map by exhaustive candidate enumeration. For every image pixel the
/// highest (cell, Z) candidate rounding to it wins; equal heights go to the
/// earliest cell in row-major order. Requires DEM == ground everywhere.
inline SatDepthMap brute_force_depth(const DepthifyInputs& in, double dz, bool include_roof = true) {
  struct Candidate {
    long row, col;
    double z, lat, lon;
  };
  std::vector<Candidate> all;
  for (int r = 0; r < in.dsm.height(); ++r) {
    for (int c = 0; c < in.dsm.width(); ++c) {
      const LatLon ll = pixel_to_geo(in.dsm.gt, r, c);
      if (in.water) {
        const RowCol wp = geo_to_pixel(in.water->gt, ll.lat, ll.lon);
        if (sample_nearest(*in.water, wp.row, wp.col) != 0.0) continue;
      }
      const double top = in.dsm.values(r, c);
      const double ground = std::min(in.dem.values(r, c), top);
      std::vector<double> zs;
      for (long k = 0; ground + double(k) * dz < top; ++k) zs.push_back(ground + double(k) * dz);
      if (include_roof) zs.push_back(top);
      for (double z : zs) {
        const PixelPoint x = project(in.cam, GeoPoint{ll.lat, ll.lon, z});
        all.push_back({std::lround(x.row), std::lround(x.col), z, ll.lat, ll.lon});
      }
    }
  }
  // Group by pixel; the stable sort keeps enumeration order inside a group.
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  SatDepthMap out(in.image.height, in.image.width);
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i, best = i;
    for (; j < all.size() && all[j].row == all[i].row && all[j].col == all[i].col; ++j)
      if (all[j].z > all[best].z) best = j;
    const Candidate& k = all[best];
    if (k.row >= 0 && k.col >= 0 && k.row < in.image.height && k.col < in.image.width)
      out.set(int(k.row), int(k.col), {k.lat, k.lon, k.z});
    i = j;
  }
  return out;
}

/// Two oblique views of one box world with their depth maps.
struct StereoScene {
  synth::BoxWorld world;
  ImageDims dims;
  AffineCamera cam_i, cam_j;
  SatDepthMap map_i, map_j;
};

inline StereoScene stereo_scene(std::uint64_t seed, int image_size = 160) {
  std::mt19937_64 rng(seed);
  synth::BoxWorldConfig wc;
  wc.integer_heights = true;
  StereoScene s{synth::box_world(wc, rng), {image_size, image_size}, {}, {}, {}, {}};
  std::uniform_real_distribution<double> roll(-30, 30), par(0.3, 1.2), dir(0, 360);
  const auto view = [&]() {
    synth::ViewConfig v;
    v.gsd_m = 0.4;
    v.roll_deg = roll(rng);
    v.parallax_px_per_m = par(rng);
    v.parallax_dir_deg = dir(rng);
    v.anchor_pixel = {image_size / 2.0, image_size / 2.0};
    return synth::view_camera(wc.center, v);
  };
  s.cam_i = view();
  s.cam_j = view();
  DepthifyInputs in;
  in.image = s.dims;
  in.dsm = s.world.dsm;
  in.dem = s.world.dem;
  DepthifyConfig cfg;
  cfg.dz = 0.5;
  in.cam = s.cam_i;
  s.map_i = depthify_sequential(in, cfg);
  in.cam = s.cam_j;
  s.map_j = depthify_sequential(in, cfg);
  return s;
}

/// Per-pixel re-evaluation of the match test: for every valid x_i, whether
/// the ECEF gap to the point stored at round(P_j(X_i)) is under delta3d.
/// Projections below -1e-6 in either coordinate are out of bounds.
/// Returns (row, col) -> distance for accepted pixels.
inline std::map<std::pair<int, int>, double> reference_matches(const SatDepthMap& map_i, const AffineCamera& cam_j,
                                                               const SatDepthMap& map_j, double delta3d) {
  std::map<std::pair<int, int>, double> out;
  for (int r = 0; r < map_i.height(); ++r) {
    for (int c = 0; c < map_i.width(); ++c) {
      if (std::isnan(map_i.ht(r, c))) continue;
      const GeoPoint x{map_i.lat(r, c), map_i.lon(r, c), double(map_i.ht(r, c))};
      const Eigen::Vector2d y = cam_j.linear() * (x.vec() - cam_j.anchor().vec()) + cam_j.anchor_pixel();
      if (y(0) < -1e-6 || y(1) < -1e-6) continue;
      const double rr = std::round(y(0)), cc = std::round(y(1));
      if (rr < 0 || cc < 0 || rr >= map_j.height() || cc >= map_j.width()) continue;
      if (std::isnan(map_j.ht(int(rr), int(cc)))) continue;
      const GeoPoint z{map_j.lat(int(rr), int(cc)), map_j.lon(int(rr), int(cc)), double(map_j.ht(int(rr), int(cc)))};
      const double d = (geo_to_ecef(x) - geo_to_ecef(z)).norm();
      if (d < delta3d) out[{r, c}] = d;
    }
  }
  return out;
}

/// NaN-aware bitwise equality of two maps.
inline bool identical(const SatDepthMap& a, const SatDepthMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) return false;
  const auto same_bytes = [](const auto& x, const auto& y) {
    return std::memcmp(x.data(), y.data(), sizeof(*x.data()) * std::size_t(x.size())) == 0;
  };
  return same_bytes(a.lat, b.lat) && same_bytes(a.lon, b.lon) && same_bytes(a.ht, b.ht);
}

}  // namespace satdepth::testing
