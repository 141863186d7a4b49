#include "satdepth/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace satdepth::synth {

GeoTransform grid_around(const GeoPoint& center, int height, int width, double cell_m) {
  const auto [m_lat, m_lon] = meters_per_degree(center);
  GeoTransform gt;
  gt.pixel_size_lat = cell_m / m_lat;
  gt.pixel_size_lon = cell_m / m_lon;
  gt.origin_lat = center.lat + 0.5 * height * gt.pixel_size_lat;
  gt.origin_lon = center.lon - 0.5 * width * gt.pixel_size_lon;
  return gt;
}

BoxWorld box_world(const BoxWorldConfig& cfg, std::mt19937_64& rng) {
  const GeoTransform gt = grid_around(cfg.center, cfg.height, cfg.width, cfg.cell_m);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double ground = cfg.integer_heights ? std::round(cfg.ground) : cfg.ground;
  BoxWorld w{RasterF64(cfg.height, cfg.width, gt, nan), RasterF64(cfg.height, cfg.width, gt, nan)};
  w.dsm.values.setConstant(ground);
  w.dem.values.setConstant(ground);

  std::uniform_int_distribution<int> size(cfg.min_box_cells, cfg.max_box_cells);
  std::uniform_real_distribution<double> height(cfg.min_box_h, cfg.max_box_h);
  for (int b = 0; b < cfg.n_boxes; ++b) {
    const int bh = std::min(size(rng), cfg.height), bw = std::min(size(rng), cfg.width);
    const int r0 = std::uniform_int_distribution<int>(0, cfg.height - bh)(rng);
    const int c0 = std::uniform_int_distribution<int>(0, cfg.width - bw)(rng);
    double top = ground + height(rng);
    if (cfg.integer_heights) top = std::round(top);
    auto blk = w.dsm.values.block(r0, c0, bh, bw);
    blk = blk.max(top);
  }
  return w;
}

AffineCamera view_camera(const GeoPoint& anchor, const ViewConfig& v) {
  const auto [m_lat, m_lon] = meters_per_degree(anchor);
  const double g = v.gsd_m;
  const double s = std::sin(v.roll_deg * kDegToRad), c = std::cos(v.roll_deg * kDegToRad);
  const double pd = v.parallax_dir_deg * kDegToRad;
  AffineCamera::Linear lin;
  lin << -c * m_lat / g, s * m_lon / g, v.parallax_px_per_m * std::sin(pd),  //
      s * m_lat / g, c * m_lon / g, v.parallax_px_per_m * std::cos(pd);
  return AffineCamera(lin, GeoPoint{anchor.lat, anchor.lon, 0.0}, v.anchor_pixel.vec());
}

AffineCamera grid_camera(const GeoTransform& gt, double parallax) {
  AffineCamera::Linear lin;
  lin << -1.0 / gt.pixel_size_lat, 0.0, 0.0,  //
      0.0, 1.0 / gt.pixel_size_lon, parallax;
  const LatLon c0 = pixel_to_geo(gt, 0, 0);
  return AffineCamera(lin, GeoPoint{c0.lat, c0.lon, 0.0}, Eigen::Vector2d::Zero());
}

RpcModel rpc_from_affine(const AffineCamera& cam, double lat_scale, double lon_scale, double height_scale) {
  RpcModel m;
  const GeoPoint& x0 = cam.anchor();
  const Eigen::Vector2d& p0 = cam.anchor_pixel();
  m.lat_off = x0.lat;
  m.lon_off = x0.lon;
  m.height_off = x0.h;
  m.lat_scale = lat_scale;
  m.lon_scale = lon_scale;
  m.height_scale = height_scale;
  m.line_off = p0(0);
  m.samp_off = p0(1);
  m.line_scale = m.samp_scale = 1000.0;
  const auto& a = cam.linear();
  m.line_num(1) = a(0, 1) * lon_scale / m.line_scale;
  m.line_num(2) = a(0, 0) * lat_scale / m.line_scale;
  m.line_num(3) = a(0, 2) * height_scale / m.line_scale;
  m.samp_num(1) = a(1, 1) * lon_scale / m.samp_scale;
  m.samp_num(2) = a(1, 0) * lat_scale / m.samp_scale;
  m.samp_num(3) = a(1, 2) * height_scale / m.samp_scale;
  return m;
}

RpcModel random_rpc(std::mt19937_64& rng, double nonlinearity) {
  const auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  RpcModel m;
  m.lat_off = u(-60, 60);
  m.lon_off = u(-179, 179);
  m.height_off = u(0, 500);
  m.lat_scale = u(0.04, 0.1);
  m.lon_scale = u(0.04, 0.1);
  m.height_scale = u(300, 600);
  m.line_off = u(4000, 6000);
  m.samp_off = u(4000, 6000);
  m.line_scale = u(4000, 6000);
  m.samp_scale = u(4000, 6000);

  m.line_num(0) = u(-0.01, 0.01);
  m.line_num(1) = u(-0.1, 0.1);
  m.line_num(2) = -u(0.9, 1.1);
  m.line_num(3) = u(-0.3, 0.3);
  m.samp_num(0) = u(-0.01, 0.01);
  m.samp_num(1) = u(0.9, 1.1);
  m.samp_num(2) = u(-0.1, 0.1);
  m.samp_num(3) = u(-0.3, 0.3);
  for (int k = 4; k < 20; ++k) {
    m.line_num(k) = u(-nonlinearity, nonlinearity);
    m.samp_num(k) = u(-nonlinearity, nonlinearity);
  }
  for (int k = 1; k < 20; ++k) {
    const double amp = nonlinearity * (k < 4 ? 0.5 : 0.1);
    m.line_den(k) = u(-amp, amp);
    m.samp_den(k) = u(-amp, amp);
  }
  return m;
}

SatDepthMap flat_map(const Camera& cam, ImageDims dims, double h) {
  SatDepthMap map(dims.height, dims.width);
  for (int r = 0; r < dims.height; ++r) {
    for (int c = 0; c < dims.width; ++c) {
      try {
        map.set(r, c, backproject(cam, PixelPoint{double(r), double(c)}, h));
      } catch (const Error&) {
      }
    }
  }
  return map;
}

Image textured_image(ImageDims dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.02, 0.3), ang(0.0, 2 * M_PI);
  struct Wave {
    double fx, fy, phase;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 8; ++k) {
    const double f = freq(rng), a = ang(rng);
    waves.push_back({f * std::cos(a), f * std::sin(a), ang(rng)});
  }
  Image img(dims.height, dims.width);
  for (int r = 0; r < dims.height; ++r) {
    for (int c = 0; c < dims.width; ++c) {
      double v = 0.0;
      for (const auto& w : waves) v += std::sin(2 * M_PI * (w.fx * c + w.fy * r) + w.phase);
      img(r, c) = float(500.0 + 500.0 * v / double(waves.size()));
    }
  }
  return img;
}

GeoTransform footprint_grid(const Camera& cam, ImageDims dims, double h, double cell_m, double margin_m,
                            int* height, int* width) {
  double lat_lo = 1e9, lat_hi = -1e9, lon_lo = 1e9, lon_hi = -1e9;
  for (const auto& x : {PixelPoint{0, 0}, PixelPoint{0, double(dims.width - 1)}, PixelPoint{double(dims.height - 1), 0},
                        PixelPoint{double(dims.height - 1), double(dims.width - 1)}}) {
    const GeoPoint g = backproject(cam, x, h);
    lat_lo = std::min(lat_lo, g.lat);
    lat_hi = std::max(lat_hi, g.lat);
    lon_lo = std::min(lon_lo, g.lon);
    lon_hi = std::max(lon_hi, g.lon);
  }
  const GeoPoint center{0.5 * (lat_lo + lat_hi), 0.5 * (lon_lo + lon_hi), h};
  const auto [m_lat, m_lon] = meters_per_degree(center);
  GeoTransform gt;
  gt.pixel_size_lat = cell_m / m_lat;
  gt.pixel_size_lon = cell_m / m_lon;
  gt.origin_lat = lat_hi + margin_m / m_lat;
  gt.origin_lon = lon_lo - margin_m / m_lon;
  *height = int(std::ceil((lat_hi - lat_lo + 2 * margin_m / m_lat) / gt.pixel_size_lat));
  *width = int(std::ceil((lon_hi - lon_lo + 2 * margin_m / m_lon) / gt.pixel_size_lon));
  return gt;
}

}  // namespace satdepth::synth
