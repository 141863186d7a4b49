#include "satdepth/depthify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace satdepth {

void validate(const DepthifyConfig& cfg) {
  if (!(cfg.dz > 0.0) || !std::isfinite(cfg.dz)) throw DomainError("depthify: dz must be > 0");
  if (cfg.block < 64) throw DomainError("depthify: block must be >= 64 pixels");
  if (!(cfg.buffer_m >= 0.0)) throw DomainError("depthify: buffer_m must be >= 0");
  if (cfg.workers < 1) throw DomainError("depthify: workers must be >= 1");
}

namespace {

void validate_geotransform(const GeoTransform& gt, const char* what) {
  if (!(gt.pixel_size_lat != 0.0 && gt.pixel_size_lon != 0.0 && std::isfinite(gt.pixel_size_lat) &&
        std::isfinite(gt.pixel_size_lon) && std::isfinite(gt.origin_lat) && std::isfinite(gt.origin_lon)))
    throw DomainError(std::string("depthify: invalid geotransform on ") + what);
}

void validate_inputs(const DepthifyInputs& in) {
  if (in.image.height <= 0 || in.image.width <= 0) throw DomainError("depthify: empty image");
  if (in.dsm.height() == 0 || in.dsm.width() == 0) throw DomainError("depthify: empty DSM");
  validate_geotransform(in.dsm.gt, "DSM");
  if (in.dem.height() > 0) validate_geotransform(in.dem.gt, "DEM");
  if (in.water) validate_geotransform(in.water->gt, "water mask");
}

// Per-cell sweep bounds; computed once and shared by all blocks.
struct CellColumn {
  double lat = 0, lon = 0;
  double z_lb = 0, z_ub = 0;
  bool active = false;
};

std::vector<CellColumn> prepare_cells(const DepthifyInputs& in) {
  const int h = in.dsm.height(), w = in.dsm.width();
  std::vector<CellColumn> cells(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      CellColumn& cell = cells[static_cast<std::size_t>(r) * w + c];
      const double z_ub = in.dsm.values(r, c);
      if (in.dsm.is_nodata(z_ub) || !std::isfinite(z_ub)) continue;
      const LatLon ll = pixel_to_geo(in.dsm.gt, r, c);

      if (in.water) {
        const RowCol wp = geo_to_pixel(in.water->gt, ll.lat, ll.lon);
        const double v = sample_nearest(*in.water, wp.row, wp.col);
        if (!std::isnan(v) && v != 0.0) continue;
      }

      double z_lb = z_ub;
      if (in.dem.height() > 0) {
        const RowCol dp = geo_to_pixel(in.dem.gt, ll.lat, ll.lon);
        try {
          const double g = sample_bilinear(in.dem, dp.row, dp.col);
          if (std::isfinite(g)) z_lb = std::min(g, z_ub);
        } catch (const OutOfBoundsError&) {
        }
      }
      cell = {ll.lat, ll.lon, z_lb, z_ub, true};
    }
  }
  return cells;
}

struct Window {
  int r0, r1, c0, c1;  // pixel block [r0, r1) x [c0, c1)
  int height() const { return r1 - r0; }
  int width() const { return c1 - c0; }
};

struct CellRange {
  int r0, r1, c0, c1;  // DSM cells [r0, r1) x [c0, c1)
};

struct BlockResult {
  Grid<double> z, lat, lon;
  Grid<std::uint8_t> written;
  long long samples = 0, failures = 0;
};

BlockResult sweep(const DepthifyInputs& in, const DepthifyConfig& cfg, const std::vector<CellColumn>& cells,
                  const CellRange& cr, const Window& win) {
  BlockResult out;
  const double init = cfg.zero_init ? 0.0 : kHeightSentinel;
  out.z = Grid<double>::Constant(win.height(), win.width(), init);
  out.lat = Grid<double>::Zero(win.height(), win.width());
  out.lon = Grid<double>::Zero(win.height(), win.width());
  out.written = Grid<std::uint8_t>::Zero(win.height(), win.width());
  const int dsm_w = in.dsm.width();

  const auto consider = [&](const CellColumn& cell, double z) {
    ++out.samples;
    PixelPoint x;
    try {
      x = project(in.cam, GeoPoint{cell.lat, cell.lon, z});
    } catch (const DenominatorError&) {
      ++out.failures;
      return;
    }
    if (!std::isfinite(x.row) || !std::isfinite(x.col)) {
      ++out.failures;
      return;
    }
    if (!(std::abs(x.row) < 1e9 && std::abs(x.col) < 1e9)) return;
    const long ir = round_pixel(x.row), ic = round_pixel(x.col);
    if (ir < win.r0 || ir >= win.r1 || ic < win.c0 || ic >= win.c1) return;
    const int lr = int(ir - win.r0), lc = int(ic - win.c0);
    if (out.z(lr, lc) < z) {
      out.z(lr, lc) = z;
      out.lat(lr, lc) = cell.lat;
      out.lon(lr, lc) = cell.lon;
      out.written(lr, lc) = 1;
    }
  };

  for (int r = cr.r0; r < cr.r1; ++r) {
    for (int c = cr.c0; c < cr.c1; ++c) {
      const CellColumn& cell = cells[static_cast<std::size_t>(r) * dsm_w + c];
      if (!cell.active) continue;
      for (long k = 0;; ++k) {
        const double z = cell.z_lb + static_cast<double>(k) * cfg.dz;
        if (!(z < cell.z_ub)) break;
        consider(cell, z);
      }
      if (cfg.include_roof) consider(cell, cell.z_ub);
    }
  }
  return out;
}

void write_block(SatDepthMap& map, const BlockResult& b, const Window& win) {
  for (int r = 0; r < win.height(); ++r)
    for (int c = 0; c < win.width(); ++c)
      if (b.written(r, c)) map.set(win.r0 + r, win.c0 + c, {b.lat(r, c), b.lon(r, c), b.z(r, c)});
}

void check_failures(long long samples, long long failures, const DepthifyConfig& cfg) {
  if (samples > 0 && double(failures) > cfg.max_failure_fraction * double(samples)) {
    std::ostringstream msg;
    msg << "depthify: camera projection failed for " << failures << " of " << samples
        << " samples (limit " << cfg.max_failure_fraction * 100.0 << "%)";
    throw ConvergenceError(msg.str());
  }
}

struct HeightRange {
  double lo = 0, hi = 0, median = 0;
};

HeightRange scene_heights(const std::vector<CellColumn>& cells) {
  std::vector<double> tops;
  HeightRange hr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0};
  for (const CellColumn& c : cells) {
    if (!c.active) continue;
    tops.push_back(c.z_ub);
    hr.lo = std::min(hr.lo, c.z_lb);
    hr.hi = std::max(hr.hi, c.z_ub);
  }
  if (tops.empty()) return {0, 0, 0};
  auto mid = tops.begin() + tops.size() / 2;
  std::nth_element(tops.begin(), mid, tops.end());
  hr.median = *mid;
  return hr;
}

std::array<PixelPoint, 4> block_corners(const Window& w) {
  return {PixelPoint{w.r0 - 0.5, w.c0 - 0.5}, PixelPoint{w.r0 - 0.5, w.c1 - 0.5},
          PixelPoint{w.r1 - 0.5, w.c0 - 0.5}, PixelPoint{w.r1 - 0.5, w.c1 - 0.5}};
}

// DSM cells whose centers fall in the buffered world footprint of `win`.
// Returns the full DSM when the corners cannot be back-projected.
CellRange block_cells(const DepthifyInputs& in, const DepthifyConfig& cfg, const Window& win, double h_ref) {
  const CellRange all{0, in.dsm.height(), 0, in.dsm.width()};
  double lat_lo = std::numeric_limits<double>::infinity(), lat_hi = -lat_lo;
  double lon_lo = lat_lo, lon_hi = -lat_lo;
  try {
    for (const PixelPoint& x : block_corners(win)) {
      const GeoPoint g = backproject(in.cam, x, h_ref);
      lat_lo = std::min(lat_lo, g.lat);
      lat_hi = std::max(lat_hi, g.lat);
      lon_lo = std::min(lon_lo, g.lon);
      lon_hi = std::max(lon_hi, g.lon);
    }
  } catch (const Error&) {
    return all;
  }
  const GeoPoint center{0.5 * (lat_lo + lat_hi), 0.5 * (lon_lo + lon_hi), h_ref};
  if (!is_valid(center)) return all;
  const auto [m_lat, m_lon] = meters_per_degree(center);
  const double dlat = cfg.buffer_m / m_lat, dlon = cfg.buffer_m / m_lon;
  lat_lo -= dlat;
  lat_hi += dlat;
  lon_lo -= dlon;
  lon_hi += dlon;

  const RowCol a = geo_to_pixel(in.dsm.gt, lat_hi, lon_lo);
  const RowCol b = geo_to_pixel(in.dsm.gt, lat_lo, lon_hi);
  const double rmin = std::min(a.row, b.row), rmax = std::max(a.row, b.row);
  const double cmin = std::min(a.col, b.col), cmax = std::max(a.col, b.col);
  if (!(std::isfinite(rmin) && std::isfinite(rmax) && std::isfinite(cmin) && std::isfinite(cmax))) return all;
  // One extra cell on each side absorbs rounding at the box edge.
  const auto clampi = [](double v, int lo, int hi) {
    return static_cast<int>(std::clamp(v, double(lo), double(hi)));
  };
  CellRange cr;
  cr.r0 = clampi(std::ceil(rmin) - 1, 0, in.dsm.height());
  cr.r1 = clampi(std::floor(rmax) + 2, 0, in.dsm.height());
  cr.c0 = clampi(std::ceil(cmin) - 1, 0, in.dsm.width());
  cr.c1 = clampi(std::floor(cmax) + 2, 0, in.dsm.width());
  if (cr.r1 < cr.r0) cr.r1 = cr.r0;
  if (cr.c1 < cr.c0) cr.c1 = cr.c0;
  return cr;
}

double parallax_for(const DepthifyInputs& in, const HeightRange& hr) {
  const Window whole{0, in.image.height, 0, in.image.width};
  double worst = 0.0;
  for (const PixelPoint& x : block_corners(whole)) {
    try {
      const GeoPoint lo = backproject(in.cam, x, hr.lo);
      const GeoPoint hi = backproject(in.cam, x, hr.hi);
      const auto [m_lat, m_lon] = meters_per_degree(lo);
      worst = std::max(worst, std::hypot((hi.lat - lo.lat) * m_lat, (hi.lon - lo.lon) * m_lon));
    } catch (const Error&) {
    }
  }
  return worst;
}

}  // namespace

SatDepthMap depthify_sequential(const DepthifyInputs& in, const DepthifyConfig& cfg, DepthifyStats* stats) {
  validate(cfg);
  validate_inputs(in);
  const auto cells = prepare_cells(in);
  const Window whole{0, in.image.height, 0, in.image.width};
  const BlockResult b = sweep(in, cfg, cells, {0, in.dsm.height(), 0, in.dsm.width()}, whole);
  check_failures(b.samples, b.failures, cfg);

  SatDepthMap map(in.image.height, in.image.width);
  write_block(map, b, whole);
  if (stats) {
    stats->samples += b.samples;
    stats->failures += b.failures;
  }
  return map;
}

double measure_parallax(const DepthifyInputs& in) {
  validate_inputs(in);
  return parallax_for(in, scene_heights(prepare_cells(in)));
}

SatDepthMap depthify_tiled(const DepthifyInputs& in, const DepthifyConfig& cfg, DepthifyStats* stats) {
  validate(cfg);
  validate_inputs(in);
  const auto cells = prepare_cells(in);
  const HeightRange hr = scene_heights(cells);

  const double parallax = parallax_for(in, hr);
  if (stats && cfg.buffer_m < parallax) {
    std::ostringstream msg;
    msg << "depthify: buffer_m = " << cfg.buffer_m << " m is below the measured relief parallax of "
        << parallax << " m (deficit " << parallax - cfg.buffer_m << " m); tiles may miss occluders";
    stats->warnings.push_back(msg.str());
  }

  std::vector<Window> blocks;
  for (int r = 0; r < in.image.height; r += cfg.block)
    for (int c = 0; c < in.image.width; c += cfg.block)
      blocks.push_back({r, std::min(r + cfg.block, in.image.height), c, std::min(c + cfg.block, in.image.width)});

  std::vector<BlockResult> results(blocks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= blocks.size()) return;
      try {
        const CellRange cr = block_cells(in, cfg, blocks[k], hr.median);
        results[k] = sweep(in, cfg, cells, cr, blocks[k]);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mutex);
        if (!error) error = std::current_exception();
        next = blocks.size();
        return;
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(blocks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  long long samples = 0, failures = 0;
  SatDepthMap map(in.image.height, in.image.width);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    samples += results[k].samples;
    failures += results[k].failures;
    write_block(map, results[k], blocks[k]);
  }
  check_failures(samples, failures, cfg);
  if (stats) {
    stats->samples += samples;
    stats->failures += failures;
  }
  return map;
}

std::optional<GeoPoint> lookup(const SatDepthMap& map, const PixelPoint& x) {
  if (!(std::abs(x.row) < 1e9 && std::abs(x.col) < 1e9))
    throw OutOfBoundsError("lookup: pixel is not finite");
  const long r = round_pixel(x.row), c = round_pixel(x.col);
  if (!map.contains(int(r), int(c)))
    throw OutOfBoundsError("lookup: pixel (" + std::to_string(x.row) + ", " + std::to_string(x.col) +
                           ") outside map");
  if (!map.valid(int(r), int(c))) return std::nullopt;
  return map.at(int(r), int(c));
}

}  // namespace satdepth
