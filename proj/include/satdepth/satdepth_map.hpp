#pragma once

#include <cmath>
#include <limits>

#include "satdepth/raster.hpp"

namespace satdepth {

/// Per-pixel (lat, lon, h) association for one satellite image. A pixel is
/// valid in all three planes or in none; invalid pixels hold NaN.
struct SatDepthMap {
  Grid<double> lat;
  Grid<double> lon;
  Grid<float> ht;

  SatDepthMap() = default;
  SatDepthMap(int height, int width)
      : lat(Grid<double>::Constant(height, width, std::numeric_limits<double>::quiet_NaN())),
        lon(Grid<double>::Constant(height, width, std::numeric_limits<double>::quiet_NaN())),
        ht(Grid<float>::Constant(height, width, std::numeric_limits<float>::quiet_NaN())) {}

  int height() const { return static_cast<int>(ht.rows()); }
  int width() const { return static_cast<int>(ht.cols()); }
  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height() && col < width();
  }
  bool valid(int row, int col) const { return !std::isnan(ht(row, col)); }

  GeoPoint at(int row, int col) const { return {lat(row, col), lon(row, col), double(ht(row, col))}; }
  void set(int row, int col, const GeoPoint& p) {
    lat(row, col) = p.lat;
    lon(row, col) = p.lon;
    ht(row, col) = static_cast<float>(p.h);
  }
  void invalidate(int row, int col) {
    lat(row, col) = lon(row, col) = std::numeric_limits<double>::quiet_NaN();
    ht(row, col) = std::numeric_limits<float>::quiet_NaN();
  }
  int valid_count() const {
    int n = 0;
    for (int r = 0; r < height(); ++r)
      for (int c = 0; c < width(); ++c) n += valid(r, c) ? 1 : 0;
    return n;
  }
};

}  // namespace satdepth
