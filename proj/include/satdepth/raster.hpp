#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>

#include "satdepth/error.hpp"
#include "satdepth/geodesy.hpp"

namespace satdepth {

enum class DType { U16, F32, F64 };

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, std::uint16_t>)
    return DType::U16;
  else if constexpr (std::is_same_v<T, float>)
    return DType::F32;
  else {
    static_assert(std::is_same_v<T, double>, "raster element must be u16, f32 or f64");
    return DType::F64;
  }
}

std::string dtype_name(DType t);
DType dtype_from_name(const std::string& name);

template <typename T>
using Grid = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Geo-referenced single-band grid. `values(row, col)`, row 0 is north.
template <typename T>
struct Raster {
  using value_type = T;

  Grid<T> values;
  GeoTransform gt;
  T nodata = std::numeric_limits<T>::has_quiet_NaN ? std::numeric_limits<T>::quiet_NaN() : T(0);

  Raster() = default;
  Raster(int height, int width, const GeoTransform& transform, T nodata_value)
      : values(Grid<T>::Constant(height, width, nodata_value)), gt(transform), nodata(nodata_value) {}

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height() && col < width();
  }

  bool is_nodata(T v) const {
    if constexpr (std::numeric_limits<T>::has_quiet_NaN) {
      if (std::isnan(nodata)) return std::isnan(v);
      return v == nodata || std::isnan(v);
    } else {
      return v == nodata;
    }
  }
  bool valid(int row, int col) const { return contains(row, col) && !is_nodata(values(row, col)); }
};

using RasterU16 = Raster<std::uint16_t>;
using RasterF32 = Raster<float>;
using RasterF64 = Raster<double>;
using AnyRaster = std::variant<RasterU16, RasterF32, RasterF64>;

/// Converts any supported raster to f64 with NaN nodata.
template <typename T>
RasterF64 to_f64(const Raster<T>& in) {
  RasterF64 out(in.height(), in.width(), in.gt, std::numeric_limits<double>::quiet_NaN());
  for (int r = 0; r < in.height(); ++r)
    for (int c = 0; c < in.width(); ++c)
      if (!in.is_nodata(in.values(r, c))) out.values(r, c) = static_cast<double>(in.values(r, c));
  return out;
}

RasterF64 to_f64(const AnyRaster& in);

/// True when two rasters carry identical geotransform, nodata and samples,
/// comparing floating payloads bit-for-bit (so NaN == NaN).
bool bit_equal(const AnyRaster& a, const AnyRaster& b);

/// Bilinear sample at continuous cell-center coordinates (row 0.0 is the
/// center of the first row). Valid for 0 <= row <= height-1 and
/// 0 <= col <= width-1. Returns NaN when any contributing cell is nodata.
template <typename T>
double sample_bilinear(const Raster<T>& grid, double row, double col) {
  constexpr double kSlack = 1e-9;
  const int h = grid.height();
  const int w = grid.width();
  if (!(row >= -kSlack && col >= -kSlack && row <= h - 1 + kSlack && col <= w - 1 + kSlack))
    throw OutOfBoundsError("bilinear sample (" + std::to_string(row) + ", " + std::to_string(col) +
                           ") outside grid interior");
  row = std::clamp(row, 0.0, double(h - 1));
  col = std::clamp(col, 0.0, double(w - 1));
  const int r0 = std::min(static_cast<int>(std::floor(row)), std::max(h - 2, 0));
  const int c0 = std::min(static_cast<int>(std::floor(col)), std::max(w - 2, 0));
  const int r1 = std::min(r0 + 1, h - 1);
  const int c1 = std::min(c0 + 1, w - 1);
  const double fr = row - r0;
  const double fc = col - c0;

  const auto at = [&](int r, int c) { return grid.values(r, c); };
  const T v00 = at(r0, c0), v01 = at(r0, c1), v10 = at(r1, c0), v11 = at(r1, c1);
  // Cells with zero weight do not contribute.
  const bool use_r1 = fr > 0.0, use_c1 = fc > 0.0;
  if (grid.is_nodata(v00) || (use_c1 && grid.is_nodata(v01)) || (use_r1 && grid.is_nodata(v10)) ||
      (use_r1 && use_c1 && grid.is_nodata(v11)))
    return std::numeric_limits<double>::quiet_NaN();

  const double top = use_c1 ? (1.0 - fc) * v00 + fc * v01 : double(v00);
  if (!use_r1) return top;
  const double bottom = use_c1 ? (1.0 - fc) * v10 + fc * v11 : double(v10);
  return (1.0 - fr) * top + fr * bottom;
}

/// Nearest-cell sample; NaN outside the grid or on nodata.
template <typename T>
double sample_nearest(const Raster<T>& grid, double row, double col) {
  if (!(std::abs(row) < 1e9 && std::abs(col) < 1e9)) return std::numeric_limits<double>::quiet_NaN();
  const long r = std::lround(row);
  const long c = std::lround(col);
  if (!grid.contains(static_cast<int>(r), static_cast<int>(c)))
    return std::numeric_limits<double>::quiet_NaN();
  const T v = grid.values(r, c);
  return grid.is_nodata(v) ? std::numeric_limits<double>::quiet_NaN() : double(v);
}

}  // namespace satdepth
