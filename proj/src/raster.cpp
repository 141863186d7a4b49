#include "satdepth/raster.hpp"

#include <cstring>

namespace satdepth {

std::string dtype_name(DType t) {
  switch (t) {
    case DType::U16: return "u16";
    case DType::F32: return "f32";
    case DType::F64: return "f64";
  }
  return "?";
}

DType dtype_from_name(const std::string& name) {
  if (name == "u16") return DType::U16;
  if (name == "f32") return DType::F32;
  if (name == "f64") return DType::F64;
  throw FormatError("unknown raster dtype '" + name + "'");
}

RasterF64 to_f64(const AnyRaster& in) {
  return std::visit([](const auto& r) { return to_f64(r); }, in);
}

namespace {

template <typename T>
bool same_bits(const T& a, const T& b) {
  return std::memcmp(&a, &b, sizeof(T)) == 0;
}

template <typename T>
bool raster_bit_equal(const Raster<T>& a, const Raster<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) return false;
  if (!(a.gt == b.gt) || !same_bits(a.nodata, b.nodata)) return false;
  const auto n = static_cast<std::size_t>(a.values.size());
  return n == 0 || std::memcmp(a.values.data(), b.values.data(), n * sizeof(T)) == 0;
}

}  // namespace

bool bit_equal(const AnyRaster& a, const AnyRaster& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& ra) {
        using R = std::decay_t<decltype(ra)>;
        return raster_bit_equal(ra, std::get<R>(b));
      },
      a);
}

}  // namespace satdepth
