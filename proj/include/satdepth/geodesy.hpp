#pragma once

#include <Eigen/Core>
#include <cmath>
#include <utility>

namespace satdepth {

/// WGS84 ellipsoid constants.
namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kInvFlattening = 298.257223563;
inline constexpr double kFlattening = 1.0 / kInvFlattening;
inline constexpr double kSemiMinor = kSemiMajor * (1.0 - kFlattening);
inline constexpr double kEccSq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

inline constexpr double kDegToRad = 0.017453292519943295;
inline constexpr double kRadToDeg = 57.29577951308232;

/// Geodetic position: degrees WGS84, ellipsoidal height in meters.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  double h = 0.0;

  Eigen::Vector3d vec() const { return {lat, lon, h}; }
  static GeoPoint from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool operator==(const GeoPoint&) const = default;
};

bool is_valid(const GeoPoint& p);

/// Earth-centered earth-fixed position in meters.
using EcefPoint = Eigen::Vector3d;

enum class Hemisphere { North, South };

struct UtmPoint {
  double easting = 0.0;
  double northing = 0.0;
  int zone = 0;
  Hemisphere hemisphere = Hemisphere::North;
};

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> geo_to_ecef(const Scalar& lat_deg, const Scalar& lon_deg, const Scalar& h) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar lat = lat_deg * Scalar(kDegToRad);
  const Scalar lon = lon_deg * Scalar(kDegToRad);
  const Scalar sl = sin(lat);
  const Scalar cl = cos(lat);
  const Scalar n = Scalar(wgs84::kSemiMajor) / sqrt(Scalar(1) - Scalar(wgs84::kEccSq) * sl * sl);
  return {(n + h) * cl * cos(lon), (n + h) * cl * sin(lon),
          (n * Scalar(1.0 - wgs84::kEccSq) + h) * sl};
}

inline EcefPoint geo_to_ecef(const GeoPoint& p) { return geo_to_ecef<double>(p.lat, p.lon, p.h); }

/// Inverse of geo_to_ecef (Bowring iteration, converges to sub-micrometer).
GeoPoint ecef_to_geo(const EcefPoint& x);

/// d(ECEF)/d(lat_deg, lon_deg, h) evaluated at p.
Eigen::Matrix3d geo_to_ecef_jacobian(const GeoPoint& p);

/// Ground meters spanned by one degree of latitude and of longitude at p.
std::pair<double, double> meters_per_degree(const GeoPoint& p);

int utm_zone_for(double lon_deg);

/// Standard UTM (k0 = 0.9996, false easting 500 km). Throws DomainError for
/// |lat| >= 84.
UtmPoint geo_to_utm(const GeoPoint& p);

/// UTM in a pinned zone/hemisphere, for batches that must share one grid.
UtmPoint geo_to_utm(const GeoPoint& p, int zone, Hemisphere hemisphere);

/// North-up geotransform. Origin is the top-left corner of the top-left
/// pixel; values live at pixel centers.
struct GeoTransform {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double pixel_size_lon = 1.0;
  double pixel_size_lat = 1.0;

  bool operator==(const GeoTransform&) const = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct RowCol {
  double row = 0.0;
  double col = 0.0;
};

inline LatLon pixel_to_geo(const GeoTransform& gt, double row, double col) {
  return {gt.origin_lat - (row + 0.5) * gt.pixel_size_lat,
          gt.origin_lon + (col + 0.5) * gt.pixel_size_lon};
}

inline RowCol geo_to_pixel(const GeoTransform& gt, double lat, double lon) {
  return {(gt.origin_lat - lat) / gt.pixel_size_lat - 0.5,
          (lon - gt.origin_lon) / gt.pixel_size_lon - 0.5};
}

}  // namespace satdepth
