#include "satdepth/geodesy.hpp"

#include <array>
#include <cmath>
#include <string>

#include "satdepth/error.hpp"

namespace satdepth {

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && std::isfinite(p.h) && p.lat >= -90.0 &&
         p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

GeoPoint ecef_to_geo(const EcefPoint& x) {
  const double a = wgs84::kSemiMajor;
  const double e2 = wgs84::kEccSq;
  const double p = std::hypot(x.x(), x.y());
  const double lon = std::atan2(x.y(), x.x());
  if (p < 1e-9) {
    const double lat = x.z() >= 0 ? 90.0 : -90.0;
    return {lat, lon * kRadToDeg, std::abs(x.z()) - wgs84::kSemiMinor};
  }
  double lat = std::atan2(x.z(), p * (1.0 - e2));
  double h = 0.0;
  for (int it = 0; it < 10; ++it) {
    const double s = std::sin(lat);
    const double n = a / std::sqrt(1.0 - e2 * s * s);
    h = p / std::cos(lat) - n;
    const double next = std::atan2(x.z(), p * (1.0 - e2 * n / (n + h)));
    const bool done = std::abs(next - lat) < 1e-15;
    lat = next;
    if (done) break;
  }
  const double s = std::sin(lat);
  const double n = a / std::sqrt(1.0 - e2 * s * s);
  // Height from the better-conditioned component.
  if (std::abs(lat) < 0.78539816339744828)
    h = p / std::cos(lat) - n;
  else
    h = x.z() / s - n * (1.0 - e2);
  return {lat * kRadToDeg, lon * kRadToDeg, h};
}

Eigen::Matrix3d geo_to_ecef_jacobian(const GeoPoint& p) {
  const double a = wgs84::kSemiMajor;
  const double e2 = wgs84::kEccSq;
  const double lat = p.lat * kDegToRad;
  const double lon = p.lon * kDegToRad;
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  const double w = 1.0 - e2 * sl * sl;
  const double n = a / std::sqrt(w);
  const double m = a * (1.0 - e2) / (w * std::sqrt(w));

  Eigen::Matrix3d j;
  // d/dlat (radians): -(M+h) sin(lat) [cos lon, sin lon], (M+h) cos(lat)
  j.col(0) << -(m + p.h) * sl * co, -(m + p.h) * sl * so, (m + p.h) * cl;
  j.col(1) << -(n + p.h) * cl * so, (n + p.h) * cl * co, 0.0;
  j.col(2) << cl * co, cl * so, sl;
  j.col(0) *= kDegToRad;
  j.col(1) *= kDegToRad;
  return j;
}

std::pair<double, double> meters_per_degree(const GeoPoint& p) {
  const double a = wgs84::kSemiMajor;
  const double e2 = wgs84::kEccSq;
  const double lat = p.lat * kDegToRad;
  const double sl = std::sin(lat);
  const double w = 1.0 - e2 * sl * sl;
  const double n = a / std::sqrt(w);
  const double m = a * (1.0 - e2) / (w * std::sqrt(w));
  return {(m + p.h) * kDegToRad, (n + p.h) * std::cos(lat) * kDegToRad};
}

int utm_zone_for(double lon_deg) {
  int zone = static_cast<int>(std::floor((lon_deg + 180.0) / 6.0)) + 1;
  if (zone > 60) zone = 60;
  if (zone < 1) zone = 1;
  return zone;
}

UtmPoint geo_to_utm(const GeoPoint& p) {
  return geo_to_utm(p, utm_zone_for(p.lon), p.lat >= 0 ? Hemisphere::North : Hemisphere::South);
}

UtmPoint geo_to_utm(const GeoPoint& p, int zone, Hemisphere hemisphere) {
  if (!(std::abs(p.lat) < 84.0))
    throw DomainError("latitude " + std::to_string(p.lat) + " outside UTM range (|lat| < 84)");
  if (zone < 1 || zone > 60) throw DomainError("UTM zone must be in 1..60");

  // Krueger series to sixth order in the third flattening.
  constexpr double k0 = 0.9996;
  const double f = wgs84::kFlattening;
  const double n = f / (2.0 - f);
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  const double big_a = wgs84::kSemiMajor / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
  const std::array<double, 6> alpha = {
      n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 +
          7891.0 * n6 / 37800.0,
      13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 -
          1983433.0 * n6 / 1935360.0,
      61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
      49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
      34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
      212378941.0 * n6 / 319334400.0};

  const double lon0 = (zone * 6.0 - 183.0) * kDegToRad;
  const double phi = p.lat * kDegToRad;
  const double dlam = p.lon * kDegToRad - lon0;
  const double c = 2.0 * std::sqrt(n) / (1.0 + n);
  const double t = std::sinh(std::atanh(std::sin(phi)) - c * std::atanh(c * std::sin(phi)));
  const double xi_p = std::atan2(t, std::cos(dlam));
  const double eta_p = std::atanh(std::sin(dlam) / std::sqrt(1.0 + t * t));

  double xi = xi_p;
  double eta = eta_p;
  for (int j = 1; j <= 6; ++j) {
    xi += alpha[j - 1] * std::sin(2.0 * j * xi_p) * std::cosh(2.0 * j * eta_p);
    eta += alpha[j - 1] * std::cos(2.0 * j * xi_p) * std::sinh(2.0 * j * eta_p);
  }

  UtmPoint out;
  out.zone = zone;
  out.hemisphere = hemisphere;
  out.easting = 500000.0 + k0 * big_a * eta;
  out.northing = k0 * big_a * xi + (hemisphere == Hemisphere::South ? 10000000.0 : 0.0);
  return out;
}

}  // namespace satdepth
