#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <string>
#include <variant>

#include "satdepth/error.hpp"
#include "satdepth/geodesy.hpp"

namespace satdepth {

/// Image position. row = line, col = sample. Epipolar algebra uses the
/// homogeneous vector (col, row, 1).
struct PixelPoint {
  double row = 0.0;
  double col = 0.0;

  Eigen::Vector2d vec() const { return {row, col}; }
  Eigen::Vector3d homogeneous() const { return {col, row, 1.0}; }
  bool operator==(const PixelPoint&) const = default;
};

inline double distance(const PixelPoint& a, const PixelPoint& b) {
  return std::hypot(a.row - b.row, a.col - b.col);
}

/// RPC00B rational polynomial camera.
struct RpcModel {
  using Coeffs = Eigen::Matrix<double, 20, 1>;

  Coeffs line_num = Coeffs::Zero();
  Coeffs line_den = Coeffs::Unit(0);
  Coeffs samp_num = Coeffs::Zero();
  Coeffs samp_den = Coeffs::Unit(0);

  double line_off = 0.0, samp_off = 0.0;
  double lat_off = 0.0, lon_off = 0.0, height_off = 0.0;
  double line_scale = 1.0, samp_scale = 1.0;
  double lat_scale = 1.0, lon_scale = 1.0, height_scale = 1.0;

  bool operator==(const RpcModel&) const = default;
};

/// Throws DomainError when scales are non-positive or a denominator is
/// identically zero.
void validate(const RpcModel& cam);

/// The twenty cubic terms in RPC00B order:
/// 1, L, P, H, LP, LH, PH, L^2, P^2, H^2, PLH, L^3, LP^2, LH^2, L^2P, P^3,
/// PH^2, L^2H, P^2H, H^3 with P = normalized lat, L = normalized lon,
/// H = normalized height.
template <typename Scalar>
Eigen::Matrix<Scalar, 20, 1> rpc_terms(const Scalar& p, const Scalar& l, const Scalar& h) {
  Eigen::Matrix<Scalar, 20, 1> t;
  t << Scalar(1), l, p, h, l * p, l * h, p * h, l * l, p * p, h * h, p * l * h, l * l * l, l * p * p,
      l * h * h, l * l * p, p * p * p, p * h * h, l * l * h, p * p * h, h * h * h;
  return t;
}

inline constexpr double kDenominatorGuard = 1e-12;

/// Forward projection of (lat, lon, h) to (row, col), templated on the
/// scalar so it can be evaluated with dual numbers or extended precision.
/// The denominator guard is applied for arithmetic scalars only.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> project(const RpcModel& cam, const Eigen::Matrix<Scalar, 3, 1>& llh) {
  const Scalar p = (llh(0) - Scalar(cam.lat_off)) / Scalar(cam.lat_scale);
  const Scalar l = (llh(1) - Scalar(cam.lon_off)) / Scalar(cam.lon_scale);
  const Scalar h = (llh(2) - Scalar(cam.height_off)) / Scalar(cam.height_scale);
  const auto t = rpc_terms(p, l, h);
  const Scalar ld = cam.line_den.template cast<Scalar>().dot(t);
  const Scalar sd = cam.samp_den.template cast<Scalar>().dot(t);
  if constexpr (std::is_arithmetic_v<Scalar>) {
    if (!(std::abs(ld) > kDenominatorGuard) || !(std::abs(sd) > kDenominatorGuard))
      throw DenominatorError("RPC denominator vanishes at lat=" + std::to_string(double(llh(0))) +
                             " lon=" + std::to_string(double(llh(1))));
  }
  const Scalar rn = cam.line_num.template cast<Scalar>().dot(t) / ld;
  const Scalar cn = cam.samp_num.template cast<Scalar>().dot(t) / sd;
  return {rn * Scalar(cam.line_scale) + Scalar(cam.line_off),
          cn * Scalar(cam.samp_scale) + Scalar(cam.samp_off)};
}

inline PixelPoint project(const RpcModel& cam, const GeoPoint& x) {
  const Eigen::Vector2d rc = project<double>(cam, x.vec());
  return {rc(0), rc(1)};
}

/// Analytic d(row, col)/d(lat, lon, h).
Eigen::Matrix<double, 2, 3> jacobian(const RpcModel& cam, const GeoPoint& x);

struct BackprojectOptions {
  int max_iter = 50;
  /// Convergence on the Gauss-Newton step, in normalized lat/lon units.
  double tol = 1e-8;
  /// Accepted pixel range is the normalized box [-1-e, 1+e]^2.
  double bounds_expansion = 1.0;
};

struct BackprojectResult {
  GeoPoint point;
  int iterations = 0;
  double residual_px = 0.0;
};

/// Solves argmin_{lat,lon} |x - P(lat, lon, h)|^2 by damped Gauss-Newton
/// started at the model offsets.
BackprojectResult backproject_detailed(const RpcModel& cam, const PixelPoint& x, double h,
                                       const BackprojectOptions& opts = {});

inline GeoPoint backproject(const RpcModel& cam, const PixelPoint& x, double h,
                            const BackprojectOptions& opts = {}) {
  return backproject_detailed(cam, x, h, opts).point;
}

/// First-order expansion of a camera about an anchor world point. Stored
/// relative to the anchor so evaluation at the anchor is exact; the
/// absolute-form bias is available through bias().
class AffineCamera {
public:
  using Linear = Eigen::Matrix<double, 2, 3>;

  AffineCamera() = default;
  AffineCamera(const Linear& linear, const GeoPoint& anchor, const Eigen::Vector2d& anchor_pixel)
      : linear_(linear), anchor_(anchor), anchor_pixel_(anchor_pixel) {}

  /// Rows d(row, col), columns d(lat, lon, h).
  const Linear& linear() const { return linear_; }
  const GeoPoint& anchor() const { return anchor_; }
  /// (row, col) of the anchor.
  const Eigen::Vector2d& anchor_pixel() const { return anchor_pixel_; }
  /// b = P(X0) - linear * X0.
  Eigen::Vector2d bias() const { return anchor_pixel_ - linear_ * anchor_.vec(); }

  PixelPoint project(const GeoPoint& x) const {
    const Eigen::Vector2d rc = anchor_pixel_ + linear_ * (x.vec() - anchor_.vec());
    return {rc(0), rc(1)};
  }

  /// Applies a planar motion acting on homogeneous (col, row, 1) pixels,
  /// returning the camera H * this.
  AffineCamera premultiply(const Eigen::Matrix3d& h) const;

private:
  Linear linear_ = Linear::Zero();
  GeoPoint anchor_;
  Eigen::Vector2d anchor_pixel_ = Eigen::Vector2d::Zero();
};

AffineCamera affine_approx(const RpcModel& cam, const GeoPoint& anchor);

inline PixelPoint affine_project(const AffineCamera& cam, const GeoPoint& x) { return cam.project(x); }

/// Exact inverse of an affine camera at fixed height.
GeoPoint backproject(const AffineCamera& cam, const PixelPoint& x, double h);

/// Affine fundamental matrix [[0,0,a],[0,0,b],[c,d,e]] with
/// x_i^T F x_j = 0, x = (col, row, 1). Stored with unit norm and the first
/// nonzero entry positive.
struct AffineFundamental {
  double a = 0, b = 0, c = 0, d = 0, e = 0;

  Eigen::Matrix<double, 5, 1> params() const {
    Eigen::Matrix<double, 5, 1> v;
    v << a, b, c, d, e;
    return v;
  }
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d f;
    f << 0, 0, a, 0, 0, b, c, d, e;
    return f;
  }
  /// Epipolar residual x_i^T F x_j.
  double residual(const PixelPoint& xi, const PixelPoint& xj) const {
    return a * xi.col + b * xi.row + c * xj.col + d * xj.row + e;
  }
  /// The same relation with the images exchanged (a<->c, b<->d).
  AffineFundamental swapped() const { return {c, d, a, b, e}; }

  static AffineFundamental from_params(const Eigen::Matrix<double, 5, 1>& v) {
    return {v(0), v(1), v(2), v(3), v(4)};
  }
};

/// Unit norm, first nonzero entry positive. Throws DegenerateError when
/// (a,b) or (c,d) vanish.
AffineFundamental normalized(const AffineFundamental& f);

/// Ground-truth affine F between two affine cameras.
AffineFundamental affine_fundamental(const AffineCamera& cam_i, const AffineCamera& cam_j);

/// Either camera kind, for operations that only need forward projection.
using Camera = std::variant<RpcModel, AffineCamera>;

inline PixelPoint project(const Camera& cam, const GeoPoint& x) {
  return std::visit(
      [&](const auto& c) -> PixelPoint {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, RpcModel>)
          return satdepth::project(c, x);
        else
          return c.project(x);
      },
      cam);
}

inline GeoPoint backproject(const Camera& cam, const PixelPoint& x, double h) {
  return std::visit([&](const auto& c) { return satdepth::backproject(c, x, h); }, cam);
}

}  // namespace satdepth
