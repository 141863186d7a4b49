#include "satdepth/rpc.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>

namespace satdepth {

void validate(const RpcModel& cam) {
  if (!(cam.line_scale > 0 && cam.samp_scale > 0 && cam.lat_scale > 0 && cam.lon_scale > 0 &&
        cam.height_scale > 0))
    throw DomainError("RPC scales must be strictly positive");
  if (cam.line_den.isZero(0.0) || cam.samp_den.isZero(0.0))
    throw DomainError("RPC denominator polynomial is identically zero");
}

namespace {

// d(rho)/d(P), d(rho)/d(L), d(rho)/d(H) as three 20-vectors.
struct TermGradients {
  Eigen::Matrix<double, 20, 1> dp, dl, dh;
};

TermGradients rpc_term_gradients(double p, double l, double h) {
  TermGradients g;
  g.dp << 0, 0, 1, 0, l, 0, h, 0, 2 * p, 0, l * h, 0, 2 * l * p, 0, l * l, 3 * p * p, h * h, 0,
      2 * p * h, 0;
  g.dl << 0, 1, 0, 0, p, h, 0, 2 * l, 0, 0, p * h, 3 * l * l, p * p, h * h, 2 * l * p, 0, 0,
      2 * l * h, 0, 0;
  g.dh << 0, 0, 0, 1, 0, l, p, 0, 0, 2 * h, p * l, 0, 0, 2 * l * h, 0, 0, 2 * p * h, l * l, p * p,
      3 * h * h;
  return g;
}

}  // namespace

Eigen::Matrix<double, 2, 3> jacobian(const RpcModel& cam, const GeoPoint& x) {
  const double p = (x.lat - cam.lat_off) / cam.lat_scale;
  const double l = (x.lon - cam.lon_off) / cam.lon_scale;
  const double h = (x.h - cam.height_off) / cam.height_scale;
  const auto t = rpc_terms(p, l, h);
  const auto g = rpc_term_gradients(p, l, h);

  const auto ratio_gradient = [&](const RpcModel::Coeffs& num, const RpcModel::Coeffs& den) {
    const double n = num.dot(t);
    const double d = den.dot(t);
    if (!(std::abs(d) > kDenominatorGuard)) throw DenominatorError("RPC denominator vanishes");
    const double d2 = d * d;
    Eigen::RowVector3d out;
    out << (num.dot(g.dp) * d - n * den.dot(g.dp)) / d2, (num.dot(g.dl) * d - n * den.dot(g.dl)) / d2,
        (num.dot(g.dh) * d - n * den.dot(g.dh)) / d2;
    return out;
  };

  Eigen::Matrix<double, 2, 3> j;
  j.row(0) = ratio_gradient(cam.line_num, cam.line_den) * cam.line_scale;
  j.row(1) = ratio_gradient(cam.samp_num, cam.samp_den) * cam.samp_scale;
  j.col(0) /= cam.lat_scale;
  j.col(1) /= cam.lon_scale;
  j.col(2) /= cam.height_scale;
  return j;
}

BackprojectResult backproject_detailed(const RpcModel& cam, const PixelPoint& x, double h,
                                       const BackprojectOptions& opts) {
  const double rn = (x.row - cam.line_off) / cam.line_scale;
  const double cn = (x.col - cam.samp_off) / cam.samp_scale;
  const double hn = (h - cam.height_off) / cam.height_scale;
  const double lim = 1.0 + opts.bounds_expansion;
  if (!(std::abs(rn) <= lim && std::abs(cn) <= lim))
    throw DomainError("backproject: pixel (" + std::to_string(x.row) + ", " + std::to_string(x.col) +
                      ") outside the expanded image bounds");
  if (!(std::abs(hn) <= 2.0))
    throw DomainError("backproject: height " + std::to_string(h) + " outside HEIGHT_OFF +- 2*HEIGHT_SCALE");

  // Unknowns and residuals both in normalized units.
  const auto residual = [&](const Eigen::Vector2d& pl) {
    const Eigen::Vector2d rc =
        project<double>(cam, Eigen::Vector3d(pl(0) * cam.lat_scale + cam.lat_off,
                                             pl(1) * cam.lon_scale + cam.lon_off, h));
    return Eigen::Vector2d((rc(0) - x.row) / cam.line_scale, (rc(1) - x.col) / cam.samp_scale);
  };

  Eigen::Vector2d pl = Eigen::Vector2d::Zero();
  Eigen::Vector2d res = residual(pl);
  double cost = res.squaredNorm();
  int steps = 0;
  bool converged = false;

  for (int it = 0; it < opts.max_iter; ++it) {
    if (cost < 1e-28) {
      converged = true;
      break;
    }
    const GeoPoint at{pl(0) * cam.lat_scale + cam.lat_off, pl(1) * cam.lon_scale + cam.lon_off, h};
    const Eigen::Matrix<double, 2, 3> j = jacobian(cam, at);
    Eigen::Matrix2d jn;
    jn << j(0, 0) * cam.lat_scale / cam.line_scale, j(0, 1) * cam.lon_scale / cam.line_scale,
        j(1, 0) * cam.lat_scale / cam.samp_scale, j(1, 1) * cam.lon_scale / cam.samp_scale;
    const double det = jn.determinant();
    if (!(std::abs(det) > 1e-14 * jn.cwiseAbs().maxCoeff() * jn.cwiseAbs().maxCoeff()))
      throw DegenerateError("backproject: singular lat/lon sub-Jacobian");
    const Eigen::Vector2d step = -jn.inverse() * res;

    // Halving line search on the squared residual.
    double t = 1.0;
    Eigen::Vector2d trial = pl + step;
    Eigen::Vector2d trial_res = residual(trial);
    for (int k = 0; k < 30 && trial_res.squaredNorm() > cost; ++k) {
      t *= 0.5;
      trial = pl + t * step;
      trial_res = residual(trial);
    }
    pl = trial;
    res = trial_res;
    cost = res.squaredNorm();
    ++steps;
    if ((t * step).norm() < opts.tol) {
      converged = true;
      break;
    }
  }
  if (!converged && cost < 1e-28) converged = true;
  if (!converged)
    throw ConvergenceError("backproject did not converge in " + std::to_string(opts.max_iter) +
                           " iterations");

  BackprojectResult out;
  out.point = {pl(0) * cam.lat_scale + cam.lat_off, pl(1) * cam.lon_scale + cam.lon_off, h};
  out.iterations = steps;
  out.residual_px = std::hypot(res(0) * cam.line_scale, res(1) * cam.samp_scale);
  return out;
}

AffineCamera AffineCamera::premultiply(const Eigen::Matrix3d& h) const {
  // h acts on (col, row, 1); convert to the (row, col) layout of the camera.
  Eigen::Matrix2d rot;
  rot << h(1, 1), h(1, 0), h(0, 1), h(0, 0);
  const Eigen::Vector2d shift(h(1, 2), h(0, 2));
  return AffineCamera(rot * linear_, anchor_, rot * anchor_pixel_ + shift);
}

GeoPoint backproject(const AffineCamera& cam, const PixelPoint& x, double h) {
  const Eigen::Matrix2d a = cam.linear().leftCols<2>();
  if (!(std::abs(a.determinant()) > 1e-14 * a.cwiseAbs().maxCoeff() * a.cwiseAbs().maxCoeff()))
    throw DegenerateError("backproject: singular affine lat/lon block");
  const Eigen::Vector2d rhs =
      x.vec() - cam.anchor_pixel() - cam.linear().col(2) * (h - cam.anchor().h);
  const Eigen::Vector2d d = a.partialPivLu().solve(rhs);
  return {cam.anchor().lat + d(0), cam.anchor().lon + d(1), h};
}

AffineCamera affine_approx(const RpcModel& cam, const GeoPoint& anchor) {
  const PixelPoint x0 = project(cam, anchor);
  return AffineCamera(jacobian(cam, anchor), anchor, x0.vec());
}

AffineFundamental normalized(const AffineFundamental& f) {
  Eigen::Matrix<double, 5, 1> v = f.params();
  if (std::hypot(v(0), v(1)) == 0.0 || std::hypot(v(2), v(3)) == 0.0)
    throw DegenerateError("affine F has a vanishing (a,b) or (c,d) block");
  v /= v.norm();
  for (int i = 0; i < 5; ++i) {
    if (v(i) != 0.0) {
      if (v(i) < 0) v = -v;
      break;
    }
  }
  return AffineFundamental::from_params(v);
}

AffineFundamental affine_fundamental(const AffineCamera& cam_i, const AffineCamera& cam_j) {
  // Stack both cameras in (col, row) order around a shared reference point:
  // u = A * (X - X_ref) + t. The left null vector n of A gives
  // n^T (u - t) = 0, i.e. the epipolar relation.
  const GeoPoint ref = cam_i.anchor();
  Eigen::Matrix<double, 4, 3> a;
  a.row(0) = cam_i.linear().row(1);
  a.row(1) = cam_i.linear().row(0);
  a.row(2) = cam_j.linear().row(1);
  a.row(3) = cam_j.linear().row(0);
  const PixelPoint pi = cam_i.project(ref);
  const PixelPoint pj = cam_j.project(ref);
  const Eigen::Vector4d t(pi.col, pi.row, pj.col, pj.row);

  // Column scaling leaves the left null space unchanged.
  Eigen::Matrix<double, 4, 3> scaled = a;
  for (int c = 0; c < 3; ++c) {
    const double n = scaled.col(c).norm();
    if (n == 0.0) throw DegenerateError("affine camera pair has a null world direction");
    scaled.col(c) /= n;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 3>> svd(scaled, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  if (!(s(2) > 1e-10 * s(0)))
    throw DegenerateError("cameras are coincident; affine F undefined");
  const Eigen::Vector4d n = svd.matrixU().col(3);

  AffineFundamental f{n(0), n(1), n(2), n(3), -n.dot(t)};
  return normalized(f);
}

}  // namespace satdepth
