#include "satdepth/correspondence.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace satdepth {

namespace {
constexpr double kEdgeSlack = 1e-6;
}  // namespace

std::vector<Correspondence> extract_gt_matches(const SatDepthMap& map_i, const Projector& cam_j,
                                               const SatDepthMap& map_j, int stride, double delta3d) {
  if (stride < 1) throw DomainError("extract_gt_matches: stride must be >= 1");
  if (!(delta3d >= 0.0)) throw DomainError("extract_gt_matches: delta3d must be non-negative");
  std::vector<Correspondence> out;
  for (int r = 0; r < map_i.height(); r += stride) {
    for (int c = 0; c < map_i.width(); c += stride) {
      if (!map_i.valid(r, c)) continue;
      const GeoPoint xw = map_i.at(r, c);
      PixelPoint xj;
      try {
        xj = cam_j(xw);
      } catch (const DenominatorError&) {
        continue;
      }
      if (!(std::abs(xj.row) < 1e9 && std::abs(xj.col) < 1e9)) continue;
      // Match records carry non-negative coordinates; [-0.5, 0) would round onto
      // pixel 0. Round-off below kEdgeSlack is clamped instead.
      if (xj.row < -kEdgeSlack || xj.col < -kEdgeSlack) continue;
      xj.row = std::max(xj.row, 0.0);
      xj.col = std::max(xj.col, 0.0);
      const long rj = std::lround(xj.row);
      const long cj = std::lround(xj.col);
      if (!map_j.contains(int(rj), int(cj)) || !map_j.valid(int(rj), int(cj))) continue;
      const double d = (geo_to_ecef(xw) - geo_to_ecef(map_j.at(int(rj), int(cj)))).norm();
      if (d < delta3d) out.push_back({PixelPoint{double(r), double(c)}, xj, xw, d});
    }
  }
  return out;
}

Eigen::Matrix3d translation(double dcol, double drow) {
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 2) = dcol;
  t(1, 2) = drow;
  return t;
}

Eigen::Matrix3d rotation_about(double theta, const Eigen::Vector2d& pivot) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  const double c = std::cos(theta), s = std::sin(theta);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return translation(pivot.x(), pivot.y()) * r * translation(-pivot.x(), -pivot.y());
}

AffineCamera local_affine(const Camera& cam, const GeoPoint& x) {
  if (const auto* rpc = std::get_if<RpcModel>(&cam)) return affine_approx(*rpc, x);
  const auto& aff = std::get<AffineCamera>(cam);
  return AffineCamera(aff.linear(), x, aff.project(x).vec());
}

namespace {

void check_source(const PatchSource& src) {
  if (!src.image || !src.map) throw DomainError("patch source is missing its image or map");
  if (src.image->rows() != src.map->height() || src.image->cols() != src.map->width())
    throw DomainError("patch source image and map differ in shape");
}

bool window_fits(const PatchSource& src, const PixelPoint& center, int p) {
  if (!(std::abs(center.row) < 1e9 && std::abs(center.col) < 1e9)) return false;
  const long r0 = std::lround(center.row) - p / 2;
  const long c0 = std::lround(center.col) - p / 2;
  return r0 >= 0 && c0 >= 0 && r0 + p <= src.image->rows() && c0 + p <= src.image->cols();
}

void check_patch_size(int p) {
  if (p < 2 || p % 2) throw DomainError("patch size must be even and >= 2");
}

GeoPoint dsm_point(const RasterF64& dsm, int r, int c) {
  const LatLon ll = pixel_to_geo(dsm.gt, r, c);
  return {ll.lat, ll.lon, dsm.values(r, c)};
}

// Builds both halves when both windows fit; false otherwise.
bool try_pair(const PatchSource& src_i, const PatchSource& src_j, const GeoPoint& x, int p, PatchPair* out) {
  PixelPoint ci, cj;
  try {
    ci = project(src_i.cam, x);
    cj = project(src_j.cam, x);
  } catch (const DenominatorError&) {
    return false;
  }
  if (!window_fits(src_i, ci, p) || !window_fits(src_j, cj, p)) return false;
  out->i = crop_patch(src_i, x, ci, p);
  out->j = crop_patch(src_j, x, cj, p);
  out->anchor = x;
  return true;
}

}  // namespace

PatchHalf crop_patch(const PatchSource& src, const GeoPoint& anchor, const PixelPoint& center, int p) {
  check_source(src);
  check_patch_size(p);
  if (!window_fits(src, center, p)) throw OutOfBoundsError("patch window leaves the image");
  PatchHalf h;
  h.row0 = int(std::lround(center.row)) - p / 2;
  h.col0 = int(std::lround(center.col)) - p / 2;
  h.image = src.image->block(h.row0, h.col0, p, p);
  h.map.lat = src.map->lat.block(h.row0, h.col0, p, p);
  h.map.lon = src.map->lon.block(h.row0, h.col0, p, p);
  h.map.ht = src.map->ht.block(h.row0, h.col0, p, p);
  h.to_patch = translation(-h.col0, -h.row0);
  h.cam = local_affine(src.cam, anchor).premultiply(h.to_patch);
  return h;
}

PatchPair extract_patch_pair_train(const RasterF64& dsm, const PatchSource& src_i, const PatchSource& src_j, int p,
                                   std::mt19937_64& rng, int max_tries) {
  check_source(src_i);
  check_source(src_j);
  check_patch_size(p);
  std::vector<int> cells;
  for (int r = 0; r < dsm.height(); ++r)
    for (int c = 0; c < dsm.width(); ++c)
      if (dsm.valid(r, c)) cells.push_back(r * dsm.width() + c);
  if (cells.empty()) throw DomainError("extract_patch_pair_train: DSM has no valid cell");
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  for (int t = 0; t < max_tries; ++t) {
    const int k = cells[pick(rng)];
    PatchPair pp;
    if (try_pair(src_i, src_j, dsm_point(dsm, k / dsm.width(), k % dsm.width()), p, &pp)) return pp;
  }
  throw DomainError("extract_patch_pair_train: no valid sample after " + std::to_string(max_tries) + " tries");
}

std::vector<PatchPair> extract_patch_grid_test(const RasterF64& dsm, const PatchSource& src_i,
                                               const PatchSource& src_j, int p, int stride) {
  check_source(src_i);
  check_source(src_j);
  check_patch_size(p);
  if (stride < 1) throw DomainError("extract_patch_grid_test: stride must be >= 1");
  // Center of the k-th strip of `stride` cells, the last strip possibly short.
  const auto centers = [stride](int extent) {
    std::vector<int> v;
    for (int k = 0; k * stride < extent; ++k) v.push_back(k * stride + std::min(stride, extent - k * stride) / 2);
    return v;
  };
  std::vector<PatchPair> out;
  for (int r : centers(dsm.height())) {
    for (int c : centers(dsm.width())) {
      if (!dsm.valid(r, c)) continue;
      PatchPair pp;
      if (try_pair(src_i, src_j, dsm_point(dsm, r, c), p, &pp)) out.push_back(std::move(pp));
    }
  }
  return out;
}

RotatedPatch rotate_augment(const Image& img, const SatDepthMap& map, const AffineCamera& cam,
                            const PixelPoint& center, int p, double theta_deg) {
  check_patch_size(p);
  if (img.rows() != map.height() || img.cols() != map.width())
    throw DomainError("rotate_augment: image and map differ in shape");
  if (!(std::abs(center.row) < 1e9 && std::abs(center.col) < 1e9))
    throw OutOfBoundsError("rotate_augment: center is not finite");
  const double theta = theta_deg * kDegToRad;
  const double cs = std::abs(std::cos(theta)), sn = std::abs(std::sin(theta));
  // Odd bbox centered on the rounded center pixel, one pixel of slack for bilinear.
  const int e = int(std::ceil(0.5 * p * (cs + sn) - 1e-9)) + 1;
  const int cr = int(std::lround(center.row)), cc = int(std::lround(center.col));
  const int n = 2 * e + 1;
  if (cr - e < 0 || cc - e < 0 || cr + e >= img.rows() || cc + e >= img.cols())
    throw OutOfBoundsError("rotate_augment: rotated window's bounding box leaves the image");

  RotatedPatch out;
  out.bbox_size = n;
  out.chain.t1 = translation(-(cc - e), -(cr - e));
  out.chain.h_rot = rotation_about(theta, Eigen::Vector2d(e, e));
  out.chain.t2 = translation(-(e - p / 2), -(e - p / 2));

  const Image crop = img.block(cr - e, cc - e, n, n);
  const Eigen::Matrix3d back = (out.chain.t2 * out.chain.h_rot).inverse();

  PatchHalf& h = out.half;
  h.image = Image::Zero(p, p);
  h.map = SatDepthMap(p, p);
  h.row0 = cr - e;
  h.col0 = cc - e;
  h.theta_deg = theta_deg;
  h.to_patch = out.chain.composite();
  h.cam = cam.premultiply(h.to_patch);

  for (int v = 0; v < p; ++v) {
    for (int u = 0; u < p; ++u) {
      const Eigen::Vector3d s = back * Eigen::Vector3d(u, v, 1.0);
      const double sc = std::clamp(s.x(), 0.0, double(n - 1)), sr = std::clamp(s.y(), 0.0, double(n - 1));
      const int c0 = std::min(int(std::floor(sc)), n - 2), r0 = std::min(int(std::floor(sr)), n - 2);
      const double fc = sc - c0, fr = sr - r0;
      h.image(v, u) = float((1 - fr) * ((1 - fc) * crop(r0, c0) + fc * crop(r0, c0 + 1)) +
                            fr * ((1 - fc) * crop(r0 + 1, c0) + fc * crop(r0 + 1, c0 + 1)));
      const int nr = cr - e + int(std::lround(s.y())), nc = cc - e + int(std::lround(s.x()));
      if (map.contains(nr, nc) && map.valid(nr, nc)) h.map.set(v, u, map.at(nr, nc));
    }
  }
  return out;
}

}  // namespace satdepth
