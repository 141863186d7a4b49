#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "satdepth/correspondence.hpp"
#include "satdepth/metrics.hpp"
#include "support/scenes.hpp"

using namespace satdepth;
using satdepth::testing::reference_matches;
using satdepth::testing::stereo_scene;

namespace {

const GeoPoint kCenter{30.3322, -81.6557, 0.0};

// Flat scene at height h under a rotated view, with its texture.
struct FlatView {
  AffineCamera cam;
  SatDepthMap map;
  Image image;
};

FlatView flat_view(double roll_deg, double h = 5.0, int size = 200, double gsd = 0.5) {
  synth::ViewConfig v;
  v.gsd_m = gsd;
  v.roll_deg = roll_deg;
  v.parallax_px_per_m = 0.7;
  v.parallax_dir_deg = 30;
  v.anchor_pixel = {size / 2.0, size / 2.0};
  FlatView f;
  f.cam = synth::view_camera(kCenter, v);
  f.map = synth::flat_map(f.cam, {size, size}, h);
  f.image = synth::textured_image({size, size}, 99);
  return f;
}

// Grid-aligned pair over a flat DSM: pixels land exactly on cells.
struct GridPair {
  RasterF64 dsm;
  AffineCamera cam_i, cam_j;
  SatDepthMap map_i, map_j;
  Image img_i, img_j;
};

GridPair grid_pair(int n = 64, double h = 5.0) {
  synth::BoxWorldConfig wc;
  wc.height = wc.width = n;
  wc.n_boxes = 0;
  wc.ground = h;
  std::mt19937_64 rng(0);
  const auto w = synth::box_world(wc, rng);
  GridPair g;
  g.dsm = w.dsm;
  g.cam_i = synth::grid_camera(w.dsm.gt, 1.0);
  g.cam_j = synth::grid_camera(w.dsm.gt, -1.0);
  DepthifyInputs in;
  in.image = {n, n};
  in.dsm = w.dsm;
  in.dem = w.dem;
  in.cam = g.cam_i;
  g.map_i = depthify_sequential(in);
  in.cam = g.cam_j;
  g.map_j = depthify_sequential(in);
  g.img_i = synth::textured_image({n, n}, 1);
  g.img_j = synth::textured_image({n, n}, 2);
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("matches of a map with itself") {
  const FlatView f = flat_view(12.0, 5.0, 80);
  const auto m = extract_gt_matches(f.map, Camera(f.cam), f.map);
  CHECK(int(m.size()) == f.map.valid_count());
  for (const auto& c : m) {
    CHECK(c.dist3d == 0.0);
    CHECK(std::abs(c.xj.row - c.xi.row) < 1e-6);
    CHECK(std::abs(c.xj.col - c.xi.col) < 1e-6);
  }
  CHECK(extract_gt_matches(f.map, Camera(f.cam), f.map, 1, 0.0).empty());
  CHECK_THROWS_AS(extract_gt_matches(f.map, Camera(f.cam), f.map, 0), DomainError);
}

TEST_CASE("stride samples a sub-grid") {
  const FlatView f = flat_view(0.0, 5.0, 80);
  const auto m = extract_gt_matches(f.map, Camera(f.cam), f.map, 7);
  int expect = 0;
  for (int r = 0; r < 80; r += 7)
    for (int c = 0; c < 80; c += 7) expect += f.map.valid(r, c);
  CHECK(int(m.size()) == expect);
  for (const auto& c : m) {
    CHECK(int(c.xi.row) % 7 == 0);
    CHECK(int(c.xi.col) % 7 == 0);
  }
}

TEST_CASE("stereo matches agree with per-pixel re-evaluation") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto s = stereo_scene(seed);
    for (double delta : {0.25, 1.0, 3.0}) {
      const auto got = extract_gt_matches(s.map_i, Camera(s.cam_j), s.map_j, 1, delta);
      const auto expect = reference_matches(s.map_i, s.cam_j, s.map_j, delta);
      REQUIRE(got.size() == expect.size());
      for (const auto& c : got) {
        const auto it = expect.find({int(c.xi.row), int(c.xi.col)});
        REQUIRE(it != expect.end());
        CHECK(c.dist3d == it->second);
        CHECK(c.dist3d < delta);
      }
    }
    // Occlusion leaves some pixels unmatched.
    CHECK(extract_gt_matches(s.map_i, Camera(s.cam_j), s.map_j).size() < std::size_t(s.map_i.valid_count()));

    // Under the true F every match is within 3 px.
    std::vector<MatchRecord> records;
    for (const auto& c : extract_gt_matches(s.map_i, Camera(s.cam_j), s.map_j)) records.push_back({c.xi, c.xj});
    REQUIRE_FALSE(records.empty());
    CHECK(precision(records, affine_fundamental(s.cam_i, s.cam_j), 3.0) == 100.0);
  }
}

TEST_CASE("acceptance is symmetric on error-free flat maps") {
  const FlatView a = flat_view(10.0, 5.0, 120), b = flat_view(-25.0, 5.0, 120);
  const auto fwd = extract_gt_matches(a.map, Camera(b.cam), b.map);
  REQUIRE(fwd.size() > 1000);
  const auto back = extract_gt_matches(b.map, Camera(a.cam), a.map);
  std::set<std::pair<int, int>> back_px;
  for (const auto& c : back) back_px.insert({int(c.xi.row), int(c.xi.col)});
  int checked = 0;
  for (const auto& c : fwd) {
    const int rj = int(std::lround(c.xj.row)), cj = int(std::lround(c.xj.col));
    // The reverse test exists only when its own projection lands in image a.
    const PixelPoint q = a.cam.project(b.map.at(rj, cj));
    if (q.row < -1e-6 || q.col < -1e-6 || !a.map.contains(int(std::lround(q.row)), int(std::lround(q.col))))
      continue;
    ++checked;
    CHECK(back_px.count({rj, cj}) == 1);
  }
  CHECK(checked > 1000);
}

// ---------------------------------------------------------------------------

TEST_CASE("homography factors") {
  const Eigen::Matrix3d t = translation(3, -4);
  CHECK(t * Eigen::Vector3d(1, 1, 1) == Eigen::Vector3d(4, -3, 1));
  const Eigen::Matrix3d r = rotation_about(M_PI / 2, Eigen::Vector2d(10, 10));
  CHECK((r * Eigen::Vector3d(10, 10, 1) - Eigen::Vector3d(10, 10, 1)).norm() < 1e-12);
  CHECK((r * Eigen::Vector3d(11, 10, 1) - Eigen::Vector3d(10, 11, 1)).norm() < 1e-12);
  CHECK(std::abs(r.topLeftCorner<2, 2>().determinant() - 1.0) < 1e-12);
}

TEST_CASE("training patches") {
  const GridPair g = grid_pair();
  const PatchSource si{&g.img_i, &g.map_i, g.cam_i}, sj{&g.img_j, &g.map_j, g.cam_j};
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const PatchPair pp = extract_patch_pair_train(g.dsm, si, sj, 16, rng);
    for (const PatchHalf* h : {&pp.i, &pp.j}) {
      const PixelPoint c = h->cam.project(pp.anchor);
      CHECK(std::abs(c.row - 8) <= 0.5);
      CHECK(std::abs(c.col - 8) <= 0.5);
      CHECK(h->image.rows() == 16);
      CHECK(h->map.width() == 16);
    }
    CHECK(pp.i.image(3, 4) == g.img_i(pp.i.row0 + 3, pp.i.col0 + 4));
    // Flat scene on the camera grid: every patch match is exact.
    const auto m = extract_gt_matches(pp.i.map, Camera(pp.j.cam), pp.j.map);
    REQUIRE_FALSE(m.empty());
    for (const auto& c : m) CHECK(c.dist3d == 0.0);
  }

  std::mt19937_64 a(9), b(9);
  const PatchPair x = extract_patch_pair_train(g.dsm, si, sj, 16, a), y = extract_patch_pair_train(g.dsm, si, sj, 16, b);
  CHECK(x.i.row0 == y.i.row0);
  CHECK(x.j.col0 == y.j.col0);
  CHECK(x.anchor.lat == y.anchor.lat);

  CHECK_THROWS_AS(extract_patch_pair_train(g.dsm, si, sj, 15, rng), DomainError);
  CHECK_THROWS_AS(extract_patch_pair_train(g.dsm, si, sj, 70, rng, 50), DomainError);
}

TEST_CASE("grid test patches") {
  const GridPair g = grid_pair();
  const PatchSource si{&g.img_i, &g.map_i, g.cam_i}, sj{&g.img_j, &g.map_j, g.cam_j};
  SUBCASE("one stride spanning the AOI") {
    const auto v = extract_patch_grid_test(g.dsm, si, sj, 16, 64);
    REQUIRE(v.size() == 1);
    const LatLon mid = pixel_to_geo(g.dsm.gt, 32, 32);
    CHECK(v[0].anchor.lat == mid.lat);
    CHECK(v[0].anchor.lon == mid.lon);
  }
  SUBCASE("counting") {
    for (int stride : {3, 5, 8, 13}) {
      for (int p : {8, 16, 24}) {
        // A window fits when round(center) - p/2 >= 0 and + p <= 64 in both
        // images. Cell (r, c) at h = 5 is pixel (r, c + 5) in i, (r, c - 5) in j.
        int expect = 0;
        for (int r0 = 0; r0 < 64; r0 += stride)
          for (int c0 = 0; c0 < 64; c0 += stride) {
            const int r = r0 + std::min(stride, 64 - r0) / 2, c = c0 + std::min(stride, 64 - c0) / 2;
            const auto fits = [&](int row, int col) {
              return row - p / 2 >= 0 && row + p / 2 <= 64 && col - p / 2 >= 0 && col + p / 2 <= 64;
            };
            expect += fits(r, c + 5) && fits(r, c - 5);
          }
        const auto v = extract_patch_grid_test(g.dsm, si, sj, p, stride);
        CHECK(int(v.size()) == expect);
        const int n = (64 + stride - 1) / stride;
        CHECK(int(v.size()) <= n * n);
      }
    }
    const auto a = extract_patch_grid_test(g.dsm, si, sj, 16, 5), b = extract_patch_grid_test(g.dsm, si, sj, 16, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK((a[k].i.image == b[k].i.image).all());
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("rotation by zero is a plain crop") {
  const FlatView f = flat_view(15.0);
  const PixelPoint center{100.3, 97.8};
  const RotatedPatch rp = rotate_augment(f.image, f.map, f.cam, center, 32, 0.0);
  const PatchSource src{&f.image, &f.map, f.cam};
  const PatchHalf plain = crop_patch(src, f.cam.anchor(), center, 32);
  CHECK((rp.half.image - plain.image).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(testing::identical(rp.half.map, plain.map));
  CHECK((rp.chain.composite() - translation(-plain.col0, -plain.row0)).norm() < 1e-12);
  CHECK(distance(rp.half.cam.project(f.map.at(110, 90)), PixelPoint{110.0 - plain.row0, 90.0 - plain.col0}) < 1e-6);
}

TEST_CASE("rotated patches transfer through the composed camera") {
  const FlatView f = flat_view(15.0);
  const PixelPoint center{100.3, 97.8};
  const int p = 48;
  for (double theta : {45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0, 360.0}) {
    CAPTURE(theta);
    const RotatedPatch rp = rotate_augment(f.image, f.map, f.cam, center, p, theta);
    const bool quarter = std::fmod(theta, 90.0) == 0.0;
    double worst = 0.0, worst_direct = 0.0;
    int valid = 0;
    const double t = theta * kDegToRad;
    for (int v = 0; v < p; ++v) {
      for (int u = 0; u < p; ++u) {
        if (!rp.half.map.valid(v, u)) continue;
        ++valid;
        const GeoPoint x = rp.half.map.at(v, u);
        const PixelPoint q = rp.half.cam.project(x);
        worst = std::max(worst, distance(q, PixelPoint{double(v), double(u)}));
        // Direct geometry: rotate the source pixel about the rounded center.
        const PixelPoint s = f.cam.project(x);
        const double dc = s.col - std::round(center.col), dr = s.row - std::round(center.row);
        const PixelPoint direct{p / 2.0 + std::sin(t) * dc + std::cos(t) * dr, p / 2.0 + std::cos(t) * dc - std::sin(t) * dr};
        worst_direct = std::max(worst_direct, distance(q, direct));
      }
    }
    CHECK(valid == p * p);
    CHECK(worst < (quarter ? 0.01 : 1.0));
    CHECK(worst_direct < 1.0);
    CHECK(rp.chain.composite().topLeftCorner<2, 2>().determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("quarter turns move pixels exactly") {
  const FlatView f = flat_view(0.0);
  const PixelPoint center{100, 100};
  const int p = 20;
  const RotatedPatch rp = rotate_augment(f.image, f.map, f.cam, center, p, 90.0);
  const PatchHalf plain = crop_patch({&f.image, &f.map, f.cam}, f.cam.anchor(), center, p);
  // Patch (v, u) after +90 deg comes from offset (dc, dr) = (v - p/2, p/2 - u).
  for (int v = 1; v < p; ++v)
    for (int u = 1; u < p; ++u) {
      const int sr = p / 2 + (p / 2 - u), sc = p / 2 + (v - p / 2);
      if (sr >= p || sc >= p) continue;
      CHECK(rp.half.image(v, u) == doctest::Approx(plain.image(sr, sc)).epsilon(1e-5));
      CHECK(rp.half.map.lat(v, u) == plain.map.lat(sr, sc));
    }
}

TEST_CASE("cross-rotation matches stay within two GSD") {
  const double gsd = 0.5;
  const FlatView a = flat_view(10.0, 5.0, 200, gsd), b = flat_view(-20.0, 5.0, 200, gsd);
  // A shared world point seen near the middle of both images.
  const GeoPoint x{kCenter.lat, kCenter.lon, 5.0};
  const int p = 48;
  const PatchHalf pi = crop_patch({&a.image, &a.map, a.cam}, x, a.cam.project(x), p);
  for (double theta : {45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0, 360.0}) {
    CAPTURE(theta);
    const RotatedPatch pj = rotate_augment(b.image, b.map, b.cam, b.cam.project(x), p, theta);
    const auto m = extract_gt_matches(pi.map, Camera(pj.half.cam), pj.half.map, 1, 10 * gsd);
    REQUIRE(m.size() > 500);
    double mean = 0.0;
    for (const auto& c : m) mean += c.dist3d;
    mean /= double(m.size());
    CHECK(mean < 2 * gsd);
  }
}

TEST_CASE("rotation window bounds") {
  const FlatView f = flat_view(0.0, 5.0, 80);
  CHECK_THROWS_AS(rotate_augment(f.image, f.map, f.cam, PixelPoint{20, 40}, 32, 45.0), OutOfBoundsError);
  CHECK_NOTHROW(rotate_augment(f.image, f.map, f.cam, PixelPoint{40, 40}, 32, 45.0));
  CHECK_THROWS_AS(rotate_augment(f.image, f.map, f.cam, PixelPoint{40, 40}, 31, 45.0), DomainError);
}
