#pragma once

// Affine multi-view scenes for bundle adjustment and the dense least-squares
// oracle of its objective.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "satdepth/alignment.hpp"
#include "satdepth/synthetic.hpp"

namespace satdepth::testing {

inline const GeoPoint kAnchor{30.3322, -81.6557, 0.0};

inline AffineCamera random_view(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> roll(-20, 20), par(0.2, 1.5), dir(0, 360);
  synth::ViewConfig v;
  v.gsd_m = 0.5;
  v.roll_deg = roll(rng);
  v.parallax_px_per_m = par(rng);
  v.parallax_dir_deg = dir(rng);
  v.anchor_pixel = {500, 500};
  return synth::view_camera(kAnchor, v);
}

inline std::vector<GeoPoint> random_points(std::mt19937_64& rng, int n) {
  const auto [m_lat, m_lon] = meters_per_degree(kAnchor);
  std::uniform_real_distribution<double> e(-200, 200), h(0, 40);
  std::vector<GeoPoint> out;
  for (int k = 0; k < n; ++k) out.push_back({kAnchor.lat + e(rng) / m_lat, kAnchor.lon + e(rng) / m_lon, h(rng)});
  return out;
}

struct BaScene {
  std::vector<AffineCamera> aff;
  std::vector<Camera> cams;
  std::vector<GeoPoint> world;
  std::vector<Eigen::Vector2d> beta;
  std::vector<TieTrack> tracks;
};

// Every point seen in every image, observed at P_i(X) + beta_i.
inline BaScene ba_scene(std::uint64_t seed, int n_images, int n_tracks, double bias_px) {
  std::mt19937_64 rng(seed);
  BaScene s;
  std::uniform_real_distribution<double> b(-bias_px, bias_px);
  for (int i = 0; i < n_images; ++i) {
    s.aff.push_back(random_view(rng));
    s.cams.push_back(s.aff.back());
    s.beta.emplace_back(b(rng), b(rng));
  }
  s.world = random_points(rng, n_tracks);
  for (const GeoPoint& x : s.world) {
    TieTrack t;
    for (int i = 0; i < n_images; ++i) {
      const Eigen::Vector2d p = s.aff[i].project(x).vec() + s.beta[i];
      t.observations.push_back({i, PixelPoint{p(0), p(1)}});
    }
    s.tracks.push_back(t);
  }
  return s;
}

// Direct dense least squares of the (linear, for affine cameras) BA
// objective. Unknowns: biases, then X - anchor per track.
inline std::vector<Eigen::Vector2d> ridge_oracle(const BaScene& s, double lambda) {
  const int m = int(s.aff.size()), k = int(s.tracks.size());
  const int rows = 2 * m * k + 2 * m, cols = 2 * m + 3 * k;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
  int row = 0;
  for (int t = 0; t < k; ++t) {
    for (const Observation& o : s.tracks[t].observations) {
      const AffineCamera& c = s.aff[o.image];
      a.block<2, 2>(row, 2 * o.image).setIdentity();
      a.block<2, 3>(row, 2 * m + 3 * t) = c.linear();
      y.segment<2>(row) = o.x.vec() - c.anchor_pixel() - c.linear() * (kAnchor.vec() - c.anchor().vec());
      row += 2;
    }
  }
  for (int i = 0; i < m; ++i, row += 2) a.block<2, 2>(row, 2 * i) = std::sqrt(lambda) * Eigen::Matrix2d::Identity();
  const Eigen::VectorXd scale = a.colwise().norm().cwiseInverse();
  const Eigen::VectorXd z = (a * scale.asDiagonal()).colPivHouseholderQr().solve(y);
  const Eigen::VectorXd sol = scale.cwiseProduct(z);
  std::vector<Eigen::Vector2d> out;
  for (int i = 0; i < m; ++i) out.push_back(sol.segment<2>(2 * i));
  return out;
}

}  // namespace satdepth::testing
