#include "satdepth/alignment.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "satdepth/metrics.hpp"

namespace satdepth {

Eigen::Matrix<double, 2, 3> camera_jacobian(const Camera& cam, const GeoPoint& x) {
  return std::visit(
      [&](const auto& c) -> Eigen::Matrix<double, 2, 3> {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, RpcModel>)
          return jacobian(c, x);
        else
          return c.linear();
      },
      cam);
}

// ---------------------------------------------------------------------------
// Affine F

AffineFundamental estimate_affine_f(const std::vector<MatchRecord>& matches) {
  const Eigen::Index n = static_cast<Eigen::Index>(matches.size());
  if (n < 4) throw DomainError("estimate_affine_f: need at least 4 matches");
  Eigen::Matrix<double, Eigen::Dynamic, 4> u(n, 4);
  for (Eigen::Index k = 0; k < n; ++k) {
    const MatchRecord& m = matches[k];
    u.row(k) << m.xi.col, m.xi.row, m.xj.col, m.xj.row;
  }
  const Eigen::RowVector4d mean = u.colwise().mean();
  u.rowwise() -= mean;
  const double scale = std::sqrt(u.squaredNorm() / double(n));
  if (!(scale > 0.0)) throw DegenerateError("estimate_affine_f: all matches coincide");
  u /= scale;

  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 4>> svd(u, Eigen::ComputeFullV);
  const Eigen::Vector4d s = svd.singularValues();
  if (!(s(2) > 1e-9 * s(0))) throw DegenerateError("estimate_affine_f: rank-deficient configuration");
  const Eigen::Vector4d v = svd.matrixV().col(3);
  return normalized(AffineFundamental{v(0), v(1), v(2), v(3), -v.dot(mean.transpose())});
}

RansacResult ransac_affine_f(const std::vector<MatchRecord>& input, const RansacConfig& cfg) {
  const int n = static_cast<int>(input.size());
  if (n < 4) throw DomainError("ransac_affine_f: need at least 4 matches");
  if (!(cfg.threshold_px > 0.0) || !(cfg.confidence > 0.0 && cfg.confidence < 1.0) || cfg.max_iter < 1)
    throw DomainError("ransac_affine_f: invalid configuration");

  // Canonical order so sampling does not depend on input order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto key = [&](int k) {
    const MatchRecord& m = input[k];
    return std::make_tuple(m.xi.row, m.xi.col, m.xj.row, m.xj.col);
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  std::vector<MatchRecord> matches(n);
  for (int k = 0; k < n; ++k) matches[k] = input[order[k]];

  const auto inliers_of = [&](const AffineFundamental& f) {
    std::vector<int> in;
    for (int k = 0; k < n; ++k)
      if (symmetric_epipolar_distance(f, matches[k].xi, matches[k].xj) < cfg.threshold_px) in.push_back(k);
    return in;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<int> best;
  int best_support = -1;
  long long needed = cfg.max_iter;
  int it = 0;
  for (; it < needed && it < cfg.max_iter; ++it) {
    std::array<int, 4> idx{};
    for (int s = 0; s < 4; ++s) {
      int k;
      do {
        k = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + s, k) != idx.begin() + s);
      idx[s] = k;
    }
    AffineFundamental f;
    std::vector<int> in;
    try {
      f = estimate_affine_f({matches[idx[0]], matches[idx[1]], matches[idx[2]], matches[idx[3]]});
      in = inliers_of(f);
    } catch (const DegenerateError&) {
      continue;
    }
    int in_sample = 0;
    for (int k : idx) in_sample += std::binary_search(in.begin(), in.end(), k) ? 1 : 0;
    const int support = static_cast<int>(in.size()) - in_sample;
    if (support > best_support) {
      best_support = support;
      best = std::move(in);
      const double w = double(best.size()) / double(n);
      const double miss = 1.0 - std::pow(w, 4);
      if (miss <= 0.0)
        needed = 0;
      else
        needed = std::min<long long>(cfg.max_iter,
                                     static_cast<long long>(std::ceil(std::log(1.0 - cfg.confidence) / std::log(miss))));
    }
  }
  if (best_support < cfg.min_support)
    throw ConvergenceError("ransac_affine_f: no model with " + std::to_string(cfg.min_support) +
                           " inliers beyond its sample");

  std::vector<MatchRecord> fit;
  for (int k : best) fit.push_back(matches[k]);
  RansacResult out;
  out.iterations = it;
  out.f = estimate_affine_f(fit);
  std::vector<int> final_in = inliers_of(out.f);
  if (final_in.size() < 4) {
    final_in = best;
  }
  for (int k : final_in) out.inliers.push_back(order[k]);
  std::sort(out.inliers.begin(), out.inliers.end());
  return out;
}

// ---------------------------------------------------------------------------
// Tracks

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<TieTrack> build_tracks(const PairMatches& pairs, double merge_px, int* dropped_conflicts) {
  std::vector<Observation> raw;
  std::vector<std::pair<int, int>> links;
  for (const auto& [ij, matches] : pairs) {
    if (ij.first == ij.second) throw DomainError("build_tracks: pair matches an image with itself");
    for (const MatchRecord& m : matches) {
      const int a = static_cast<int>(raw.size());
      raw.push_back({ij.first, m.xi});
      raw.push_back({ij.second, m.xj});
      links.emplace_back(a, a + 1);
    }
  }
  const int n = static_cast<int>(raw.size());
  UnionFind same_pixel(n);  // within-image merges only
  {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::tie(raw[a].image, raw[a].x.row, a) < std::tie(raw[b].image, raw[b].x.row, b);
    });
    for (int s = 0; s < n; ++s) {
      const Observation& o = raw[order[s]];
      for (int t = s + 1; t < n; ++t) {
        const Observation& p = raw[order[t]];
        if (p.image != o.image || p.x.row - o.x.row > merge_px) break;
        if (distance(o.x, p.x) <= merge_px) same_pixel.unite(order[s], order[t]);
      }
    }
  }
  UnionFind track(n);
  for (int k = 0; k < n; ++k) track.unite(k, same_pixel.find(k));
  for (const auto& [a, b] : links) track.unite(a, b);

  // Group by track root; roots are minimal members, so map order is input order.
  std::map<int, std::map<int, std::set<int>>> groups;  // root -> image -> pixel clusters
  std::map<int, std::map<int, std::vector<int>>> members;
  for (int k = 0; k < n; ++k) {
    const int root = track.find(k);
    groups[root][raw[k].image].insert(same_pixel.find(k));
    members[root][raw[k].image].push_back(k);
  }

  std::vector<TieTrack> out;
  int dropped = 0;
  for (const auto& [root, per_image] : groups) {
    bool conflict = false;
    for (const auto& [img, clusters] : per_image) conflict |= clusters.size() > 1;
    if (conflict || per_image.size() < 2) {
      dropped += conflict ? 1 : 0;
      continue;
    }
    TieTrack t;
    for (const auto& [img, ids] : members.at(root)) {
      PixelPoint mean{0, 0};
      for (int k : ids) {
        mean.row += raw[k].x.row;
        mean.col += raw[k].x.col;
      }
      mean.row /= double(ids.size());
      mean.col /= double(ids.size());
      t.observations.push_back({img, mean});
    }
    out.push_back(std::move(t));
  }
  if (dropped_conflicts) *dropped_conflicts = dropped;
  return out;
}

// ---------------------------------------------------------------------------
// Triangulation

namespace {

double reference_height(const Camera& cam) {
  return std::visit(
      [](const auto& c) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, RpcModel>)
          return c.height_off;
        else
          return c.anchor().h;
      },
      cam);
}

GeoPoint camera_center_guess(const Camera& cam) {
  return std::visit(
      [](const auto& c) -> GeoPoint {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, RpcModel>)
          return {c.lat_off, c.lon_off, c.height_off};
        else
          return c.anchor();
      },
      cam);
}

double track_cost(const std::vector<Camera>& cams, const std::vector<Eigen::Vector2d>& biases,
                  const std::vector<Observation>& obs, const GeoPoint& x) {
  double cost = 0.0;
  for (const Observation& o : obs) {
    const PixelPoint p = project(cams[o.image], x);
    const Eigen::Vector2d b = biases.empty() ? Eigen::Vector2d::Zero() : biases[o.image];
    cost += (o.x.vec() - p.vec() - b).squaredNorm();
  }
  return cost;
}

}  // namespace

TriangulatedPoint triangulate_track(const std::vector<Camera>& cams, const std::vector<Eigen::Vector2d>& biases,
                                    const std::vector<Observation>& obs) {
  if (obs.size() < 2) throw DomainError("triangulate: need at least two observations");
  for (const Observation& o : obs)
    if (o.image < 0 || o.image >= static_cast<int>(cams.size()))
      throw DomainError("triangulate: observation references unknown image");
  const auto bias = [&](int i) -> Eigen::Vector2d { return biases.empty() ? Eigen::Vector2d::Zero() : biases[i]; };

  GeoPoint x = camera_center_guess(cams[obs[0].image]);
  try {
    const Eigen::Vector2d px = obs[0].x.vec() - bias(obs[0].image);
    x = backproject(cams[obs[0].image], PixelPoint{px(0), px(1)}, reference_height(cams[obs[0].image]));
  } catch (const Error&) {
  }

  double cost = track_cost(cams, biases, obs, x);
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    Eigen::MatrixXd stacked(2 * obs.size(), 3);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const Observation& o = obs[k];
      const Eigen::Matrix<double, 2, 3> j = camera_jacobian(cams[o.image], x);
      const Eigen::Vector2d r = o.x.vec() - project(cams[o.image], x).vec() - bias(o.image);
      h += j.transpose() * j;
      g += j.transpose() * r;
      stacked.middleRows<2>(2 * k) = j;
    }
    if (it == 0) {
      Eigen::MatrixXd scaled = stacked;
      for (int c = 0; c < 3; ++c) {
        const double nrm = scaled.col(c).norm();
        if (nrm == 0.0) throw DegenerateError("triangulate: camera insensitive to a world axis");
        scaled.col(c) /= nrm;
      }
      const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(scaled).singularValues();
      if (!(sv(2) > 1e-6 * sv(0))) throw DegenerateError("triangulate: rays are near-parallel");
    }
    const Eigen::Vector3d d = h.ldlt().solve(g);
    if (!d.allFinite()) throw DegenerateError("triangulate: singular normal equations");

    double t = 1.0;
    GeoPoint trial = GeoPoint::from_vec(x.vec() + d);
    double trial_cost = track_cost(cams, biases, obs, trial);
    for (int k = 0; k < 30 && !(trial_cost <= cost); ++k) {
      t *= 0.5;
      trial = GeoPoint::from_vec(x.vec() + t * d);
      trial_cost = track_cost(cams, biases, obs, trial);
    }
    if (!(trial_cost <= cost)) break;
    const double step_px = std::sqrt((t * d).dot(h * (t * d)) / double(obs.size()));
    x = trial;
    cost = trial_cost;
    if (step_px < 1e-12 || cost < 1e-26) break;
  }
  return {x, std::sqrt(cost / double(obs.size()))};
}

std::vector<TriangulatedPoint> triangulate(const std::vector<Camera>& cams,
                                           const std::vector<Eigen::Vector2d>& biases, int image_i,
                                           int image_j, const std::vector<MatchRecord>& matches) {
  std::vector<TriangulatedPoint> out;
  out.reserve(matches.size());
  for (const MatchRecord& m : matches) out.push_back(triangulate_track(cams, biases, {{image_i, m.xi}, {image_j, m.xj}}));
  return out;
}

// ---------------------------------------------------------------------------
// Bundle adjustment

namespace {

struct BaState {
  std::vector<Eigen::Vector2d> biases;
  std::vector<GeoPoint> points;
};

struct BaProblem {
  const std::vector<Camera>& cams;
  const std::vector<TieTrack>& tracks;
  double lambda;
  std::vector<int> bias_slot;  // -1 when pinned
  int n_free = 0;

  // Returns {total cost, reprojection-only sum of squares}.
  std::pair<double, double> cost(const BaState& s) const {
    double reproj = 0.0;
    for (std::size_t k = 0; k < tracks.size(); ++k)
      for (const Observation& o : tracks[k].observations)
        reproj += (o.x.vec() - project(cams[o.image], s.points[k]).vec() - s.biases[o.image]).squaredNorm();
    double reg = 0.0;
    for (const auto& b : s.biases) reg += b.squaredNorm();
    return {reproj + lambda * reg, reproj};
  }
};

struct NormalEquations {
  std::vector<Eigen::Matrix2d> u;  // per free bias
  std::vector<Eigen::Vector2d> gb;
  std::vector<Eigen::Matrix3d> v;  // per track
  std::vector<Eigen::Vector3d> gx;
  // Per track: (bias slot, 2x3 coupling block).
  std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 2, 3>>>> w;
};

NormalEquations linearize(const BaProblem& p, const BaState& s) {
  NormalEquations ne;
  ne.u.assign(p.n_free, p.lambda * Eigen::Matrix2d::Identity());
  ne.gb.assign(p.n_free, Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < p.cams.size(); ++i)
    if (p.bias_slot[i] >= 0) ne.gb[p.bias_slot[i]] = p.lambda * s.biases[i];
  ne.v.assign(p.tracks.size(), Eigen::Matrix3d::Zero());
  ne.gx.assign(p.tracks.size(), Eigen::Vector3d::Zero());
  ne.w.resize(p.tracks.size());

  for (std::size_t k = 0; k < p.tracks.size(); ++k) {
    for (const Observation& o : p.tracks[k].observations) {
      const Eigen::Matrix<double, 2, 3> jp = camera_jacobian(p.cams[o.image], s.points[k]);
      const Eigen::Vector2d r = o.x.vec() - project(p.cams[o.image], s.points[k]).vec() - s.biases[o.image];
      // Residual derivatives: d r / d b = -I, d r / d X = -jp.
      ne.v[k] += jp.transpose() * jp;
      ne.gx[k] -= jp.transpose() * r;
      const int slot = p.bias_slot[o.image];
      if (slot >= 0) {
        ne.u[slot] += Eigen::Matrix2d::Identity();
        ne.gb[slot] -= r;
        ne.w[k].emplace_back(slot, jp);
      }
    }
  }
  return ne;
}

// Max over variables of |g_i| / sqrt(H_ii): gradient in residual units.
double scaled_gradient(const NormalEquations& ne) {
  double worst = 0.0;
  for (std::size_t s = 0; s < ne.u.size(); ++s)
    for (int c = 0; c < 2; ++c)
      if (ne.u[s](c, c) > 0) worst = std::max(worst, std::abs(ne.gb[s](c)) / std::sqrt(ne.u[s](c, c)));
  for (std::size_t k = 0; k < ne.v.size(); ++k)
    for (int c = 0; c < 3; ++c)
      if (ne.v[k](c, c) > 0) worst = std::max(worst, std::abs(ne.gx[k](c)) / std::sqrt(ne.v[k](c, c)));
  return worst;
}

// Solves the Marquardt-damped system by eliminating the track points.
bool solve_damped(const NormalEquations& ne, double mu, Eigen::VectorXd& db, std::vector<Eigen::Vector3d>& dx) {
  const int nb = 2 * static_cast<int>(ne.u.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::VectorXd rhs(nb);
  for (std::size_t i = 0; i < ne.u.size(); ++i) {
    Eigen::Matrix2d ud = ne.u[i];
    ud.diagonal() *= 1.0 + mu;
    s.block<2, 2>(2 * i, 2 * i) = ud;
    rhs.segment<2>(2 * i) = -ne.gb[i];
  }
  std::vector<Eigen::Matrix3d> vinv(ne.v.size());
  for (std::size_t k = 0; k < ne.v.size(); ++k) {
    Eigen::Matrix3d vd = ne.v[k];
    vd.diagonal() *= 1.0 + mu;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(vd);
    if (!lu.isInvertible()) return false;
    vinv[k] = lu.inverse();
    const auto& wk = ne.w[k];
    for (const auto& [si, wi] : wk) {
      rhs.segment<2>(2 * si) += wi * vinv[k] * ne.gx[k];
      for (const auto& [sj, wj] : wk) s.block<2, 2>(2 * si, 2 * sj) -= wi * vinv[k] * wj.transpose();
    }
  }
  db = Eigen::VectorXd::Zero(nb);
  if (nb > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success) return false;
    db = ldlt.solve(rhs);
    if (!db.allFinite()) return false;
  }
  dx.resize(ne.v.size());
  for (std::size_t k = 0; k < ne.v.size(); ++k) {
    Eigen::Vector3d r = -ne.gx[k];
    for (const auto& [si, wi] : ne.w[k]) r -= wi.transpose() * db.segment<2>(2 * si);
    dx[k] = vinv[k] * r;
    if (!dx[k].allFinite()) return false;
  }
  return true;
}

void check_connected(int n_images, const std::vector<TieTrack>& tracks) {
  UnionFind uf(n_images);
  std::vector<char> seen(n_images, 0);
  for (const TieTrack& t : tracks) {
    for (const Observation& o : t.observations) {
      seen[o.image] = 1;
      uf.unite(t.observations.front().image, o.image);
    }
  }
  int root = -1;
  for (int i = 0; i < n_images; ++i) {
    if (!seen[i]) continue;
    if (root < 0) root = uf.find(i);
    if (uf.find(i) != root) throw DomainError("bundle_adjust: observation graph is disconnected");
  }
  if (root < 0) throw DomainError("bundle_adjust: no tracks");
}

}  // namespace

BaResult bundle_adjust_tracks(const std::vector<Camera>& cams, std::vector<TieTrack> tracks, const BaConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw DomainError("bundle_adjust: lambda must be >= 0");
  const int m = static_cast<int>(cams.size());
  for (const TieTrack& t : tracks) {
    if (t.observations.size() < 2) throw DomainError("bundle_adjust: track with fewer than 2 observations");
    std::set<int> imgs;
    for (const Observation& o : t.observations) {
      if (o.image < 0 || o.image >= m) throw DomainError("bundle_adjust: observation references unknown image");
      if (!imgs.insert(o.image).second) throw DomainError("bundle_adjust: track observes one image twice");
    }
  }

  BaResult res;
  const std::vector<Eigen::Vector2d> zero(m, Eigen::Vector2d::Zero());
  std::vector<TieTrack> kept;
  for (TieTrack& t : tracks) {
    try {
      t.world = triangulate_track(cams, zero, t.observations).world;
      kept.push_back(std::move(t));
    } catch (const Error&) {
      ++res.dropped_tracks;
    }
  }
  tracks = std::move(kept);
  check_connected(m, tracks);

  BaProblem prob{cams, tracks, cfg.lambda, std::vector<int>(m, -1), 0};
  std::vector<char> pinned(m, 0);
  for (int i : cfg.pinned) {
    if (i < 0 || i >= m) throw DomainError("bundle_adjust: pinned image index out of range");
    pinned[i] = 1;
  }
  for (int i = 0; i < m; ++i)
    if (!pinned[i]) prob.bias_slot[i] = prob.n_free++;

  BaState state{zero, {}};
  for (const TieTrack& t : tracks) state.points.push_back(t.world);
  long long n_obs = 0;
  for (const TieTrack& t : tracks) n_obs += static_cast<long long>(t.observations.size());

  auto [cost, reproj] = prob.cost(state);
  if (!std::isfinite(cost)) throw ConvergenceError("bundle_adjust: non-finite initial cost");
  res.initial_cost = cost;

  double mu = 1e-4;
  NormalEquations ne = linearize(prob, state);
  for (int it = 0; it < cfg.max_iter; ++it) {
    res.iterations = it;
    if (scaled_gradient(ne) < cfg.gradient_tol * (1.0 + cost) || cost < 1e-30) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd db;
    std::vector<Eigen::Vector3d> dx;
    bool accepted = false;
    if (solve_damped(ne, mu, db, dx)) {
      BaState trial = state;
      for (int i = 0; i < m; ++i)
        if (prob.bias_slot[i] >= 0) trial.biases[i] += db.segment<2>(2 * prob.bias_slot[i]);
      for (std::size_t k = 0; k < tracks.size(); ++k)
        trial.points[k] = GeoPoint::from_vec(state.points[k].vec() + dx[k]);
      try {
        const auto [tc, tr] = prob.cost(trial);
        if (std::isfinite(tc) && tc < cost) {
          const double rel = (cost - tc) / cost;
          state = std::move(trial);
          cost = tc;
          reproj = tr;
          accepted = true;
          mu = std::max(mu / 10.0, 1e-12);
          ne = linearize(prob, state);
          if (rel < cfg.tol) {
            res.converged = true;
            break;
          }
        }
      } catch (const DenominatorError&) {
      }
    }
    if (!accepted) {
      mu *= 10.0;
      if (mu > 1e16) {
        res.converged = scaled_gradient(ne) < 1e-6 * (1.0 + cost);
        break;
      }
    }
  }

  res.biases = state.biases;
  for (std::size_t k = 0; k < tracks.size(); ++k) tracks[k].world = state.points[k];
  res.tracks = std::move(tracks);
  res.final_cost = cost;
  res.rms_px = n_obs ? std::sqrt(reproj / double(n_obs)) : 0.0;
  res.gradient_norm = scaled_gradient(ne);
  for (int i = 0; i < m; ++i)
    if (res.biases[i].norm() > cfg.bias_warning_px)
      res.warnings.push_back("image " + std::to_string(i) + ": bias magnitude " +
                             std::to_string(res.biases[i].norm()) + " px exceeds " +
                             std::to_string(cfg.bias_warning_px) + " px");
  return res;
}

BaResult bundle_adjust(const std::vector<Camera>& cams, const PairMatches& pairs, const BaConfig& cfg) {
  int dropped = 0;
  std::vector<TieTrack> tracks = build_tracks(pairs, cfg.track_merge_px, &dropped);
  BaResult r = bundle_adjust_tracks(cams, std::move(tracks), cfg);
  r.dropped_tracks += dropped;
  return r;
}

// ---------------------------------------------------------------------------
// Connectivity

ComponentResult largest_aligned_component(const ConnectivityGraph& g, const BaConfig& cfg) {
  std::set<int> node_set(g.nodes.begin(), g.nodes.end());
  std::set<std::pair<int, int>> edges;
  for (const GraphEdge& e : g.edges) {
    node_set.insert(e.i);
    node_set.insert(e.j);
    if (e.i != e.j && e.inliers >= cfg.min_inliers_edge) edges.emplace(std::min(e.i, e.j), std::max(e.i, e.j));
  }
  const std::vector<int> nodes(node_set.begin(), node_set.end());
  const auto index = [&](int label) {
    return static_cast<int>(std::lower_bound(nodes.begin(), nodes.end(), label) - nodes.begin());
  };
  UnionFind uf(nodes.size());
  for (const auto& [a, b] : edges) uf.unite(index(a), index(b));

  std::map<int, ComponentResult> comps;
  for (std::size_t k = 0; k < nodes.size(); ++k) comps[uf.find(int(k))].nodes.push_back(nodes[k]);
  for (const auto& [a, b] : edges) comps[uf.find(index(a))].edge_count++;

  ComponentResult best;
  bool have = false;
  for (auto& [root, c] : comps) {
    const auto better = [&]() {
      if (c.nodes.size() != best.nodes.size()) return c.nodes.size() > best.nodes.size();
      if (c.edge_count != best.edge_count) return c.edge_count > best.edge_count;
      return c.nodes.front() < best.nodes.front();
    };
    if (!have || better()) {
      best = c;
      have = true;
    }
  }
  const double v = double(best.nodes.size());
  best.density = v >= 2 ? 2.0 * best.edge_count / (v * (v - 1.0)) : 0.0;
  best.accepted = v >= 2 && best.density >= cfg.min_component_density;
  return best;
}

// ---------------------------------------------------------------------------
// DSM fusion

double top_n_median(std::vector<double> heights, int top_n) {
  if (heights.empty() || top_n < 1) throw DomainError("top_n_median: empty input");
  std::sort(heights.begin(), heights.end(), std::greater<double>());
  const std::size_t m = std::min<std::size_t>(heights.size(), static_cast<std::size_t>(top_n));
  return m % 2 ? heights[m / 2] : 0.5 * (heights[m / 2 - 1] + heights[m / 2]);
}

GeoTransform fusion_grid(const std::vector<std::vector<GeoPoint>>& clouds, double gsd, int* height, int* width) {
  if (!(gsd > 0.0)) throw DomainError("fuse_and_rasterize: gsd must be > 0");
  double lat_lo = std::numeric_limits<double>::infinity(), lat_hi = -lat_lo, lon_lo = lat_lo, lon_hi = -lat_lo;
  for (const auto& cloud : clouds)
    for (const GeoPoint& p : cloud) {
      if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || !std::isfinite(p.h)) continue;
      lat_lo = std::min(lat_lo, p.lat);
      lat_hi = std::max(lat_hi, p.lat);
      lon_lo = std::min(lon_lo, p.lon);
      lon_hi = std::max(lon_hi, p.lon);
    }
  if (!(lat_lo <= lat_hi)) throw DomainError("fuse_and_rasterize: no finite points");
  const auto [m_lat, m_lon] = meters_per_degree({0.5 * (lat_lo + lat_hi), 0.5 * (lon_lo + lon_hi), 0.0});
  GeoTransform gt{lon_lo, lat_hi, gsd / m_lon, gsd / m_lat};
  *width = static_cast<int>(std::floor((lon_hi - lon_lo) / gt.pixel_size_lon)) + 1;
  *height = static_cast<int>(std::floor((lat_hi - lat_lo) / gt.pixel_size_lat)) + 1;
  return gt;
}

RasterF64 fuse_and_rasterize(const std::vector<std::vector<GeoPoint>>& clouds, double gsd, int top_n) {
  int h = 0, w = 0;
  const GeoTransform gt = fusion_grid(clouds, gsd, &h, &w);
  return fuse_and_rasterize(clouds, gt, h, w, top_n);
}

RasterF64 fuse_and_rasterize(const std::vector<std::vector<GeoPoint>>& clouds, const GeoTransform& gt, int height,
                             int width, int top_n) {
  if (top_n < 1) throw DomainError("fuse_and_rasterize: top_n must be >= 1");
  std::vector<std::vector<double>> cells(static_cast<std::size_t>(height) * width);
  for (const auto& cloud : clouds) {
    for (const GeoPoint& p : cloud) {
      if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || !std::isfinite(p.h)) continue;
      const double c = std::floor((p.lon - gt.origin_lon) / gt.pixel_size_lon);
      const double r = std::floor((gt.origin_lat - p.lat) / gt.pixel_size_lat);
      if (r < 0 || c < 0 || r >= height || c >= width) continue;
      cells[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)].push_back(p.h);
    }
  }
  RasterF64 out(height, width, gt, std::numeric_limits<double>::quiet_NaN());
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      auto& v = cells[static_cast<std::size_t>(r) * width + c];
      if (!v.empty()) out.values(r, c) = top_n_median(std::move(v), top_n);
    }
  return out;
}

}  // namespace satdepth
