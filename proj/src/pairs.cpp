#include "satdepth/pairs.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "satdepth/text.hpp"

namespace satdepth {

Eigen::Vector3d view_vector(const ImdRecord& meta) {
  const double az = meta.sat_azimuth * kDegToRad;
  const double el = meta.sat_elevation * kDegToRad;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double view_angle_diff(const ImdRecord& a, const ImdRecord& b) {
  const double d = std::clamp(view_vector(a).dot(view_vector(b)), -1.0, 1.0);
  return std::acos(d) * kRadToDeg;
}

Eigen::Vector2d track_direction(const SatDepthMap& map, int zone, Hemisphere hemisphere) {
  const int r = map.height() / 2;
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> cols;
  for (int c = 0; c < map.width(); ++c) {
    if (!map.valid(r, c)) continue;
    const GeoPoint p = map.at(r, c);
    if (utm_zone_for(p.lon) != zone || (p.lat < 0) != (hemisphere == Hemisphere::South))
      throw DomainError("track_angle_diff: middle row straddles UTM zones");
    const UtmPoint u = geo_to_utm(p, zone, hemisphere);
    pts.emplace_back(u.easting, u.northing);
    cols.push_back(c);
  }
  if (pts.size() < 2) throw DomainError("track_angle_diff: middle row has fewer than 2 valid pixels");

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double col_mean = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    mean += pts[k];
    col_mean += cols[k];
  }
  mean /= double(pts.size());
  col_mean /= double(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Eigen::Vector2d dir = es.eigenvectors().col(1);
  if (!(es.eigenvalues()(1) > 0)) throw DegenerateError("track_angle_diff: middle-row points coincide");

  double along = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) along += (cols[k] - col_mean) * dir.dot(pts[k] - mean);
  if (along < 0) dir = -dir;
  return dir.normalized();
}

double track_angle_diff(const SatDepthMap& map_i, const SatDepthMap& map_j) {
  const auto first_valid = [](const SatDepthMap& m) -> std::optional<GeoPoint> {
    const int r = m.height() / 2;
    for (int c = 0; c < m.width(); ++c)
      if (m.valid(r, c)) return m.at(r, c);
    return std::nullopt;
  };
  const auto p0 = first_valid(map_i);
  if (!p0) throw DomainError("track_angle_diff: middle row has fewer than 2 valid pixels");
  const int zone = utm_zone_for(p0->lon);
  const Hemisphere hemi = p0->lat < 0 ? Hemisphere::South : Hemisphere::North;
  const double d = std::clamp(track_direction(map_i, zone, hemi).dot(track_direction(map_j, zone, hemi)), -1.0, 1.0);
  return std::acos(d) * kRadToDeg;
}

std::vector<PairRecord> parse_pairs(std::string_view csv) {
  std::vector<PairRecord> out;
  const auto rows = text::csv_rows(csv, kPairHeader, 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    const std::string where = "pair line " + std::to_string(i + 2);
    if (f[0].empty() || f[1].empty()) throw FormatError(where + ": empty image id");
    PairRecord p;
    p.image_i = f[0];
    p.image_j = f[1];
    p.alpha_v = text::parse_real_or_throw(f[2], where + " alpha_v");
    p.alpha_t = text::parse_real_or_throw(f[3], where + " alpha_t");
    p.dt = text::parse_real_or_throw(f[4], where + " dt");
    p.split = f[5];
    if (!(p.alpha_v >= 0 && p.alpha_v <= 180) || !(p.alpha_t >= 0 && p.alpha_t <= 180))
      throw FormatError(where + ": angles must lie in [0, 180]");
    if (!(p.dt >= 0)) throw FormatError(where + ": dt must be non-negative");
    out.push_back(std::move(p));
  }
  return out;
}

std::string serialize_pairs(const std::vector<PairRecord>& pairs) {
  std::ostringstream out;
  out << kPairHeader << "\n";
  for (const auto& p : pairs)
    out << p.image_i << "," << p.image_j << "," << text::format_real(p.alpha_v) << ","
        << text::format_real(p.alpha_t) << "," << text::format_real(p.dt) << "," << p.split << "\n";
  return out.str();
}

double time_difference_days(const ImdRecord& a, const ImdRecord& b) {
  const auto us = (a.acquisition_time - b.acquisition_time).count();
  return std::abs(double(us)) / 86400e6;
}

PairRecord make_pair_record(const ImdRecord& a, const ImdRecord& b, const SatDepthMap& map_a,
                            const SatDepthMap& map_b, const std::string& split) {
  PairRecord p;
  p.image_i = a.image_id;
  p.image_j = b.image_id;
  p.alpha_v = view_angle_diff(a, b);
  p.alpha_t = track_angle_diff(map_a, map_b);
  p.dt = time_difference_days(a, b);
  p.split = split;
  return p;
}

std::vector<int> alpha_v_bins(const std::vector<PairRecord>& pairs, const BalanceConfig& cfg) {
  if (cfg.n_bins < 1) throw DomainError("balance: n_bins must be >= 1");
  double hi = 0.0;
  if (cfg.range_max) {
    hi = *cfg.range_max;
  } else {
    for (const auto& p : pairs) hi = std::max(hi, p.alpha_v);
  }
  std::vector<int> bins;
  bins.reserve(pairs.size());
  for (const auto& p : pairs) {
    int b = hi > 0 ? int(std::floor(p.alpha_v / hi * cfg.n_bins)) : 0;
    bins.push_back(std::clamp(b, 0, cfg.n_bins - 1));
  }
  return bins;
}

std::vector<PairRecord> balance_pairs(const std::vector<PairRecord>& pairs, const BalanceConfig& cfg) {
  if (cfg.target_per_bin < 1) throw DomainError("balance: target_per_bin must be >= 1");
  const std::vector<int> bins = alpha_v_bins(pairs, cfg);
  std::vector<std::vector<std::size_t>> members(cfg.n_bins);
  for (std::size_t k = 0; k < pairs.size(); ++k) members[bins[k]].push_back(k);

  std::mt19937_64 rng(cfg.seed);
  std::vector<char> keep(pairs.size(), 0);
  for (auto& m : members) {
    const std::size_t take = std::min<std::size_t>(m.size(), std::size_t(cfg.target_per_bin));
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, m.size() - 1);
      std::swap(m[k], m[pick(rng)]);
      keep[m[k]] = 1;
    }
  }
  std::vector<PairRecord> out;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (keep[k]) out.push_back(pairs[k]);
  return out;
}

GridRect largest_rectangle_at_least(const RasterF32& counts, double n_min) {
  const int h = counts.height(), w = counts.width();
  std::vector<int> run(w, 0);
  GridRect best;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) run[c] = counts.values(r, c) >= n_min ? run[c] + 1 : 0;
    // Largest rectangle in the histogram `run` with bottom edge on row r.
    std::vector<int> stack;
    for (int c = 0; c <= w; ++c) {
      const int cur = c < w ? run[c] : 0;
      while (!stack.empty() && run[stack.back()] >= cur) {
        const int height = run[stack.back()];
        stack.pop_back();
        const int left = stack.empty() ? 0 : stack.back() + 1;
        const GridRect cand{r - height + 1, left, height, c - left};
        if (height > 0 && cand.area() > best.area()) best = cand;
      }
      stack.push_back(c);
    }
  }
  return best;
}

Coverage coverage_heatmap(const std::vector<Camera>& cams, const std::vector<ImageDims>& dims,
                          const GeoTransform& gt, int height, int width, double h_ref, int n_min) {
  if (cams.size() != dims.size()) throw DomainError("coverage: one image size per camera required");
  if (height < 1 || width < 1) throw DomainError("coverage: grid must be non-empty");
  Coverage out;
  out.counts = RasterF32(height, width, gt, std::numeric_limits<float>::quiet_NaN());
  out.counts.values.setZero();
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const LatLon ll = pixel_to_geo(gt, r, c);
      int n = 0;
      for (std::size_t k = 0; k < cams.size(); ++k) {
        PixelPoint x;
        try {
          x = project(cams[k], GeoPoint{ll.lat, ll.lon, h_ref});
        } catch (const DenominatorError&) {
          continue;
        }
        if (!(std::abs(x.row) < 1e9 && std::abs(x.col) < 1e9)) continue;
        const long pr = std::lround(x.row), pc = std::lround(x.col);
        if (pr >= 0 && pc >= 0 && pr < dims[k].height && pc < dims[k].width) ++n;
      }
      out.counts.values(r, c) = float(n);
    }
  }
  out.best = largest_rectangle_at_least(out.counts, n_min);
  return out;
}

}  // namespace satdepth
