#include "satdepth/gcp_accuracy.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "satdepth/text.hpp"

namespace satdepth {

Summary summarize_values(std::vector<double> v) {
  Summary s;
  s.count = int(v.size());
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / double(v.size() - 1));
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  s.median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  return s;
}

GcpErrorReport gcp_errors(const std::vector<GcpRecord>& gcps, const std::vector<AnnotationRecord>& annotations,
                          const std::map<std::string, SatDepthMap>& maps,
                          const std::map<std::string, Camera>& cams) {
  std::map<std::string, GeoPoint> truth;
  for (const auto& g : gcps) truth[g.gcp_id] = g.position;

  struct Looked {
    std::string image;
    PixelPoint x;
    GeoPoint world;
  };
  std::map<std::string, std::vector<Looked>> per_gcp;
  GcpErrorReport rep;
  for (const auto& a : annotations) {
    if (a.status != AnnotationStatus::Annotated) continue;
    if (!truth.count(a.gcp_id)) throw DomainError("annotation references unknown GCP '" + a.gcp_id + "'");
    const auto m = maps.find(a.image_id);
    if (m == maps.end()) throw DomainError("annotation references unknown image '" + a.image_id + "'");
    const PixelPoint x = *a.pixel;
    const long r = std::lround(x.row), c = std::lround(x.col);
    if (!m->second.contains(int(r), int(c))) {
      rep.issues.push_back({a.gcp_id, a.image_id, "pixel outside map"});
      continue;
    }
    if (!m->second.valid(int(r), int(c))) {
      rep.issues.push_back({a.gcp_id, a.image_id, "pixel invalid in map"});
      continue;
    }
    per_gcp[a.gcp_id].push_back({a.image_id, x, m->second.at(int(r), int(c))});
  }

  std::vector<double> va, vr3, vr2;
  for (auto& [gid, obs] : per_gcp) {
    std::stable_sort(obs.begin(), obs.end(), [](const Looked& p, const Looked& q) { return p.image < q.image; });
    const EcefPoint xg = geo_to_ecef(truth[gid]);
    for (const auto& o : obs) {
      AbsError e{gid, o.image, 0.0, geo_to_ecef(o.world) - xg};
      e.abs3d = e.error.norm();
      va.push_back(e.abs3d);
      rep.abs.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < obs.size(); ++i) {
      for (std::size_t j = i + 1; j < obs.size(); ++j) {
        const auto cj = cams.find(obs[j].image);
        if (cj == cams.end()) throw DomainError("no camera for image '" + obs[j].image + "'");
        RelError e{gid, obs[i].image, obs[j].image, 0.0, 0.0};
        e.rel3d = (geo_to_ecef(obs[i].world) - geo_to_ecef(obs[j].world)).norm();
        e.rel2d = distance(obs[j].x, project(cj->second, obs[i].world));
        vr3.push_back(e.rel3d);
        vr2.push_back(e.rel2d);
        rep.rel.push_back(std::move(e));
      }
    }
  }
  rep.abs3d = summarize_values(va);
  rep.rel3d = summarize_values(vr3);
  rep.rel2d = summarize_values(vr2);
  return rep;
}

std::string error_report_csv(const GcpErrorReport& rep) {
  std::ostringstream out;
  out << "measure,gcp_id,image_i,image_j,value\n";
  for (const auto& e : rep.abs) out << "abs3d," << e.gcp_id << "," << e.image_id << ",," << text::format_real(e.abs3d) << "\n";
  for (const auto& e : rep.rel)
    out << "rel3d," << e.gcp_id << "," << e.image_i << "," << e.image_j << "," << text::format_real(e.rel3d) << "\n";
  for (const auto& e : rep.rel)
    out << "rel2d," << e.gcp_id << "," << e.image_i << "," << e.image_j << "," << text::format_real(e.rel2d) << "\n";
  const auto agg = [&](const char* name, const Summary& s) {
    if (s.count == 0) return;
    out << name << ",mean,,," << text::format_real(s.mean) << "\n";
    out << name << ",median,,," << text::format_real(s.median) << "\n";
  };
  agg("abs3d", rep.abs3d);
  agg("rel3d", rep.rel3d);
  agg("rel2d", rep.rel2d);
  return out.str();
}

std::vector<ShiftObservation> shift_observations(const GcpErrorReport& report) {
  std::vector<ShiftObservation> out;
  for (const auto& e : report.abs) out.push_back({e.gcp_id, e.error});
  return out;
}

ShiftEstimate monte_carlo_shift(const std::vector<ShiftObservation>& obs, int n_sims, std::uint64_t seed) {
  if (n_sims < 1) throw DomainError("monte_carlo_shift: n_sims must be >= 1");
  std::vector<std::string> ids;
  {
    std::set<std::string> s;
    for (const auto& o : obs) s.insert(o.gcp_id);
    ids.assign(s.begin(), s.end());
  }
  if (ids.size() < 4) throw DomainError("monte_carlo_shift: at least 4 GCPs required");

  ShiftEstimate est;
  est.n_sims = n_sims;
  for (const auto& o : obs) est.shift += o.error;
  est.shift /= double(obs.size());

  const std::size_t n_train =
      std::clamp<std::size_t>(std::size_t(std::lround(0.7 * double(ids.size()))), 1, ids.size() - 1);
  std::mt19937_64 rng(seed);
  std::vector<double> before, after;
  std::vector<std::string> order = ids;
  for (int s = 0; s < n_sims; ++s) {
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
      std::swap(order[k], order[pick(rng)]);
    }
    const std::set<std::string> train(order.begin(), order.begin() + long(n_train));
    Eigen::Vector3d shift = Eigen::Vector3d::Zero();
    int nt = 0;
    for (const auto& o : obs)
      if (train.count(o.gcp_id)) {
        shift += o.error;
        ++nt;
      }
    shift /= double(nt);
    double b = 0.0, a = 0.0;
    int ne = 0;
    for (const auto& o : obs)
      if (!train.count(o.gcp_id)) {
        b += o.error.norm();
        a += (o.error - shift).norm();
        ++ne;
      }
    before.push_back(b / ne);
    after.push_back(a / ne);
  }
  const Summary sb = summarize_values(before), sa = summarize_values(after);
  est.before_mean = sb.mean;
  est.before_std = sb.stddev;
  est.after_mean = sa.mean;
  est.after_std = sa.stddev;
  return est;
}

Eigen::Vector3d shift_to_geodetic(const EcefShift& shift, const GeoPoint& center) {
  if (!is_valid(center)) throw DomainError("apply_shift: invalid tile center");
  return geo_to_ecef_jacobian(center).lu().solve(shift);
}

RasterF64 apply_shift(const RasterF64& dsm, const EcefShift& shift, const GeoPoint& center) {
  if (shift.isZero(0.0)) return dsm;
  const Eigen::Vector3d d = shift_to_geodetic(shift, center);
  RasterF64 out = dsm;
  out.gt.origin_lat -= d(0);
  out.gt.origin_lon -= d(1);
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      if (out.valid(r, c)) out.values(r, c) -= d(2);
  return out;
}

SatDepthMap apply_shift(const SatDepthMap& map, const EcefShift& shift, const GeoPoint& center) {
  if (shift.isZero(0.0)) return map;
  const Eigen::Vector3d d = shift_to_geodetic(shift, center);
  SatDepthMap out = map;
  out.lat.array() -= d(0);
  out.lon.array() -= d(1);
  out.ht.array() -= float(d(2));
  return out;
}

RpcModel apply_shift(const RpcModel& cam, const EcefShift& shift, const GeoPoint& center) {
  if (shift.isZero(0.0)) return cam;
  const Eigen::Vector3d d = shift_to_geodetic(shift, center);
  RpcModel out = cam;
  out.lat_off -= d(0);
  out.lon_off -= d(1);
  out.height_off -= d(2);
  return out;
}

std::string shift_to_json(const EcefShift& shift, const GeoPoint& center) {
  nlohmann::json j;
  j["dx"] = shift.x();
  j["dy"] = shift.y();
  j["dz"] = shift.z();
  j["tile_center"] = {{"lat", center.lat}, {"lon", center.lon}, {"h", center.h}};
  return j.dump(2) + "\n";
}

EcefShift shift_from_json(const std::string& text_in, GeoPoint* center) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text_in);
    const EcefShift s(j.at("dx").get<double>(), j.at("dy").get<double>(), j.at("dz").get<double>());
    if (!s.allFinite()) throw FormatError("shift sidecar: non-finite component");
    if (center) {
      const auto& c = j.at("tile_center");
      *center = {c.at("lat").get<double>(), c.at("lon").get<double>(), c.at("h").get<double>()};
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("shift sidecar: ") + e.what());
  }
}

}  // namespace satdepth
