#include "satdepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "satdepth/text.hpp"

namespace satdepth {

double symmetric_epipolar_distance(const AffineFundamental& f, const PixelPoint& xi, const PixelPoint& xj) {
  const double ni = f.a * f.a + f.b * f.b;  // normal of the line F x_j in image i
  const double nj = f.c * f.c + f.d * f.d;  // normal of the line F^T x_i in image j
  if (ni == 0.0 || nj == 0.0) throw DegenerateError("d_epi: epipolar line normal vanishes");
  const double r = f.residual(xi, xj);
  return 0.5 * r * r * (1.0 / ni + 1.0 / nj);
}

double precision(const std::vector<MatchRecord>& matches, const AffineFundamental& f_gt, double delta_epi) {
  if (matches.empty()) throw DomainError("precision: empty match list");
  std::size_t good = 0;
  for (const MatchRecord& m : matches)
    if (symmetric_epipolar_distance(f_gt, m.xi, m.xj) < delta_epi) ++good;
  return 100.0 * double(good) / double(matches.size());
}

namespace {

// Folds an angle modulo pi into (-pi/2, pi/2].
double fold_half_turn(double t) {
  t = std::fmod(t, M_PI);
  if (t <= -M_PI / 2) t += M_PI;
  if (t > M_PI / 2) t -= M_PI;
  return t;
}

}  // namespace

PoseParams decompose_affine_f(const AffineFundamental& f) {
  const double nab = std::hypot(f.a, f.b);
  const double ncd = std::hypot(f.c, f.d);
  if (nab == 0.0 || ncd == 0.0) throw DegenerateError("decompose_affine_f: (a,b) or (c,d) vanishes");
  PoseParams p;
  p.theta = fold_half_turn(std::atan2(f.b, f.a) - std::atan2(f.d, f.c));
  p.s = ncd / nab;
  p.phi = std::acos(std::min(1.0, std::min(p.s, 1.0 / p.s)));
  return p;
}

double pose_error_deg(const PoseParams& gt, const PoseParams& est) {
  const double dtheta = std::abs(fold_half_turn(gt.theta - est.theta));
  const double dphi = std::abs(gt.phi - est.phi);
  return std::max(dtheta, dphi) * kRadToDeg;
}

std::vector<double> pose_auc(std::vector<double> errors, const std::vector<double>& thresholds) {
  if (errors.empty()) throw DomainError("auc: empty error list");
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  // Recall curve with a leading (0, 0) knot.
  std::vector<double> e(n + 1, 0.0), r(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    e[k + 1] = errors[k];
    r[k + 1] = double(k + 1) / double(n);
  }
  std::vector<double> out;
  for (double t : thresholds) {
    if (!(t > 0)) throw DomainError("auc: thresholds must be positive");
    const std::size_t last = std::lower_bound(e.begin(), e.end(), t) - e.begin();
    double area = 0.0;
    for (std::size_t k = 1; k < last; ++k) area += 0.5 * (r[k] + r[k - 1]) * (e[k] - e[k - 1]);
    area += r[last - 1] * (t - e[last - 1]);
    out.push_back(100.0 * area / t);
  }
  return out;
}

DsmComparison dsm_compare(const RasterF64& test, const RasterF64& truth, double tolerance_m) {
  if (test.height() != truth.height() || test.width() != truth.width())
    throw DomainError("dsm_compare: rasters differ in shape");
  const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  if (!close(test.gt.origin_lat, truth.gt.origin_lat) || !close(test.gt.origin_lon, truth.gt.origin_lon) ||
      !close(test.gt.pixel_size_lat, truth.gt.pixel_size_lat) ||
      !close(test.gt.pixel_size_lon, truth.gt.pixel_size_lon))
    throw DomainError("dsm_compare: rasters are not co-registered");

  std::vector<double> abs_err;
  double sum_sq = 0.0;
  long long within = 0;
  for (int r = 0; r < test.height(); ++r) {
    for (int c = 0; c < test.width(); ++c) {
      if (!test.valid(r, c) || !truth.valid(r, c)) continue;
      const double d = test.values(r, c) - truth.values(r, c);
      abs_err.push_back(std::abs(d));
      sum_sq += d * d;
      if (std::abs(d) < tolerance_m) ++within;
    }
  }
  if (abs_err.empty()) throw DomainError("dsm_compare: no cells valid in both rasters");

  DsmComparison out;
  out.valid_count = static_cast<long long>(abs_err.size());
  out.completeness = 100.0 * double(within) / double(out.valid_count);
  out.rmse = std::sqrt(sum_sq / double(out.valid_count));
  std::sort(abs_err.begin(), abs_err.end());
  const std::size_t m = abs_err.size();
  out.mae = m % 2 ? abs_err[m / 2] : 0.5 * (abs_err[m / 2 - 1] + abs_err[m / 2]);
  return out;
}

PairEvaluation evaluate_pair(const std::string& pair_id, const std::vector<MatchRecord>& matches,
                             const AffineFundamental& f_gt, double delta_epi, const RansacConfig& ransac) {
  PairEvaluation ev;
  ev.pair_id = pair_id;
  ev.n_matches = static_cast<int>(matches.size());
  ev.pose_error_deg = 90.0;
  if (matches.empty()) return ev;
  ev.precision = precision(matches, f_gt, delta_epi);
  try {
    const RansacResult est = ransac_affine_f(matches, ransac);
    ev.pose_error_deg = pose_error_deg(decompose_affine_f(f_gt), decompose_affine_f(est.f));
  } catch (const Error&) {
  }
  return ev;
}

EvaluationReport summarize(std::vector<PairEvaluation> pairs, const std::vector<double>& thresholds) {
  EvaluationReport r;
  r.pairs = std::move(pairs);
  r.thresholds = thresholds;
  if (r.pairs.empty()) return r;
  std::vector<double> errs;
  for (const auto& p : r.pairs) {
    r.mean_precision += p.precision;
    r.mean_matches += p.n_matches;
    errs.push_back(p.pose_error_deg);
  }
  r.mean_precision /= double(r.pairs.size());
  r.mean_matches /= double(r.pairs.size());
  r.auc = pose_auc(errs, thresholds);
  return r;
}

std::string report_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << "pair,n_matches,precision,pose_error_deg\n";
  for (const auto& p : r.pairs)
    out << p.pair_id << "," << p.n_matches << "," << text::format_real(p.precision) << ","
        << text::format_real(p.pose_error_deg) << "\n";
  return out.str();
}

std::string report_table(const EvaluationReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s", "precision", "#matches");
  out << line;
  for (double t : r.thresholds) {
    std::snprintf(line, sizeof line, " %9s", ("AUC@" + text::format_real(t)).c_str());
    out << line;
  }
  out << "\n";
  std::snprintf(line, sizeof line, "%-12.2f %10.1f", r.mean_precision, r.mean_matches);
  out << line;
  for (double a : r.auc) {
    std::snprintf(line, sizeof line, " %9.2f", a);
    out << line;
  }
  out << "\n";
  return out.str();
}

}  // namespace satdepth
