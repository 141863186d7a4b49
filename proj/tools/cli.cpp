#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>

#include "annotate_server.hpp"
#include "cli_io.hpp"
#include "satdepth/alignment.hpp"
#include "satdepth/correspondence.hpp"
#include "satdepth/depthify.hpp"
#include "satdepth/gcp_accuracy.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/metrics.hpp"
#include "satdepth/pairs.hpp"
#include "satdepth/text.hpp"

namespace satdepth::cli {

namespace fs = std::filesystem;

namespace {

ServeReadyHook g_serve_hook;
std::atomic<AnnotateServer*> g_server{nullptr};

void on_signal(int) {
  if (AnnotateServer* s = g_server.load()) s->stop();
}

enum class Level { Debug, Info, Warn, Error };

struct Log {
  std::ostream& err;
  Level level = Level::Info;
  void operator()(Level l, const std::string& msg) const {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (l >= level) err << names[int(l)] << ": " << msg << "\n";
  }
};

struct Globals {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string log_level = "info";
};

struct Context {
  Globals g;
  std::ostream& out;
  Log log;
};

void write_text(const std::string& path, const std::string& contents) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  text::write_file_atomic(path, contents);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

GeoPoint mean_valid_point(const SatDepthMap& m) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  long long n = 0;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m.valid(r, c)) {
        sum += m.at(r, c).vec();
        ++n;
      }
  if (n == 0) throw DomainError("depth map has no valid pixel");
  return GeoPoint::from_vec(sum / double(n));
}

ImageDims parse_dims(const std::string& s) {
  const auto parts = text::split(s, 'x');
  double h = 0, w = 0;
  if (parts.size() != 2 || !text::parse_real(parts[0], h) || !text::parse_real(parts[1], w) || h < 1 || w < 1 ||
      h != std::floor(h) || w != std::floor(w))
    throw CLI::ValidationError("--size", "expected HEIGHTxWIDTH, got '" + s + "'");
  return {int(h), int(w)};
}

std::vector<MatchRecord> to_records(const std::vector<Correspondence>& cs) {
  std::vector<MatchRecord> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back({c.xi, c.xj});
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands. Each registers its flags and its action.

using Action = std::function<void(Context&)>;
using Actions = std::map<std::string, Action>;

void add_depthify(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("depthify", "Render the SatDepth map of one image");
  struct Opts {
    std::string camera, dsm, dem, water, image, out, ext = ".grd";
    int rows = 0, cols = 0;
    bool sequential = false, tiled = false, no_roof = false, zero_init = false;
    DepthifyConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--camera", o->camera, "Camera file (.RPB or affine .json)")->required();
  sub->add_option("--dsm", o->dsm, "DSM raster")->required();
  sub->add_option("--dem", o->dem, "DEM raster (the DSM when omitted)");
  sub->add_option("--water", o->water, "Water mask raster, nonzero = water");
  sub->add_option("--image", o->image, "Image raster giving the output size");
  sub->add_option("--rows", o->rows, "Output height when --image is not given");
  sub->add_option("--cols", o->cols, "Output width when --image is not given");
  sub->add_option("--out", o->out, "Output basename for the _lat/_lon/_depth triple")->required();
  sub->add_option("--ext", o->ext, "Raster extension (.grd or .tif)");
  sub->add_option("--dz", o->cfg.dz, "Height step of the sweep, meters");
  sub->add_option("--block", o->cfg.block, "Block edge for tiling, pixels");
  sub->add_option("--buffer", o->cfg.buffer_m, "World buffer around each block, meters");
  sub->add_option("--max-failure-fraction", o->cfg.max_failure_fraction, "Abort above this projection failure rate");
  sub->add_flag("--no-roof", o->no_roof, "Skip the Z = roof sample");
  sub->add_flag("--zero-init", o->zero_init, "Start the z-buffer at 0");
  auto* seq = sub->add_flag("--sequential", o->sequential, "Single pass over the whole DSM");
  auto* til = sub->add_flag("--tiled", o->tiled, "Block-parallel pass (default)");
  seq->excludes(til);
  acts[sub->get_name()] = [o](Context& ctx) {
    DepthifyInputs in;
    in.cam = read_camera(o->camera);
    in.dsm = read_raster_f64(o->dsm);
    in.dem = o->dem.empty() ? in.dsm : read_raster_f64(o->dem);
    if (!o->water.empty()) in.water = read_raster_f64(o->water);
    if (!o->image.empty()) {
      const RasterF64 img = read_raster_f64(o->image);
      in.image = {img.height(), img.width()};
    } else {
      if (o->rows < 1 || o->cols < 1) throw CLI::ValidationError("depthify", "--image or --rows/--cols required");
      in.image = {o->rows, o->cols};
    }
    DepthifyConfig cfg = o->cfg;
    cfg.workers = ctx.g.workers;
    cfg.include_roof = !o->no_roof;
    cfg.zero_init = o->zero_init;
    DepthifyStats st;
    const SatDepthMap m = o->sequential ? depthify_sequential(in, cfg, &st) : depthify_tiled(in, cfg, &st);
    for (const auto& w : st.warnings) ctx.log(Level::Warn, w);
    ensure_parent(o->out);
    write_satdepth(m, o->out, o->ext);
    ctx.out << "valid_pixels=" << m.valid_count() << " samples=" << st.samples << " failures=" << st.failures
            << "\n";
  };
}

void add_extract_matches(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("extract-matches", "Ground-truth correspondences between two depth maps");
  struct Opts {
    std::string map_i, map_j, camera_i, camera_j, out, f_out;
    int stride = 1;
    double delta3d = kDefaultDelta3d;
    std::size_t sample = 0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--map-i", o->map_i, "Depth map basename of image i")->required();
  sub->add_option("--map-j", o->map_j, "Depth map basename of image j")->required();
  sub->add_option("--camera-j", o->camera_j, "Camera of image j")->required();
  sub->add_option("--camera-i", o->camera_i, "Camera of image i (needed for --f-out)");
  sub->add_option("--stride", o->stride, "Pixel stride over image i");
  sub->add_option("--delta3d", o->delta3d, "ECEF acceptance distance, meters");
  sub->add_option("--sample", o->sample, "Keep a seeded random subset of this size (0 = all)");
  sub->add_option("--out", o->out, "Matches CSV")->required();
  sub->add_option("--f-out", o->f_out, "Ground-truth affine F as JSON");
  acts[sub->get_name()] = [o](Context& ctx) {
    std::string warn;
    const SatDepthMap mi = read_satdepth(o->map_i, &warn), mj = read_satdepth(o->map_j, &warn);
    if (!warn.empty()) ctx.log(Level::Warn, warn);
    const Camera cj = read_camera(o->camera_j);
    auto cs = extract_gt_matches(mi, cj, mj, o->stride, o->delta3d);
    if (o->sample > 0 && o->sample < cs.size()) {
      std::vector<Correspondence> keep;
      std::mt19937_64 rng(ctx.g.seed);
      std::sample(cs.begin(), cs.end(), std::back_inserter(keep), o->sample, rng);
      cs = std::move(keep);
    }
    write_text(o->out, serialize_matches(to_records(cs)));
    if (!o->f_out.empty()) {
      if (o->camera_i.empty()) throw CLI::ValidationError("extract-matches", "--f-out needs --camera-i");
      const GeoPoint anchor = mean_valid_point(mi);
      const AffineFundamental f =
          affine_fundamental(local_affine(read_camera(o->camera_i), anchor), local_affine(cj, anchor));
      write_text(o->f_out, fundamental_to_json(f));
    }
    ctx.out << "matches=" << cs.size() << "\n";
  };
}

void add_rotate_aug(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("rotate-aug", "Crop-rotate-crop patch with its composed camera");
  struct Opts {
    std::string image, map, camera, out;
    double row = 0, col = 0, theta = 0;
    int size = 448;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--image", o->image, "Image raster")->required();
  sub->add_option("--map", o->map, "Depth map basename")->required();
  sub->add_option("--camera", o->camera, "Camera file")->required();
  sub->add_option("--row", o->row, "Patch center row")->required();
  sub->add_option("--col", o->col, "Patch center column")->required();
  sub->add_option("--size", o->size, "Patch size p");
  sub->add_option("--theta", o->theta, "Rotation, degrees");
  sub->add_option("--out", o->out, "Output prefix")->required();
  acts[sub->get_name()] = [o](Context& ctx) {
    const Image img = read_image(o->image);
    const SatDepthMap map = read_satdepth(o->map);
    const Camera cam = read_camera(o->camera);
    const PixelPoint center{o->row, o->col};
    AffineCamera aff;
    if (const auto* a = std::get_if<AffineCamera>(&cam)) {
      aff = *a;
    } else {
      const auto x = lookup(map, center);
      if (!x) throw DomainError("rotate-aug: patch center has no depth");
      aff = local_affine(cam, *x);
    }
    const RotatedPatch rp = rotate_augment(img, map, aff, center, o->size, o->theta);
    ensure_parent(o->out);
    RasterF32 pimg;
    pimg.values = rp.half.image;
    write_raster(pimg, o->out + "_image.grd");
    write_satdepth(rp.half.map, o->out + "_map");
    write_text(o->out + "_camera.json", affine_camera_to_json(rp.half.cam));
    ctx.out << "bbox=" << rp.bbox_size << " valid_pixels=" << rp.half.map.valid_count() << "\n";
  };
}

void add_simulate_rotation(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("simulate-rotation", "Rotate image j of a match set about its center");
  struct Opts {
    std::string matches, gt_f, out, f_out;
    int rows = 0, cols = 0;
    std::optional<double> theta;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--matches", o->matches, "Matches CSV")->required();
  sub->add_option("--rows", o->rows, "Height of image j")->required();
  sub->add_option("--cols", o->cols, "Width of image j")->required();
  sub->add_option("--theta", o->theta, "Rotation in degrees (uniform in [0, 360) from --seed when omitted)");
  sub->add_option("--gt-f", o->gt_f, "Ground-truth F to rotate along");
  sub->add_option("--out", o->out, "Rotated matches CSV")->required();
  sub->add_option("--f-out", o->f_out, "Rotated F JSON (needs --gt-f)");
  acts[sub->get_name()] = [o](Context& ctx) {
    double theta = 0;
    if (o->theta) {
      theta = *o->theta;
    } else {
      std::mt19937_64 rng(ctx.g.seed);
      theta = std::uniform_real_distribution<double>(0.0, 360.0)(rng);
    }
    const Eigen::Vector2d pivot((o->cols - 1) / 2.0, (o->rows - 1) / 2.0);
    const Eigen::Matrix3d r = rotation_about(theta * kDegToRad, pivot);
    // Same canvas: matches rotated out of the frame are dropped.
    std::vector<MatchRecord> ms;
    for (auto m : parse_matches(text::read_file(o->matches))) {
      const Eigen::Vector3d y = r * Eigen::Vector3d(m.xj.col, m.xj.row, 1.0);
      if (y(0) < 0 || y(1) < 0 || y(0) > o->cols - 1 || y(1) > o->rows - 1) continue;
      m.xj = {y(1), y(0)};
      ms.push_back(m);
    }
    write_text(o->out, serialize_matches(ms));
    if (!o->f_out.empty()) {
      if (o->gt_f.empty()) throw CLI::ValidationError("simulate-rotation", "--f-out needs --gt-f");
      // x_i^T F x_j = x_i^T (F R^-1) (R x_j).
      const Eigen::Matrix3d f = fundamental_from_json(text::read_file(o->gt_f)).matrix() * r.inverse();
      write_text(o->f_out, fundamental_to_json(normalized({f(0, 2), f(1, 2), f(2, 0), f(2, 1), f(2, 2)})));
    }
    ctx.out << "theta_deg=" << text::format_real(theta) << " kept=" << ms.size() << "\n";
  };
}

void add_ba(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("ba", "Bias-correcting bundle adjustment");
  struct Opts {
    std::vector<std::string> cameras, pairs;
    std::string out;
    BaConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--camera", o->cameras, "Camera files; image k is the k-th")->required();
  sub->add_option("--pair", o->pairs, "Pairwise matches as I:J:path")->required();
  sub->add_option("--lambda", o->cfg.lambda, "Bias regularization weight");
  sub->add_option("--max-iter", o->cfg.max_iter, "LM iteration cap");
  sub->add_option("--tol", o->cfg.tol, "Relative cost decrease stop");
  sub->add_option("--merge-px", o->cfg.track_merge_px, "Track node merge distance, pixels");
  sub->add_option("--pin", o->cfg.pinned, "Images whose bias stays zero");
  sub->add_option("--bias-warning", o->cfg.bias_warning_px, "Warn above this bias magnitude, pixels");
  sub->add_option("--out", o->out, "Bias CSV")->required();
  acts[sub->get_name()] = [o](Context& ctx) {
    std::vector<Camera> cams;
    for (const auto& p : o->cameras) cams.push_back(read_camera(p));
    PairMatches pm;
    for (const auto& spec : o->pairs) {
      const auto a = spec.find(':'), b = spec.find(':', a == std::string::npos ? a : a + 1);
      double i = -1, j = -1;
      if (a == std::string::npos || b == std::string::npos || !text::parse_real(spec.substr(0, a), i) ||
          !text::parse_real(spec.substr(a + 1, b - a - 1), j) || i < 0 || j < 0 || i >= double(cams.size()) ||
          j >= double(cams.size()) || i == j)
        throw CLI::ValidationError("--pair", "expected I:J:path with distinct camera indices, got '" + spec + "'");
      pm[{int(i), int(j)}] = parse_matches(text::read_file(spec.substr(b + 1)));
    }
    const BaResult res = bundle_adjust(cams, pm, o->cfg);
    for (const auto& w : res.warnings) ctx.log(Level::Warn, w);
    std::vector<BiasRecord> out;
    for (std::size_t k = 0; k < cams.size(); ++k)
      out.push_back({stem(o->cameras[k]), res.biases[k](0), res.biases[k](1)});
    write_text(o->out, serialize_biases(out));
    ctx.out << "tracks=" << res.tracks.size() << " iterations=" << res.iterations
            << " rms_px=" << text::format_real(res.rms_px) << " converged=" << (res.converged ? 1 : 0) << "\n";
  };
}

void add_triangulate(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("triangulate", "Triangulate pairwise matches with frozen biases");
  struct Opts {
    std::string camera_i, camera_j, matches, biases, out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--camera-i", o->camera_i, "Camera of image i")->required();
  sub->add_option("--camera-j", o->camera_j, "Camera of image j")->required();
  sub->add_option("--matches", o->matches, "Matches CSV")->required();
  sub->add_option("--biases", o->biases, "Bias CSV keyed by camera file stem");
  sub->add_option("--out", o->out, "Point CSV (lat,lon,h,residual_px)")->required();
  acts[sub->get_name()] = [o](Context& ctx) {
    const std::vector<Camera> cams = {read_camera(o->camera_i), read_camera(o->camera_j)};
    std::vector<Eigen::Vector2d> b(2, Eigen::Vector2d::Zero());
    if (!o->biases.empty()) {
      const auto recs = parse_biases(text::read_file(o->biases));
      const std::string ids[2] = {stem(o->camera_i), stem(o->camera_j)};
      for (int k = 0; k < 2; ++k)
        for (const auto& r : recs)
          if (r.image_id == ids[k]) b[k] = {r.db_row, r.db_col};
    }
    const auto pts = triangulate(cams, b, 0, 1, parse_matches(text::read_file(o->matches)));
    std::string csv = std::string(kTriangulatedHeader) + "\n";
    for (const auto& p : pts)
      csv += text::format_real(p.world.lat) + "," + text::format_real(p.world.lon) + "," +
             text::format_real(p.world.h) + "," + text::format_real(p.residual_px) + "\n";
    write_text(o->out, csv);
    ctx.out << "points=" << pts.size() << "\n";
  };
}

void add_fuse_dsm(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("fuse-dsm", "Top-N median fusion of point clouds into a DSM");
  struct Opts {
    std::vector<std::string> points;
    std::string out;
    double gsd = 0.25;
    int top_n = kDefaultTopN;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--points", o->points, "Point CSV files, one cloud each")->required();
  sub->add_option("--gsd", o->gsd, "Cell size, meters");
  sub->add_option("--top-n", o->top_n, "Heights kept per cell before the median");
  sub->add_option("--out", o->out, "DSM raster")->required();
  acts[sub->get_name()] = [o](Context& ctx) {
    std::vector<std::vector<GeoPoint>> clouds;
    for (const auto& p : o->points) clouds.push_back(parse_points(text::read_file(p)));
    const RasterF64 dsm = fuse_and_rasterize(clouds, o->gsd, o->top_n);
    ensure_parent(o->out);
    write_raster(dsm, o->out);
    ctx.out << "height=" << dsm.height() << " width=" << dsm.width() << "\n";
  };
}

void add_metrics(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("metrics", "Precision and pose AUC of match sets");
  struct Opts {
    std::vector<std::string> matches, gt_f;
    std::vector<double> thresholds{5, 10, 20};
    double delta_epi = kDefaultDeltaEpi;
    RansacConfig ransac;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--matches", o->matches, "Matches CSV, one per pair")->required();
  sub->add_option("--gt-f", o->gt_f, "Ground-truth F JSON, one per pair")->required();
  sub->add_option("--delta-epi", o->delta_epi, "Epipolar precision threshold, pixels");
  sub->add_option("--thresholds", o->thresholds, "AUC thresholds, degrees");
  sub->add_option("--ransac-threshold", o->ransac.threshold_px, "RANSAC inlier threshold, pixels");
  sub->add_option("--ransac-iter", o->ransac.max_iter, "RANSAC iteration cap");
  sub->add_option("--out", o->out, "Per-pair CSV report");
  acts[sub->get_name()] = [o](Context& ctx) {
    if (o->matches.size() != o->gt_f.size())
      throw CLI::ValidationError("metrics", "one --gt-f per --matches required");
    std::vector<PairEvaluation> evals;
    RansacConfig rc = o->ransac;
    rc.seed = ctx.g.seed;
    for (std::size_t k = 0; k < o->matches.size(); ++k)
      evals.push_back(evaluate_pair(stem(o->matches[k]), parse_matches(text::read_file(o->matches[k])),
                                    fundamental_from_json(text::read_file(o->gt_f[k])), o->delta_epi, rc));
    const EvaluationReport rep = summarize(evals, o->thresholds);
    if (!o->out.empty()) write_text(o->out, report_csv(rep));
    ctx.out << report_table(rep);
  };
}

void add_dsm_compare(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("dsm-compare", "Completeness, RMSE and median error of a DSM");
  struct Opts {
    std::string test, truth;
    double tolerance = 1.0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--test", o->test, "DSM under test")->required();
  sub->add_option("--truth", o->truth, "Reference DSM")->required();
  sub->add_option("--tolerance", o->tolerance, "Completeness tolerance, meters");
  acts[sub->get_name()] = [o](Context& ctx) {
    const DsmComparison c = dsm_compare(read_raster_f64(o->test), read_raster_f64(o->truth), o->tolerance);
    ctx.out << "completeness,rmse,mae,valid_count\n"
            << text::format_real(c.completeness) << "," << text::format_real(c.rmse) << ","
            << text::format_real(c.mae) << "," << c.valid_count << "\n";
  };
}

void add_pairs(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("pairs", "View-angle, track-angle and time difference of image pairs");
  struct Opts {
    std::vector<std::string> imd, maps;
    std::string split, out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--imd", o->imd, "IMD files")->required();
  sub->add_option("--map", o->maps, "Depth map basenames in --imd order")->required();
  sub->add_option("--split", o->split, "Split label for every row");
  sub->add_option("--out", o->out, "Pairs CSV")->required();
  acts[sub->get_name()] = [o](Context& ctx) {
    if (o->imd.size() != o->maps.size()) throw CLI::ValidationError("pairs", "one --map per --imd required");
    std::vector<ImdRecord> meta;
    std::vector<SatDepthMap> maps;
    for (std::size_t k = 0; k < o->imd.size(); ++k) {
      meta.push_back(parse_imd(text::read_file(o->imd[k])));
      maps.push_back(read_satdepth(o->maps[k]));
    }
    std::vector<PairRecord> out;
    for (std::size_t i = 0; i < meta.size(); ++i)
      for (std::size_t j = i + 1; j < meta.size(); ++j)
        out.push_back(make_pair_record(meta[i], meta[j], maps[i], maps[j], o->split));
    write_text(o->out, serialize_pairs(out));
    ctx.out << "pairs=" << out.size() << "\n";
  };
}

void add_balance(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("balance", "Balance pairs over view-angle bins");
  struct Opts {
    std::string pairs, out;
    BalanceConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--pairs", o->pairs, "Pairs CSV")->required();
  sub->add_option("--bins", o->cfg.n_bins, "Number of alpha_v bins");
  sub->add_option("--target", o->cfg.target_per_bin, "Pairs kept per bin");
  sub->add_option("--range-max", o->cfg.range_max, "Upper end of the histogram (observed max when omitted)");
  sub->add_option("--out", o->out, "Balanced pairs CSV")->required();
  acts[sub->get_name()] = [o](Context& ctx) {
    BalanceConfig cfg = o->cfg;
    cfg.seed = ctx.g.seed;
    const auto in = parse_pairs(text::read_file(o->pairs));
    const auto out = balance_pairs(in, cfg);
    write_text(o->out, serialize_pairs(out));
    ctx.out << "kept=" << out.size() << " of " << in.size() << "\n";
  };
}

void add_coverage(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("coverage", "Per-cell camera coverage heatmap");
  struct Opts {
    std::vector<std::string> cameras, sizes;
    std::string dem, out;
    std::optional<double> h_ref;
    int n_min = 1;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--camera", o->cameras, "Camera files")->required();
  sub->add_option("--size", o->sizes, "Image sizes HEIGHTxWIDTH, one per camera or one for all")->required();
  sub->add_option("--dem", o->dem, "DEM raster defining the grid")->required();
  sub->add_option("--h-ref", o->h_ref, "Reference height (the DEM mean when omitted)");
  sub->add_option("--n-min", o->n_min, "Camera count required inside the reported rectangle");
  sub->add_option("--out", o->out, "Count raster");
  acts[sub->get_name()] = [o](Context& ctx) {
    std::vector<Camera> cams;
    for (const auto& p : o->cameras) cams.push_back(read_camera(p));
    if (o->sizes.size() != 1 && o->sizes.size() != cams.size())
      throw CLI::ValidationError("coverage", "give one --size or one per --camera");
    std::vector<ImageDims> dims;
    for (std::size_t k = 0; k < cams.size(); ++k) dims.push_back(parse_dims(o->sizes[o->sizes.size() == 1 ? 0 : k]));
    const RasterF64 dem = read_raster_f64(o->dem);
    double h = 0.0;
    if (o->h_ref) {
      h = *o->h_ref;
    } else {
      long long n = 0;
      for (int r = 0; r < dem.height(); ++r)
        for (int c = 0; c < dem.width(); ++c)
          if (dem.valid(r, c)) {
            h += dem.values(r, c);
            ++n;
          }
      if (n == 0) throw DomainError("coverage: DEM has no valid cell");
      h /= double(n);
    }
    const Coverage cov = coverage_heatmap(cams, dims, dem.gt, dem.height(), dem.width(), h, o->n_min);
    if (!o->out.empty()) {
      ensure_parent(o->out);
      write_raster(cov.counts, o->out);
    }
    ctx.out << "h_ref=" << text::format_real(h) << " best_row0=" << cov.best.row0 << " best_col0=" << cov.best.col0
            << " best_rows=" << cov.best.rows << " best_cols=" << cov.best.cols << "\n";
  };
}

/// Images of a tile: every RPB in the image directory with a depth map.
std::vector<std::string> tile_images(const TileLayout& t) {
  std::vector<std::string> ids;
  if (!fs::is_directory(t.images_dir())) throw FormatError("missing '" + t.images_dir() + "'");
  for (const auto& e : fs::directory_iterator(t.images_dir()))
    if (e.path().extension() == ".RPB") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

void add_gcp_assess(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("gcp-assess", "GCP error report and Monte-Carlo shift");
  struct Opts {
    std::string tile, gcps, out, shift_out;
    int n_sims = 1000;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--tile", o->tile, "Tile root directory")->required();
  sub->add_option("--gcps", o->gcps, "GCP CSV (<tile>/gcp/gcps.csv when omitted)");
  sub->add_option("--n-sims", o->n_sims, "Monte-Carlo simulations");
  sub->add_option("--out", o->out, "Error report CSV");
  sub->add_option("--shift-out", o->shift_out, "Shift JSON sidecar");
  acts[sub->get_name()] = [o](Context& ctx) {
    const TileLayout t{o->tile};
    const auto gcps = parse_gcps(text::read_file(o->gcps.empty() ? o->tile + "/gcp/gcps.csv" : o->gcps));
    std::map<std::string, SatDepthMap> maps;
    std::map<std::string, Camera> cams;
    for (const auto& id : tile_images(t)) {
      cams[id] = read_rpb(t.rpb_path(id));
      try {
        maps[id] = read_satdepth(t.depth_basename(id));
      } catch (const FormatError&) {
        ctx.log(Level::Warn, "no depth map for '" + id + "'");
      }
    }
    std::vector<AnnotationRecord> anns;
    if (fs::is_directory(t.annotations_dir())) {
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(t.annotations_dir()))
        if (e.path().extension() == ".csv") files.push_back(e.path().string());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        const auto recs = read_annotations(f);
        anns.insert(anns.end(), recs.begin(), recs.end());
      }
    }
    const GcpErrorReport rep = gcp_errors(gcps, anns, maps, cams);
    for (const auto& i : rep.issues) ctx.log(Level::Warn, i.gcp_id + "/" + i.image_id + ": " + i.reason);
    if (!o->out.empty()) write_text(o->out, error_report_csv(rep));
    ctx.out << "abs3d_mean=" << text::format_real(rep.abs3d.mean) << " rel3d_mean=" << text::format_real(rep.rel3d.mean)
            << " rel2d_mean=" << text::format_real(rep.rel2d.mean) << "\n";
    if (!o->shift_out.empty()) {
      const ShiftEstimate est = monte_carlo_shift(shift_observations(rep), o->n_sims, ctx.g.seed);
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (const auto& g : gcps) c += g.position.vec();
      write_text(o->shift_out, shift_to_json(est.shift, GeoPoint::from_vec(c / double(gcps.size()))));
      ctx.out << "shift=" << text::format_real(est.shift.x()) << "," << text::format_real(est.shift.y()) << ","
              << text::format_real(est.shift.z()) << " before=" << text::format_real(est.before_mean)
              << " after=" << text::format_real(est.after_mean) << "\n";
    }
  };
}

void add_apply_shift(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("apply-shift", "Remove an ECEF shift from a DSM, depth map or RPC");
  struct Opts {
    std::string shift, dsm, dsm_out, map, map_out, camera, camera_out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--shift", o->shift, "Shift JSON sidecar")->required();
  sub->add_option("--dsm", o->dsm, "DSM raster");
  sub->add_option("--dsm-out", o->dsm_out, "Corrected DSM");
  sub->add_option("--map", o->map, "Depth map basename");
  sub->add_option("--map-out", o->map_out, "Corrected depth map basename");
  sub->add_option("--camera", o->camera, "RPB file");
  sub->add_option("--camera-out", o->camera_out, "Corrected RPB file");
  acts[sub->get_name()] = [o](Context& ctx) {
    GeoPoint center;
    const EcefShift s = shift_from_json(text::read_file(o->shift), &center);
    int done = 0;
    const auto pair_ok = [](const std::string& a, const std::string& b, const char* what) {
      if (a.empty() != b.empty()) throw CLI::ValidationError("apply-shift", std::string(what) + " needs both in and out");
      return !a.empty();
    };
    if (pair_ok(o->dsm, o->dsm_out, "--dsm")) {
      ensure_parent(o->dsm_out);
      write_raster(apply_shift(read_raster_f64(o->dsm), s, center), o->dsm_out);
      ++done;
    }
    if (pair_ok(o->map, o->map_out, "--map")) {
      ensure_parent(o->map_out);
      write_satdepth(apply_shift(read_satdepth(o->map), s, center), o->map_out);
      ++done;
    }
    if (pair_ok(o->camera, o->camera_out, "--camera")) {
      ensure_parent(o->camera_out);
      write_rpb(apply_shift(read_rpb(o->camera), s, center), o->camera_out);
      ++done;
    }
    if (done == 0) throw CLI::ValidationError("apply-shift", "nothing to shift");
    ctx.out << "shifted=" << done << "\n";
  };
}

void add_serve_annotate(CLI::App& app, Actions& acts) {
  auto* sub = app.add_subcommand("serve-annotate", "HTTP backend of the GCP annotation tool");
  auto cfg = std::make_shared<AnnotateConfig>();
  sub->add_option("--tile", cfg->tile, "Tile root directory")->required();
  sub->add_option("--gcps", cfg->gcps, "GCP CSV (<tile>/gcp/gcps.csv when omitted)");
  sub->add_option("--host", cfg->host, "Bind address");
  sub->add_option("--port", cfg->port, "Port, 0 picks a free one");
  sub->add_option("--patch-size", cfg->patch_size, "Default patch size, pixels");
  sub->add_option("--stretch-lo", cfg->stretch_lo, "Lower stretch percentile");
  sub->add_option("--stretch-hi", cfg->stretch_hi, "Upper stretch percentile");
  acts[sub->get_name()] = [cfg](Context& ctx) {
    AnnotateServer server(*cfg);
    const int port = server.bind();
    if (port <= 0) throw DomainError("serve-annotate: cannot bind " + cfg->host);
    ctx.out << "listening on http://" << cfg->host << ":" << port << "\n" << std::flush;
    ctx.log(Level::Info, std::to_string(server.images().size()) + " images");
    g_server.store(&server);
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    std::thread ready;
    if (g_serve_hook) ready = std::thread([&server, port] { g_serve_hook(port, [&server] { server.stop(); }); });
    server.listen();
    if (ready.joinable()) ready.join();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    g_server.store(nullptr);
  };
}

}  // namespace

void set_serve_ready_hook(ServeReadyHook hook) { g_serve_hook = std::move(hook); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SatDepth: depth maps, ground-truth matches and accuracy tools for satellite stereo"};
  app.name(args.empty() ? "satdepth" : fs::path(args[0]).filename().string());
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed of every randomized step");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  Actions actions;
  for (auto add : {add_depthify, add_extract_matches, add_rotate_aug, add_simulate_rotation, add_ba, add_triangulate,
                   add_fuse_dsm, add_metrics, add_dsm_compare, add_pairs, add_balance, add_coverage, add_gcp_assess,
                   add_apply_shift, add_serve_annotate})
    add(app, actions);

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: kind=usage message=\"" << escape(e.what()) << "\"\n";
    return kExitUsage;
  }

  static const std::map<std::string, Level> levels = {
      {"debug", Level::Debug}, {"info", Level::Info}, {"warn", Level::Warn}, {"error", Level::Error}};
  Context ctx{g, out, Log{err, levels.at(g.log_level)}};
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    actions.at(name)(ctx);
  } catch (const CLI::ParseError& e) {
    err << "error: kind=usage message=\"" << escape(e.what()) << "\"\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: kind=io message=\"" << escape(e.what()) << "\"\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: kind=internal message=\"" << escape(e.what()) << "\"\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace satdepth::cli
