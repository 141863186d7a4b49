// Command-line front end, the annotation HTTP backend and an end-to-end run
// over the packaged tile.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "annotate_server.hpp"
#include "cli.hpp"
#include "png.hpp"
#include "satdepth/alignment.hpp"
#include "satdepth/correspondence.hpp"
#include "satdepth/depthify.hpp"
#include "satdepth/gcp_accuracy.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/metrics.hpp"
#include "satdepth/pairs.hpp"
#include "satdepth/text.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>
#include <zlib.h>

using namespace satdepth;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kAoi = SATDEPTH_DATA_DIR "/aoi";

struct Result {
  int code;
  std::string out, err;
};

Result cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "satdepth");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("satdepth_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

std::string slurp(const std::string& p) { return text::read_file(p); }

// Value inside [..] on the help line of `flag`.
double help_default(const std::string& help, const std::string& flag) {
  std::istringstream in(help);
  std::string line;
  while (std::getline(in, line)) {
    const auto at = line.find(flag + " ");
    if (at == std::string::npos) continue;
    const auto open = line.find('[', at), close = line.find(']', open);
    REQUIRE(open != std::string::npos);
    return std::stod(line.substr(open + 1, close - open - 1));
  }
  FAIL("flag not in help: " << flag);
  return 0;
}

std::string img(const std::string& tile, const std::string& id, const std::string& ext) {
  return tile + "/DSM_Cropped_Images/" + id + ext;
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("help shows the library defaults") {
  const DepthifyConfig dc;
  const Result d = cli_run({"depthify", "--help"});
  REQUIRE(d.code == 0);
  CHECK(help_default(d.out, "--dz") == dc.dz);
  CHECK(help_default(d.out, "--block") == dc.block);
  CHECK(help_default(d.out, "--buffer") == dc.buffer_m);
  CHECK(help_default(d.out, "--max-failure-fraction") == dc.max_failure_fraction);

  const BaConfig bc;
  const Result b = cli_run({"ba", "--help"});
  CHECK(help_default(b.out, "--lambda") == bc.lambda);
  CHECK(help_default(b.out, "--max-iter") == bc.max_iter);
  CHECK(help_default(b.out, "--tol") == bc.tol);
  CHECK(help_default(b.out, "--merge-px") == bc.track_merge_px);

  CHECK(help_default(cli_run({"extract-matches", "--help"}).out, "--delta3d") == kDefaultDelta3d);
  CHECK(help_default(cli_run({"metrics", "--help"}).out, "--delta-epi") == kDefaultDeltaEpi);
  CHECK(help_default(cli_run({"fuse-dsm", "--help"}).out, "--top-n") == kDefaultTopN);
  const BalanceConfig lc;
  const std::string bal = cli_run({"balance", "--help"}).out;
  CHECK(help_default(bal, "--bins") == lc.n_bins);
  CHECK(help_default(bal, "--target") == lc.target_per_bin);
  CHECK(help_default(cli_run({"rotate-aug", "--help"}).out, "--size") == 448);
  const cli::AnnotateConfig ac;
  const std::string srv = cli_run({"serve-annotate", "--help"}).out;
  CHECK(help_default(srv, "--patch-size") == ac.patch_size);
  CHECK(help_default(srv, "--port") == ac.port);
}

TEST_CASE("top-level help lists every subcommand") {
  const Result r = cli_run({"--help"});
  CHECK(r.code == 0);
  for (const char* s : {"depthify", "extract-matches", "rotate-aug", "simulate-rotation", "ba", "triangulate",
                        "fuse-dsm", "metrics", "dsm-compare", "pairs", "balance", "coverage", "gcp-assess",
                        "apply-shift", "serve-annotate"})
    CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
}

TEST_CASE("usage errors exit 2, data errors exit 1") {
  SUBCASE("no subcommand") { CHECK(cli_run({}).code == cli::kExitUsage); }
  SUBCASE("unknown subcommand") { CHECK(cli_run({"frobnicate"}).code == cli::kExitUsage); }
  SUBCASE("missing required flag") {
    const Result r = cli_run({"depthify", "--dsm", "x.tif"});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.rfind("error: kind=usage message=\"", 0) == 0);
  }
  SUBCASE("bad value") { CHECK(cli_run({"--workers", "0", "dsm-compare", "--test", "a", "--truth", "b"}).code == 2); }
  SUBCASE("bad size string") {
    CHECK(cli_run({"coverage", "--camera", img(kAoi, "A", ".RPB"), "--size", "12by4", "--dem", kAoi + "/DEM.tif"})
              .code == cli::kExitUsage);
  }
  SUBCASE("missing file") {
    const Result r = cli_run({"dsm-compare", "--test", "/nonexistent/a.tif", "--truth", "/nonexistent/b.tif"});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.rfind("error: kind=format message=\"", 0) == 0);
    CHECK(r.err.back() == '\n');
  }
  SUBCASE("corrupt input") {
    TempDir t("corrupt");
    text::write_file_atomic(t / "bad.RPB", "lineOffset = what;\n");
    const Result r = cli_run({"coverage", "--camera", t / "bad.RPB", "--size", "10x10", "--dem", kAoi + "/DEM.tif"});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("kind=format") != std::string::npos);
  }
}

TEST_CASE("config file values apply and flags override them") {
  TempDir t("config");
  const std::vector<std::string> base = {"depthify",        "--camera", img(kAoi, "A", ".RPB"), "--dsm",
                                         kAoi + "/DSM.tif", "--dem", kAoi + "/DEM.tif", "--rows",   "20",                   "--cols",
                                         "30"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  auto depth = [&](const std::string& name) { return slurp(t / (name + "_depth.grd")); };
  REQUIRE(cli_run(with({"--out", t / "def"})).code == 0);
  REQUIRE(cli_run(with({"--out", t / "one", "--dz", "0.5", "--no-roof"})).code == 0);
  REQUIRE(depth("def") != depth("one"));

  text::write_file_atomic(t / "cfg.toml", "seed = 4\n[depthify]\ndz = 0.5\nno-roof = true\n");
  std::vector<std::string> a = with({"--out", t / "cfg"});
  a.insert(a.begin(), {"--config", t / "cfg.toml"});
  REQUIRE(cli_run(a).code == 0);
  CHECK(depth("cfg") == depth("one"));

  a = with({"--out", t / "over", "--dz", "0.25"});
  a.insert(a.begin(), {"--config", t / "cfg.toml"});
  REQUIRE(cli_run(a).code == 0);
  CHECK(depth("over") != depth("one"));
  CHECK(depth("over") != depth("def"));
}

TEST_CASE("png encoder writes a decodable grayscale image") {
  const std::vector<std::uint8_t> px = {0, 10, 20, 30, 40, 250};
  const std::string png = cli::encode_png_gray8(px, 2, 3);
  REQUIRE(png.size() > 8);
  CHECK(png.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0);
  auto be32 = [&](std::size_t o) {
    return (std::uint32_t(std::uint8_t(png[o])) << 24) | (std::uint32_t(std::uint8_t(png[o + 1])) << 16) |
           (std::uint32_t(std::uint8_t(png[o + 2])) << 8) | std::uint32_t(std::uint8_t(png[o + 3]));
  };
  CHECK(png.substr(12, 4) == "IHDR");
  CHECK(be32(16) == 3);
  CHECK(be32(20) == 2);
  // Walk chunks, check CRCs, inflate IDAT.
  std::string idat;
  for (std::size_t o = 8; o < png.size();) {
    const std::uint32_t len = be32(o);
    const std::string type = png.substr(o + 4, 4);
    const std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(png.data() + o + 4), len + 4);
    CHECK(crc == be32(o + 8 + len));
    if (type == "IDAT") idat += png.substr(o + 8, len);
    o += 12 + len;
  }
  std::vector<unsigned char> raw(2 * 4);
  uLongf n = raw.size();
  REQUIRE(uncompress(raw.data(), &n, reinterpret_cast<const Bytef*>(idat.data()), idat.size()) == Z_OK);
  REQUIRE(n == 8);
  const std::vector<unsigned char> want = {0, 0, 10, 20, 0, 30, 40, 250};
  CHECK(raw == want);
}

TEST_CASE("percentile stretch maps to 0..255 and blanks NaN") {
  Image im(2, 3);
  im << 1, 2, 3, 4, std::numeric_limits<float>::quiet_NaN(), 6;
  const auto px = cli::percentile_stretch(im, 0, 100);
  REQUIRE(px.size() == 6);
  CHECK(px[0] == 0);
  CHECK(px[5] == 255);
  CHECK(px[4] == 0);
  CHECK(px[1] < px[2]);
  const Image flat = Image::Constant(2, 2, 5.0f);
  for (auto v : cli::percentile_stretch(flat)) CHECK(v == 0);
}

// ---------------------------------------------------------------------------
// HTTP backend

namespace {

struct TileCopy : TempDir {
  TileCopy() : TempDir("tile") { fs::copy(kAoi, path / "aoi", fs::copy_options::recursive); }
  std::string root() const { return (path / "aoi").string(); }
};

}  // namespace

TEST_CASE("annotation server endpoints") {
  TileCopy tile;
  cli::AnnotateConfig cfg;
  cfg.tile = tile.root();
  cfg.port = 0;
  cfg.patch_size = 64;
  cli::AnnotateServer server(cfg);
  const int port = server.start_background();
  REQUIRE(port > 0);
  httplib::Client c("127.0.0.1", port);

  SUBCASE("healthz") {
    auto r = c.Get("/healthz");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body == "ok\n");
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
  }

  SUBCASE("gcps carries projections for every image") {
    auto r = c.Get("/gcps");
    REQUIRE(r);
    REQUIRE(r->status == 200);
    const json j = json::parse(r->body);
    const auto gcps = parse_gcps(slurp(tile.root() + "/gcp/gcps.csv"));
    REQUIRE(j.size() == gcps.size());
    const Camera a = read_rpb(img(tile.root(), "A", ".RPB"));
    for (std::size_t k = 0; k < gcps.size(); ++k) {
      CHECK(j[k]["gcp_id"] == gcps[k].gcp_id);
      REQUIRE(j[k]["images"].size() == 2);
      CHECK(j[k]["images"][0]["image_id"] == "A");
      const PixelPoint x = project(a, gcps[k].position);
      CHECK(j[k]["images"][0]["projected_row"].get<double>() == doctest::Approx(x.row).epsilon(1e-12));
      CHECK(j[k]["images"][0]["projected_col"].get<double>() == doctest::Approx(x.col).epsilon(1e-12));
      CHECK(j[k]["images"][0]["annotated"] == false);
    }
  }

  SUBCASE("patch is a centered PNG") {
    auto r = c.Get("/patch?gcp=P3&image=B&size=32");
    REQUIRE(r);
    REQUIRE(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "image/png");
    CHECK(r->body.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0);
    CHECK(std::uint8_t(r->body[19]) == 32);
    CHECK(std::uint8_t(r->body[23]) == 32);
    const auto gcps = parse_gcps(slurp(tile.root() + "/gcp/gcps.csv"));
    const PixelPoint x = project(read_rpb(img(tile.root(), "B", ".RPB")), gcps[2].position);
    CHECK(r->get_header_value("X-Patch-Origin") ==
          std::to_string(std::lround(x.row) - 16) + "," + std::to_string(std::lround(x.col) - 16));
    auto d = c.Get("/patch?gcp=P3&image=B");
    REQUIRE(d);
    CHECK(std::uint8_t(d->body[23]) == 64);
  }

  SUBCASE("patch errors") {
    CHECK(c.Get("/patch?gcp=ZZ&image=A")->status == 404);
    CHECK(c.Get("/patch?gcp=P1&image=Q")->status == 404);
    CHECK(c.Get("/patch?gcp=P1&image=A&size=0")->status == 400);
    CHECK(c.Get("/patch?gcp=P1&image=A&size=2.5")->status == 400);
    CHECK(c.Get("/patch?gcp=P1&image=A&size=abc")->status == 400);
  }

  SUBCASE("annotations round trip and append exactly one row") {
    const std::string csv = TileLayout{tile.root()}.annotation_csv("P2");
    auto g = c.Get("/annotations?gcp=P2");
    REQUIRE(g);
    CHECK(json::parse(g->body).empty());

    auto p = c.Post("/annotations", R"({"gcp_id":"P2","image_id":"A","status":"annotated","row":8.5,"col":61.25})",
                    "application/json");
    REQUIRE(p);
    CHECK(p->status == 200);
    const std::size_t rows1 = count_lines(slurp(csv));
    p = c.Post("/annotations", R"({"gcp_id":"P2","image_id":"B","status":"cannot_annotate"})", "application/json");
    CHECK(p->status == 200);
    CHECK(count_lines(slurp(csv)) == rows1 + 1);

    const json j = json::parse(c.Get("/annotations?gcp=P2")->body);
    REQUIRE(j.size() == 2);
    CHECK(j[0]["image_id"] == "A");
    CHECK(j[0]["row"] == 8.5);
    CHECK(j[0]["col"] == 61.25);
    CHECK(j[1]["status"] == "cannot_annotate");
    CHECK(j[1]["row"].is_null());

    const auto recs = read_annotations(csv);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].pixel->row == 8.5);

    const json all = json::parse(c.Get("/gcps")->body);
    CHECK(all[1]["images"][0]["annotated"] == true);
    CHECK(all[1]["images"][1]["status"] == "cannot_annotate");
    CHECK(all[0]["images"][0]["annotated"] == false);
  }

  SUBCASE("bad annotation bodies") {
    auto post = [&](const std::string& b) { return c.Post("/annotations", b, "application/json")->status; };
    CHECK(post("not json") == 400);
    CHECK(post(R"({"image_id":"A","row":1,"col":1})") == 400);
    CHECK(post(R"({"gcp_id":"P1","image_id":"A","status":"maybe","row":1,"col":1})") == 400);
    CHECK(post(R"({"gcp_id":"P1","image_id":"A","status":"annotated"})") == 400);
    CHECK(post(R"({"gcp_id":"P1","image_id":"A","status":"cannot_annotate","row":3,"col":4})") == 400);
    CHECK(post(R"({"gcp_id":"ZZ","image_id":"A","row":1,"col":1})") == 404);
    CHECK(post(R"({"gcp_id":"P1","image_id":"Q","row":1,"col":1})") == 404);
    CHECK(c.Get("/annotations?gcp=ZZ")->status == 404);
    CHECK_FALSE(fs::exists(TileLayout{tile.root()}.annotation_csv("P1")));
  }

  SUBCASE("concurrent posts all land") {
    std::vector<std::thread> ts;
    for (int k = 0; k < 8; ++k)
      ts.emplace_back([port, k] {
        httplib::Client cc("127.0.0.1", port);
        const std::string body = R"({"gcp_id":"P4","image_id":"A","row":)" + std::to_string(k) + R"(,"col":1})";
        cc.Post("/annotations", body, "application/json");
      });
    for (auto& t : ts) t.join();
    const auto recs = read_annotations(TileLayout{tile.root()}.annotation_csv("P4"));
    CHECK(recs.size() == 8);
  }
  server.stop();
}

TEST_CASE("serve-annotate subcommand serves until stopped") {
  TileCopy tile;
  int status = 0;
  std::string body;
  cli::set_serve_ready_hook([&](int port, std::function<void()> stop) {
    httplib::Client c("127.0.0.1", port);
    for (int tries = 0; tries < 50; ++tries) {
      if (auto r = c.Get("/healthz")) {
        status = r->status;
        body = r->body;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    stop();
  });
  const Result r = cli_run({"serve-annotate", "--tile", tile.root(), "--port", "0"});
  cli::set_serve_ready_hook(nullptr);
  CHECK(r.code == 0);
  CHECK(r.out.rfind("listening on http://127.0.0.1:", 0) == 0);
  CHECK(status == 200);
  CHECK(body == "ok\n");
}

TEST_CASE("serve-annotate on a missing tile is a data error") {
  const Result r = cli_run({"serve-annotate", "--tile", "/nonexistent/tile", "--port", "0"});
  CHECK(r.code == cli::kExitData);
}

// ---------------------------------------------------------------------------
// End to end on the packaged tile

TEST_CASE("tiled depthify equals the sequential pass byte for byte") {
  TempDir t("tiling");
  for (const char* id : {"A", "B"}) {
    const std::vector<std::string> common = {"depthify", "--camera", img(kAoi, id, ".RPB"), "--dsm",
                                             kAoi + "/DSM.tif", "--dem", kAoi + "/DEM.tif", "--image",
                                             img(kAoi, id, ".tif")};
    auto seq = common, til = common;
    seq.insert(seq.end(), {"--sequential", "--out", t / (std::string("seq_") + id)});
    til.insert(til.begin(), {"--workers", "4"});
    til.insert(til.end(), {"--block", "64", "--out", t / (std::string("til_") + id)});
    REQUIRE(cli_run(seq).code == 0);
    REQUIRE(cli_run(til).code == 0);
    for (const char* plane : {"_lat.grd", "_lon.grd", "_depth.grd"})
      CHECK(slurp(t / (std::string("seq_") + id + plane)) == slurp(t / (std::string("til_") + id + plane)));
  }
}

TEST_CASE("packaged tile: exact matches give perfect precision and pose") {
  TempDir t("e2e");
  for (const char* id : {"A", "B"})
    REQUIRE(cli_run({"depthify", "--camera", img(kAoi, id, ".RPB"), "--dsm", kAoi + "/DSM.tif", "--dem",
                     kAoi + "/DEM.tif", "--image", img(kAoi, id, ".tif"), "--dz", "1", "--out", t / id})
                .code == 0);
  const std::vector<std::string> ex = {"extract-matches", "--map-i",  t / "A", "--map-j", t / "B", "--camera-i",
                                       img(kAoi, "A", ".RPB"), "--camera-j", img(kAoi, "B", ".RPB")};
  auto a1 = ex, a2 = ex;
  a1.insert(a1.end(), {"--out", t / "m1.csv", "--f-out", t / "f.json"});
  a2.insert(a2.end(), {"--out", t / "m2.csv"});
  REQUIRE(cli_run(a1).code == 0);
  REQUIRE(cli_run(a2).code == 0);
  CHECK(slurp(t / "m1.csv") == slurp(t / "m2.csv"));
  const auto matches = parse_matches(slurp(t / "m1.csv"));
  CHECK(matches.size() > 1000);

  const Result m = cli_run({"metrics", "--matches", t / "m1.csv", "--gt-f", t / "f.json", "--out", t / "r.csv"});
  REQUIRE(m.code == 0);
  CHECK(m.out.find("100.00    100.00    100.00") != std::string::npos);
  const auto rows = text::split(slurp(t / "r.csv"), '\n');
  REQUIRE(rows.size() >= 2);
  const auto f = text::split(rows[1], ',');
  REQUIRE(f.size() == 4);
  CHECK(std::stod(f[2]) == 100.0);
  CHECK(std::stod(f[3]) < 1e-6);

  SUBCASE("seeded subsampling is deterministic") {
    auto s = ex;
    s.insert(s.begin(), {"--seed", "3"});
    s.insert(s.end(), {"--sample", "200", "--out", t / "s3a.csv"});
    REQUIRE(cli_run(s).code == 0);
    s.back() = t / "s3b.csv";
    REQUIRE(cli_run(s).code == 0);
    s[1] = "4";
    s.back() = t / "s4.csv";
    REQUIRE(cli_run(s).code == 0);
    CHECK(slurp(t / "s3a.csv") == slurp(t / "s3b.csv"));
    CHECK(slurp(t / "s3a.csv") != slurp(t / "s4.csv"));
    CHECK(parse_matches(slurp(t / "s3a.csv")).size() == 200);
  }

  SUBCASE("rotated matches stay perfect against the rotated F") {
    REQUIRE(cli_run({"--seed", "11", "simulate-rotation", "--matches", t / "m1.csv", "--rows", "160", "--cols",
                     "160", "--gt-f", t / "f.json", "--out", t / "rot.csv", "--f-out", t / "frot.json"})
                .code == 0);
    const Result r = cli_run({"metrics", "--matches", t / "rot.csv", "--gt-f", t / "frot.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("100.00") != std::string::npos);
  }

  SUBCASE("pairs and balance") {
    REQUIRE(cli_run({"pairs", "--imd", img(kAoi, "A", ".IMD"), img(kAoi, "B", ".IMD"), "--map", t / "A", t / "B",
                     "--out", t / "pairs.csv"})
                .code == 0);
    const auto pairs = parse_pairs(slurp(t / "pairs.csv"));
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].dt == doctest::Approx(46.0 + 460.75 / 86400.0).epsilon(1e-12));
    REQUIRE(cli_run({"balance", "--pairs", t / "pairs.csv", "--out", t / "bal.csv"}).code == 0);
    CHECK(parse_pairs(slurp(t / "bal.csv")).size() == 1);
  }
}

TEST_CASE("gcp-assess over annotations made through the server") {
  TileCopy tile;
  const TileLayout L{tile.root()};
  for (const char* id : {"A", "B"})
    REQUIRE(cli_run({"depthify", "--camera", L.rpb_path(id), "--dsm", tile.root() + "/DSM.tif", "--dem",
                     tile.root() + "/DEM.tif", "--image", img(tile.root(), id, ".tif"), "--dz", "1", "--out",
                     L.depth_basename(id)})
                .code == 0);

  // Annotate every visible GCP at its exact projection.
  cli::AnnotateConfig cfg;
  cfg.tile = tile.root();
  cfg.port = 0;
  cli::AnnotateServer server(cfg);
  httplib::Client c("127.0.0.1", server.start_background());
  const json gcps = json::parse(c.Get("/gcps")->body);
  for (const auto& g : gcps)
    for (const auto& im : g["images"]) {
      json b = {{"gcp_id", g["gcp_id"]}, {"image_id", im["image_id"]}};
      b["row"] = im["projected_row"];
      b["col"] = im["projected_col"];
      REQUIRE(c.Post("/annotations", b.dump(), "application/json")->status == 200);
    }
  server.stop();

  const Result r = cli_run({"gcp-assess", "--tile", tile.root(), "--n-sims", "50", "--out",
                            tile / "report.csv", "--shift-out", tile / "shift.json"});
  REQUIRE(r.code == 0);
  // Annotations sit exactly on the projections of visible GCPs.
  const auto rows = text::split(slurp(tile / "report.csv"), '\n');
  CHECK(rows.size() > 6);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].empty()) continue;
    const auto f = text::split(rows[k], ',');
    CHECK_MESSAGE(std::stod(f.back()) < 1e-6, rows[k]);
  }
  const EcefShift s = shift_from_json(slurp(tile / "shift.json"));
  CHECK(s.norm() < 1e-6);
}

TEST_CASE("the packaged tile is what the generator writes") {
  TempDir t("gen");
  const std::string cmd = std::string(MAKE_SYNTHETIC_AOI) + " " + (t / "aoi") + " > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(kAoi)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), kAoi).string();
    CHECK_MESSAGE(slurp(e.path().string()) == slurp(t / ("aoi/" + rel)), rel);
    ++n;
  }
  CHECK(n == 9);
}
