// Writes the packaged synthetic tile: a box world seen by two linear-RPC
// cameras, with PAN images, IMD metadata and a handful of GCPs.
//
//   make_synthetic_aoi <out_dir> [--seed N]

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "satdepth/depthify.hpp"
#include "satdepth/geodesy.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/synthetic.hpp"
#include "satdepth/text.hpp"

using namespace satdepth;

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic demo tile"};
  std::string out;
  std::uint64_t seed = 7;
  int size = 160;
  app.add_option("out", out, "Tile root")->required();
  app.add_option("--seed", seed, "World seed")->capture_default_str();
  app.add_option("--size", size, "Image edge, pixels")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const TileLayout t{out};
    std::filesystem::create_directories(t.images_dir());
    std::filesystem::create_directories(out + "/gcp");

    std::mt19937_64 rng(seed);
    synth::BoxWorldConfig wc;
    wc.integer_heights = true;
    const synth::BoxWorld w = synth::box_world(wc, rng);
    write_raster(w.dsm, out + "/DSM.tif");
    write_raster(w.dem, out + "/DEM.tif");

    struct View {
      const char* id;
      AffineCamera cam;
      ImageDims dims;
      double sat_az, sat_el;
      const char* time;
    };
    // A is grid-aligned with one pixel per meter of height along +col, so with
    // integer heights every depth-map pixel is the exact projection of its
    // point. B is a rotated oblique view at a finer GSD.
    synth::ViewConfig vb;
    vb.gsd_m = 0.5;
    vb.roll_deg = -18.0;
    vb.parallax_px_per_m = 0.9;
    vb.parallax_dir_deg = 160.0;
    vb.anchor_pixel = {size / 2.0, size / 2.0};
    const View views[] = {
        {"A", synth::grid_camera(w.dsm.gt, 1.0), {wc.height, wc.width + 40}, 95.0, 70.0, "2015-03-02T16:04:11.250000Z"},
        {"B", synth::view_camera(wc.center, vb), {size, size}, 260.0, 62.0, "2015-04-17T16:11:52.000000Z"}};
    for (const auto& v : views) {
      write_rpb(synth::rpc_from_affine(v.cam), t.rpb_path(v.id));

      RasterF32 img;
      img.values = synth::textured_image(v.dims, seed * 31 + std::uint64_t(v.id[0]));
      write_raster(img, t.images_dir() + "/" + v.id + ".tif");

      ImdRecord meta;
      meta.image_id = v.id;
      meta.sat_azimuth = v.sat_az;
      meta.sat_elevation = v.sat_el;
      meta.sun_azimuth = 150.0;
      meta.sun_elevation = 55.0;
      meta.acquisition_time = parse_utc(v.time);
      text::write_file_atomic(t.images_dir() + "/" + v.id + ".IMD", serialize_imd(meta));
    }

    // GCPs on cell centers at their DSM height, kept only where both views
    // see them (no taller box in front).
    std::vector<SatDepthMap> maps;
    DepthifyConfig dc;
    dc.dz = 1.0;
    for (const auto& v : views)
      maps.push_back(depthify_sequential({v.dims, synth::rpc_from_affine(v.cam), w.dsm, w.dem, std::nullopt}, dc));
    auto visible = [&](const GeoPoint& p) {
      for (std::size_t k = 0; k < maps.size(); ++k) {
        const auto q = lookup(maps[k], views[k].cam.project(p));
        if (!q || (geo_to_ecef(*q) - geo_to_ecef(p)).norm() > 0.5) return false;
      }
      return true;
    };
    std::vector<GcpRecord> gcps;
    const int cells[][2] = {{8, 8},   {8, 52},  {32, 32}, {52, 10}, {50, 50}, {20, 40},
                            {12, 20}, {40, 20}, {28, 52}, {56, 30}, {4, 30},  {44, 40}};
    for (const auto& rc : cells) {
      const LatLon ll = pixel_to_geo(w.dsm.gt, rc[0], rc[1]);
      const GeoPoint p{ll.lat, ll.lon, w.dsm.values(rc[0], rc[1])};
      if (gcps.size() < 6 && visible(p)) gcps.push_back({"P" + std::to_string(gcps.size() + 1), p});
    }
    text::write_file_atomic(out + "/gcp/gcps.csv", serialize_gcps(gcps));
  } catch (const Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
