#include "cli_io.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "satdepth/text.hpp"

namespace satdepth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

Camera read_camera(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  if (ext == ".rpb") return read_rpb(path);
  if (ext == ".json") return affine_camera_from_json(text::read_file(path));
  throw FormatError("camera '" + path + "': expected .RPB or .json");
}

std::string affine_camera_to_json(const AffineCamera& cam) {
  const auto& a = cam.linear();
  json j;
  j["linear"] = {{a(0, 0), a(0, 1), a(0, 2)}, {a(1, 0), a(1, 1), a(1, 2)}};
  j["anchor"] = {{"lat", cam.anchor().lat}, {"lon", cam.anchor().lon}, {"h", cam.anchor().h}};
  j["anchor_pixel"] = {{"row", cam.anchor_pixel()(0)}, {"col", cam.anchor_pixel()(1)}};
  return j.dump(2) + "\n";
}

AffineCamera affine_camera_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    AffineCamera::Linear a;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = j.at("linear").at(r).at(c).get<double>();
    const auto& x0 = j.at("anchor");
    const auto& p0 = j.at("anchor_pixel");
    return AffineCamera(a, {x0.at("lat").get<double>(), x0.at("lon").get<double>(), x0.at("h").get<double>()},
                        {p0.at("row").get<double>(), p0.at("col").get<double>()});
  } catch (const json::exception& e) {
    throw FormatError(std::string("affine camera: ") + e.what());
  }
}

std::string fundamental_to_json(const AffineFundamental& f) {
  const json j = {{"a", f.a}, {"b", f.b}, {"c", f.c}, {"d", f.d}, {"e", f.e}};
  return j.dump(2) + "\n";
}

AffineFundamental fundamental_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>(), j.at("d").get<double>(),
            j.at("e").get<double>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("fundamental matrix: ") + e.what());
  }
}

std::vector<GeoPoint> parse_points(std::string_view csv) {
  const bool with_residual = csv.substr(0, kTriangulatedHeader.size()) == kTriangulatedHeader;
  const auto rows = with_residual ? text::csv_rows(csv, kTriangulatedHeader, 4) : text::csv_rows(csv, kPointHeader, 3);
  std::vector<GeoPoint> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "point line " + std::to_string(i + 2);
    out.push_back({text::parse_real_or_throw(rows[i][0], where + " lat"),
                   text::parse_real_or_throw(rows[i][1], where + " lon"),
                   text::parse_real_or_throw(rows[i][2], where + " h")});
  }
  return out;
}

std::string serialize_points(const std::vector<GeoPoint>& pts) {
  std::ostringstream out;
  out << kPointHeader << "\n";
  for (const auto& p : pts)
    out << text::format_real(p.lat) << "," << text::format_real(p.lon) << "," << text::format_real(p.h) << "\n";
  return out.str();
}

RasterF64 read_raster_f64(const std::string& path) { return to_f64(read_raster(path)); }

Image read_image(const std::string& path) { return read_raster_f64(path).values.cast<float>(); }

std::string find_raster(const std::string& dir, const std::string& id) {
  for (const char* ext : {".tif", ".grd"}) {
    const std::string p = dir + "/" + id + ext;
    if (fs::exists(p)) return p;
  }
  return {};
}

}  // namespace satdepth::cli
