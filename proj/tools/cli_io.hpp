#pragma once

// File plumbing shared by the subcommands: camera files, F and affine camera
// sidecars, point clouds and images.

#include <string>
#include <vector>

#include "satdepth/correspondence.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/rpc.hpp"

namespace satdepth::cli {

/// File name without directory and last extension.
std::string stem(const std::string& path);

/// `.RPB` (any case) as RPC, `.json` as an affine camera sidecar.
Camera read_camera(const std::string& path);

std::string affine_camera_to_json(const AffineCamera& cam);
AffineCamera affine_camera_from_json(const std::string& text);

std::string fundamental_to_json(const AffineFundamental& f);
AffineFundamental fundamental_from_json(const std::string& text);

inline constexpr std::string_view kPointHeader = "lat,lon,h";
inline constexpr std::string_view kTriangulatedHeader = "lat,lon,h,residual_px";

/// Accepts either header; the residual column is ignored.
std::vector<GeoPoint> parse_points(std::string_view csv);
std::string serialize_points(const std::vector<GeoPoint>& pts);

/// Any raster file as a float image.
Image read_image(const std::string& path);
RasterF64 read_raster_f64(const std::string& path);

/// `<dir>/<id>.tif` or `<dir>/<id>.grd`, whichever exists; empty if neither.
std::string find_raster(const std::string& dir, const std::string& id);

}  // namespace satdepth::cli
