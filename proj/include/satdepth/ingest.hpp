#pragma once

#include <array>
#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "satdepth/geodesy.hpp"
#include "satdepth/raster.hpp"
#include "satdepth/rpc.hpp"
#include "satdepth/satdepth_map.hpp"

namespace satdepth {

// ---------------------------------------------------------------------------
// Keyword files (RPB, IMD)

/// One `NAME = value;` statement. Lists keep the parenthesized text.
struct KeywordEntry {
  std::string key;
  std::string value;
  bool has_value = true;
  bool operator==(const KeywordEntry&) const = default;
};

/// Tokenizes the `NAME = value;` grammar shared by RPB and IMD files.
/// Statements end at ';' or, for unterminated values, at end of line.
std::vector<KeywordEntry> parse_keywords(std::string_view text);

struct RpbDocument {
  static const std::array<const char*, 10> kScalarKeys;
  static const std::array<const char*, 4> kCoefficientKeys;

  std::map<std::string, double> scalars;
  std::map<std::string, std::array<double, 20>> coefficients;
  /// Unrecognized statements, in file order.
  std::vector<KeywordEntry> extras;

  bool operator==(const RpbDocument&) const = default;
};

/// Accepts the canonical RPC00B names (LINE_OFF, LINE_NUM_COEFF, ...) and
/// the WorldView camelCase aliases (lineOffset, lineNumCoef, ...).
RpbDocument parse_rpb(std::string_view text);
std::string serialize_rpb(const RpbDocument& doc);

RpcModel to_rpc_model(const RpbDocument& doc);
RpbDocument to_rpb_document(const RpcModel& cam);

RpcModel read_rpb(const std::string& path);
void write_rpb(const RpcModel& cam, const std::string& path);

using UtcTime = std::chrono::time_point<std::chrono::system_clock, std::chrono::microseconds>;

/// `YYYY-MM-DDTHH:MM:SS[.ffffff]Z`
UtcTime parse_utc(std::string_view text);
std::string format_utc(UtcTime t);

struct ImdRecord {
  std::string image_id;
  double sat_azimuth = 0.0;
  double sat_elevation = 90.0;
  double sun_azimuth = 0.0;
  double sun_elevation = 90.0;
  UtcTime acquisition_time{};
  bool operator==(const ImdRecord&) const = default;
};

/// Key aliases tried in order for each IMD field.
struct ImdKeyAliases {
  std::vector<std::string> image_id{"imageId", "productCatId", "CatId"};
  std::vector<std::string> sat_azimuth{"meanSatAz"};
  std::vector<std::string> sat_elevation{"meanSatEl"};
  std::vector<std::string> sun_azimuth{"meanSunAz"};
  std::vector<std::string> sun_elevation{"meanSunEl"};
  std::vector<std::string> acquisition_time{"firstLineTime", "earliestAcqTime"};
};

ImdRecord parse_imd(std::string_view text, const ImdKeyAliases& aliases = {});
std::string serialize_imd(const ImdRecord& rec);

// ---------------------------------------------------------------------------
// Rasters

enum class RasterFormat { Grd, GeoTiff };

struct RasterWriteOptions {
  /// Deflate strips when writing GeoTIFF.
  bool deflate = false;
};

inline constexpr std::string_view kGrdMagic = "SDGRD1\n";

/// Dispatches on magic bytes: `.grd` or little-endian strip GeoTIFF.
AnyRaster read_raster(const std::string& path);
/// Format chosen from the extension: `.tif`/`.tiff` -> GeoTIFF, else `.grd`.
void write_raster(const AnyRaster& grid, const std::string& path, const RasterWriteOptions& opts = {});

std::string encode_grd(const AnyRaster& grid);
AnyRaster decode_grd(std::string_view bytes);
std::string encode_geotiff(const AnyRaster& grid, const RasterWriteOptions& opts = {});
AnyRaster decode_geotiff(std::string_view bytes);

/// `<basename>_lat<ext>`, `<basename>_lon<ext>`, `<basename>_depth<ext>`.
void write_satdepth(const SatDepthMap& map, const std::string& basename, const std::string& ext = ".grd");
/// Tries `.grd` then `.tif`. Lat/lon planes stored as f32 are accepted
/// (about 1 m precision at f32); `warning` receives a note when that happens.
SatDepthMap read_satdepth(const std::string& basename, std::string* warning = nullptr);

// ---------------------------------------------------------------------------
// CSV records

struct GcpRecord {
  std::string gcp_id;
  GeoPoint position;
  bool operator==(const GcpRecord&) const = default;
};

enum class AnnotationStatus { Annotated, CannotAnnotate };

struct AnnotationRecord {
  std::string gcp_id;
  std::string image_id;
  std::optional<PixelPoint> pixel;
  AnnotationStatus status = AnnotationStatus::Annotated;
  bool operator==(const AnnotationRecord&) const = default;
};

struct MatchRecord {
  PixelPoint xi;
  PixelPoint xj;
  bool operator==(const MatchRecord&) const = default;
};

inline constexpr std::string_view kAnnotationHeader = "gcp_id,image_id,row,col,status";
inline constexpr std::string_view kMatchHeader = "row_i,col_i,row_j,col_j";
inline constexpr std::string_view kGcpHeader = "gcp_id,lat,lon,h";
inline constexpr std::string_view kBiasHeader = "image_id,db_row,db_col";

std::vector<AnnotationRecord> parse_annotations(std::string_view csv);
std::string serialize_annotations(const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> read_annotations(const std::string& path);
/// Appends records to `path` (creating it with a header) via temp + rename.
void append_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

std::vector<MatchRecord> parse_matches(std::string_view csv);
std::string serialize_matches(const std::vector<MatchRecord>& matches);

std::vector<GcpRecord> parse_gcps(std::string_view csv);
std::string serialize_gcps(const std::vector<GcpRecord>& gcps);

struct BiasRecord {
  std::string image_id;
  double db_row = 0.0;
  double db_col = 0.0;
};
std::string serialize_biases(const std::vector<BiasRecord>& biases);
std::vector<BiasRecord> parse_biases(std::string_view csv);

/// Directory layout of one tile.
struct TileLayout {
  std::string root;
  std::string images_dir() const { return root + "/DSM_Cropped_Images"; }
  std::string depth_dir() const { return root + "/Depth"; }
  std::string annotations_dir() const { return root + "/gcp/annotations"; }
  std::string rpb_path(const std::string& image) const { return images_dir() + "/" + image + ".RPB"; }
  std::string depth_basename(const std::string& image) const { return depth_dir() + "/" + image; }
  std::string annotation_csv(const std::string& gcp_id) const {
    return annotations_dir() + "/GCP_" + gcp_id + "_annotations.csv";
  }
};

}  // namespace satdepth
