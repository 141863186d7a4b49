#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <json.hpp>

#include "satdepth/error.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/text.hpp"

namespace satdepth {

namespace {

// ---------------------------------------------------------------------------
// little-endian byte helpers

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
void put_at(std::string& out, std::size_t pos, T v) {
  std::memcpy(out.data() + pos, &v, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t pos) {
  if (pos + sizeof(T) > bytes.size() || pos + sizeof(T) < pos) throw FormatError("truncated raster file");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  return v;
}

std::size_t element_size(DType t) {
  switch (t) {
    case DType::U16:
      return 2;
    case DType::F32:
      return 4;
    case DType::F64:
      return 8;
  }
  return 0;
}

template <typename T>
void append_payload(std::string& out, const Grid<T>& g) {
  out.append(reinterpret_cast<const char*>(g.data()), sizeof(T) * static_cast<std::size_t>(g.size()));
}

template <typename T>
Raster<T> raster_from_payload(std::string_view payload, int h, int w, const GeoTransform& gt, T nodata) {
  Raster<T> r(h, w, gt, nodata);
  std::memcpy(r.values.data(), payload.data(), payload.size());
  return r;
}

AnyRaster make_raster(DType t, std::string_view payload, int h, int w, const GeoTransform& gt,
                      double nodata) {
  switch (t) {
    case DType::U16:
      return raster_from_payload<std::uint16_t>(payload, h, w, gt, static_cast<std::uint16_t>(nodata));
    case DType::F32:
      return raster_from_payload<float>(payload, h, w, gt, static_cast<float>(nodata));
    case DType::F64:
      return raster_from_payload<double>(payload, h, w, gt, nodata);
  }
  throw FormatError("unsupported dtype");
}

struct RasterView {
  DType dtype;
  int height, width;
  GeoTransform gt;
  double nodata;
  std::string payload;
};

RasterView view_of(const AnyRaster& grid) {
  return std::visit(
      [](const auto& r) {
        using T = typename std::decay_t<decltype(r)>::value_type;
        RasterView v{dtype_of<T>(), r.height(), r.width(), r.gt, static_cast<double>(r.nodata), {}};
        append_payload(v.payload, r.values);
        return v;
      },
      grid);
}

void check_dims(long long h, long long w) {
  if (h < 0 || w < 0 || h > (1 << 20) || w > (1 << 20) || (h == 0) != (w == 0))
    throw FormatError("raster dimensions out of range");
}

}  // namespace

// ---------------------------------------------------------------------------
// .grd

std::string encode_grd(const AnyRaster& grid) {
  const RasterView v = view_of(grid);
  nlohmann::json header = {
      {"width", v.width},
      {"height", v.height},
      {"dtype", dtype_name(v.dtype)},
      {"geotransform", {v.gt.origin_lon, v.gt.origin_lat, v.gt.pixel_size_lon, v.gt.pixel_size_lat}},
  };
  if (std::isnan(v.nodata))
    header["nodata"] = "NaN";
  else
    header["nodata"] = v.nodata;
  const std::string h = header.dump();

  std::string out(kGrdMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  out += v.payload;
  return out;
}

AnyRaster decode_grd(std::string_view bytes) {
  if (bytes.substr(0, kGrdMagic.size()) != kGrdMagic) throw FormatError("not a .grd raster");
  std::size_t pos = kGrdMagic.size();
  const auto hlen = get<std::uint32_t>(bytes, pos);
  pos += 4;
  if (pos + hlen > bytes.size()) throw FormatError(".grd header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, hlen));
    pos += hlen;
    const long long w = header.at("width").get<long long>();
    const long long h = header.at("height").get<long long>();
    check_dims(h, w);
    const DType dt = dtype_from_name(header.at("dtype").get<std::string>());
    const auto& g = header.at("geotransform");
    if (!g.is_array() || g.size() != 4) throw FormatError(".grd geotransform must have 4 entries");
    const GeoTransform gt{g[0].get<double>(), g[1].get<double>(), g[2].get<double>(), g[3].get<double>()};
    const auto& nd = header.at("nodata");
    const double nodata = nd.is_string() && nd.get<std::string>() == "NaN"
                              ? std::numeric_limits<double>::quiet_NaN()
                              : nd.get<double>();
    const std::size_t expected = static_cast<std::size_t>(w * h) * element_size(dt);
    if (bytes.size() - pos != expected)
      throw FormatError(".grd payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                        std::to_string(expected));
    return make_raster(dt, bytes.substr(pos), int(h), int(w), gt, nodata);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(".grd header: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// GeoTIFF (classic, little-endian, strips)

namespace {

enum TiffType : std::uint16_t { kByte = 1, kAscii = 2, kShort = 3, kLong = 4, kDouble = 12 };

std::size_t tiff_type_size(std::uint16_t t) {
  switch (t) {
    case kByte:
    case kAscii:
    case 7:  // UNDEFINED
    case 6:  // SBYTE
      return 1;
    case kShort:
    case 8:  // SSHORT
      return 2;
    case kLong:
    case 9:   // SLONG
    case 11:  // FLOAT
      return 4;
    case 5:   // RATIONAL
    case 10:  // SRATIONAL
    case kDouble:
      return 8;
    default:
      return 0;
  }
}

struct TagOut {
  std::uint16_t tag;
  std::uint16_t type;
  std::uint32_t count;
  std::string data;  // little-endian payload
};

TagOut tag_shorts(std::uint16_t tag, const std::vector<std::uint16_t>& v) {
  TagOut t{tag, kShort, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put(t.data, x);
  return t;
}

TagOut tag_longs(std::uint16_t tag, const std::vector<std::uint32_t>& v) {
  TagOut t{tag, kLong, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put(t.data, x);
  return t;
}

TagOut tag_doubles(std::uint16_t tag, const std::vector<double>& v) {
  TagOut t{tag, kDouble, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put(t.data, x);
  return t;
}

TagOut tag_ascii(std::uint16_t tag, const std::string& s) {
  TagOut t{tag, kAscii, static_cast<std::uint32_t>(s.size() + 1), s};
  t.data.push_back('\0');
  return t;
}

std::string deflate_bytes(std::string_view in) {
  uLongf cap = compressBound(static_cast<uLong>(in.size()));
  std::string out(cap, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &cap, reinterpret_cast<const Bytef*>(in.data()),
                static_cast<uLong>(in.size()), Z_DEFAULT_COMPRESSION) != Z_OK)
    throw FormatError("deflate failed");
  out.resize(cap);
  return out;
}

std::string inflate_bytes(std::string_view in, std::size_t expected) {
  std::string out(expected, '\0');
  uLongf len = static_cast<uLongf>(expected);
  const int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len,
                            reinterpret_cast<const Bytef*>(in.data()), static_cast<uLong>(in.size()));
  if (rc != Z_OK || len != expected) throw FormatError("corrupt deflate strip");
  return out;
}

constexpr std::uint16_t kTagWidth = 256, kTagLength = 257, kTagBits = 258, kTagCompression = 259,
                        kTagPhotometric = 262, kTagStripOffsets = 273, kTagSamples = 277,
                        kTagRowsPerStrip = 278, kTagStripBytes = 279, kTagPlanar = 284, kTagPredictor = 317,
                        kTagTileWidth = 322, kTagSampleFormat = 339, kTagPixelScale = 33550,
                        kTagTiepoint = 33922, kTagTransformation = 34264, kTagGeoKeys = 34735, kTagNodata = 42113;

}  // namespace

std::string encode_geotiff(const AnyRaster& grid, const RasterWriteOptions& opts) {
  const RasterView v = view_of(grid);
  const std::size_t esize = element_size(v.dtype);
  const std::size_t row_bytes = esize * static_cast<std::size_t>(v.width);
  const int rows_per_strip = v.height == 0 ? 1 : std::max(1, static_cast<int>(8192 / std::max<std::size_t>(row_bytes, 1)));
  const int nstrips = v.height == 0 ? 0 : (v.height + rows_per_strip - 1) / rows_per_strip;

  std::string out = "II";
  put<std::uint16_t>(out, 42);
  put<std::uint32_t>(out, 0);  // IFD offset, patched below

  std::vector<std::uint32_t> offsets, counts;
  for (int s = 0; s < nstrips; ++s) {
    const int r0 = s * rows_per_strip;
    const int r1 = std::min(v.height, r0 + rows_per_strip);
    std::string_view raw(v.payload.data() + r0 * row_bytes, (r1 - r0) * row_bytes);
    const std::string strip = opts.deflate ? deflate_bytes(raw) : std::string(raw);
    offsets.push_back(static_cast<std::uint32_t>(out.size()));
    counts.push_back(static_cast<std::uint32_t>(strip.size()));
    out += strip;
    if (out.size() % 2) out.push_back('\0');
  }

  const std::uint16_t sample_format = v.dtype == DType::U16 ? 1 : 3;
  std::vector<TagOut> tags = {
      tag_longs(kTagWidth, {static_cast<std::uint32_t>(v.width)}),
      tag_longs(kTagLength, {static_cast<std::uint32_t>(v.height)}),
      tag_shorts(kTagBits, {static_cast<std::uint16_t>(esize * 8)}),
      tag_shorts(kTagCompression, {static_cast<std::uint16_t>(opts.deflate ? 8 : 1)}),
      tag_shorts(kTagPhotometric, {1}),
      tag_longs(kTagStripOffsets, offsets),
      tag_shorts(kTagSamples, {1}),
      tag_longs(kTagRowsPerStrip, {static_cast<std::uint32_t>(rows_per_strip)}),
      tag_longs(kTagStripBytes, counts),
      tag_shorts(kTagPlanar, {1}),
      tag_shorts(kTagSampleFormat, {sample_format}),
      tag_doubles(kTagPixelScale, {v.gt.pixel_size_lon, v.gt.pixel_size_lat, 0.0}),
      tag_doubles(kTagTiepoint, {0.0, 0.0, 0.0, v.gt.origin_lon, v.gt.origin_lat, 0.0}),
      // Geographic WGS84, PixelIsArea.
      tag_shorts(kTagGeoKeys, {1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, 2048, 0, 1, 4326}),
      tag_ascii(kTagNodata, std::isnan(v.nodata) ? "nan" : text::format_real(v.nodata)),
  };

  // Out-of-line tag payloads, then the IFD.
  std::vector<std::uint32_t> data_offsets(tags.size(), 0);
  for (std::size_t k = 0; k < tags.size(); ++k) {
    if (tags[k].data.size() > 4) {
      data_offsets[k] = static_cast<std::uint32_t>(out.size());
      out += tags[k].data;
      if (out.size() % 2) out.push_back('\0');
    }
  }
  const std::size_t ifd = out.size();
  put_at<std::uint32_t>(out, 4, static_cast<std::uint32_t>(ifd));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(tags.size()));
  for (std::size_t k = 0; k < tags.size(); ++k) {
    put(out, tags[k].tag);
    put(out, tags[k].type);
    put(out, tags[k].count);
    if (tags[k].data.size() > 4) {
      put(out, data_offsets[k]);
    } else {
      std::string inl = tags[k].data;
      inl.resize(4, '\0');
      out += inl;
    }
  }
  put<std::uint32_t>(out, 0);
  if (out.size() > 0xFFFFFFFFull) throw FormatError("raster too large for classic TIFF");
  return out;
}

AnyRaster decode_geotiff(std::string_view bytes) {
  if (bytes.size() < 8) throw FormatError("truncated TIFF");
  if (bytes.substr(0, 2) == "MM") throw FormatError("big-endian TIFF is not supported");
  if (bytes.substr(0, 2) != "II" || get<std::uint16_t>(bytes, 2) != 42)
    throw FormatError("not a classic little-endian TIFF");

  const std::size_t ifd = get<std::uint32_t>(bytes, 4);
  const std::uint16_t n = get<std::uint16_t>(bytes, ifd);

  struct TagIn {
    std::uint16_t type;
    std::uint32_t count;
    std::string_view data;
  };
  std::map<std::uint16_t, TagIn> tags;
  for (std::uint16_t k = 0; k < n; ++k) {
    const std::size_t e = ifd + 2 + 12 * std::size_t(k);
    const auto tag = get<std::uint16_t>(bytes, e);
    const auto type = get<std::uint16_t>(bytes, e + 2);
    const auto count = get<std::uint32_t>(bytes, e + 4);
    const std::size_t tsize = tiff_type_size(type);
    if (tsize == 0) continue;
    const std::size_t total = tsize * count;
    std::size_t off = e + 8;
    if (total > 4) off = get<std::uint32_t>(bytes, e + 8);
    if (off + total > bytes.size() || off + total < off) throw FormatError("TIFF tag data out of range");
    tags[tag] = {type, count, bytes.substr(off, total)};
  }

  const auto ints = [&](std::uint16_t tag) {
    auto it = tags.find(tag);
    if (it == tags.end()) throw FormatError("TIFF missing tag " + std::to_string(tag));
    std::vector<std::uint64_t> v;
    for (std::uint32_t i = 0; i < it->second.count; ++i) {
      if (it->second.type == kShort)
        v.push_back(get<std::uint16_t>(it->second.data, 2 * i));
      else if (it->second.type == kLong)
        v.push_back(get<std::uint32_t>(it->second.data, 4 * i));
      else
        throw FormatError("TIFF tag " + std::to_string(tag) + " has unexpected type");
    }
    return v;
  };
  const auto int_or = [&](std::uint16_t tag, std::uint64_t dflt) {
    return tags.count(tag) ? ints(tag).at(0) : dflt;
  };
  const auto doubles = [&](std::uint16_t tag) {
    auto it = tags.find(tag);
    if (it == tags.end() || it->second.type != kDouble)
      throw FormatError("TIFF missing georeferencing tag " + std::to_string(tag));
    std::vector<double> v;
    for (std::uint32_t i = 0; i < it->second.count; ++i) v.push_back(get<double>(it->second.data, 8 * i));
    return v;
  };

  if (tags.count(kTagTransformation)) throw FormatError("rotated/sheared GeoTIFF transforms are not supported");
  if (tags.count(kTagTileWidth)) throw FormatError("tiled TIFF is not supported");
  if (int_or(kTagPredictor, 1) != 1) throw FormatError("TIFF predictor is not supported");
  if (int_or(kTagSamples, 1) != 1) throw FormatError("only single-band TIFF is supported");
  const std::uint64_t compression = int_or(kTagCompression, 1);
  if (compression != 1 && compression != 8 && compression != 32946)
    throw FormatError("unsupported TIFF compression " + std::to_string(compression));

  const long long w = static_cast<long long>(ints(kTagWidth).at(0));
  const long long h = static_cast<long long>(ints(kTagLength).at(0));
  check_dims(h, w);
  const std::uint64_t bits = int_or(kTagBits, 1);
  const std::uint64_t fmt = int_or(kTagSampleFormat, 1);
  DType dt;
  if (bits == 16 && fmt == 1)
    dt = DType::U16;
  else if (bits == 32 && fmt == 3)
    dt = DType::F32;
  else if (bits == 64 && fmt == 3)
    dt = DType::F64;
  else
    throw FormatError("unsupported TIFF sample type");

  const auto scale = doubles(kTagPixelScale);
  const auto tie = doubles(kTagTiepoint);
  if (scale.size() < 2 || tie.size() < 6) throw FormatError("malformed GeoTIFF georeferencing");
  // Tiepoint may reference any raster position.
  const GeoTransform gt{tie[3] - tie[0] * scale[0], tie[4] + tie[1] * scale[1], scale[0], scale[1]};

  double nodata = std::numeric_limits<double>::quiet_NaN();
  if (auto it = tags.find(kTagNodata); it != tags.end()) {
    std::string s(it->second.data);
    while (!s.empty() && s.back() == '\0') s.pop_back();
    s = std::string(text::trim(s));
    if (s != "nan" && s != "NaN" && !s.empty()) nodata = text::parse_real_or_throw(s, "GDAL_NODATA");
  }

  const std::size_t row_bytes = element_size(dt) * static_cast<std::size_t>(w);
  const std::size_t rows_per_strip = std::max<std::uint64_t>(1, int_or(kTagRowsPerStrip, std::uint64_t(h)));
  const auto offsets = h ? ints(kTagStripOffsets) : std::vector<std::uint64_t>{};
  const auto counts = h ? ints(kTagStripBytes) : std::vector<std::uint64_t>{};
  const std::size_t nstrips = h ? (h + rows_per_strip - 1) / rows_per_strip : 0;
  if (offsets.size() != nstrips || counts.size() != nstrips) throw FormatError("TIFF strip table mismatch");

  std::string payload;
  payload.reserve(row_bytes * h);
  for (std::size_t s = 0; s < nstrips; ++s) {
    const std::size_t rows = std::min<std::size_t>(rows_per_strip, h - s * rows_per_strip);
    const std::size_t expect = rows * row_bytes;
    if (offsets[s] + counts[s] > bytes.size()) throw FormatError("TIFF strip out of range");
    const std::string_view raw = bytes.substr(offsets[s], counts[s]);
    if (compression == 1) {
      if (raw.size() < expect) throw FormatError("TIFF strip truncated");
      payload.append(raw.substr(0, expect));
    } else {
      payload += inflate_bytes(raw, expect);
    }
  }
  return make_raster(dt, payload, int(h), int(w), gt, nodata);
}

// ---------------------------------------------------------------------------

AnyRaster read_raster(const std::string& path) {
  const std::string bytes = text::read_file(path);
  if (std::string_view(bytes).substr(0, kGrdMagic.size()) == kGrdMagic) return decode_grd(bytes);
  if (bytes.size() >= 2 && (bytes.substr(0, 2) == "II" || bytes.substr(0, 2) == "MM"))
    return decode_geotiff(bytes);
  throw FormatError("'" + path + "' is neither .grd nor GeoTIFF");
}

void write_raster(const AnyRaster& grid, const std::string& path, const RasterWriteOptions& opts) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".tif" || ext == ".tiff")
    text::write_file_atomic(path, encode_geotiff(grid, opts));
  else
    text::write_file_atomic(path, encode_grd(grid));
}

void write_satdepth(const SatDepthMap& map, const std::string& basename, const std::string& ext) {
  const GeoTransform identity{};
  RasterF64 lat, lon;
  lat.values = map.lat;
  lat.gt = identity;
  lon.values = map.lon;
  lon.gt = identity;
  RasterF32 ht;
  ht.values = map.ht;
  ht.gt = identity;
  write_raster(lat, basename + "_lat" + ext);
  write_raster(lon, basename + "_lon" + ext);
  write_raster(ht, basename + "_depth" + ext);
}

SatDepthMap read_satdepth(const std::string& basename, std::string* warning) {
  std::string ext;
  for (const char* e : {".grd", ".tif"}) {
    if (std::filesystem::exists(basename + "_depth" + e)) {
      ext = e;
      break;
    }
  }
  if (ext.empty()) throw FormatError("no SatDepth map found at '" + basename + "'");

  const AnyRaster lat = read_raster(basename + "_lat" + ext);
  const AnyRaster lon = read_raster(basename + "_lon" + ext);
  const AnyRaster ht = read_raster(basename + "_depth" + ext);
  const RasterF64 lat64 = to_f64(lat), lon64 = to_f64(lon), ht64 = to_f64(ht);
  if (lat64.height() != ht64.height() || lat64.width() != ht64.width() || lon64.height() != ht64.height() ||
      lon64.width() != ht64.width())
    throw FormatError("SatDepth planes for '" + basename + "' differ in shape");
  if (warning && (std::holds_alternative<RasterF32>(lat) || std::holds_alternative<RasterF32>(lon)))
    *warning = "lat/lon planes stored as f32; positional precision limited to about 1 m";

  SatDepthMap m(ht64.height(), ht64.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      const double a = lat64.values(r, c), b = lon64.values(r, c), z = ht64.values(r, c);
      const int nan_count = int(std::isnan(a)) + int(std::isnan(b)) + int(std::isnan(z));
      if (nan_count == 3) continue;
      if (nan_count != 0)
        throw FormatError("SatDepth planes disagree on validity at (" + std::to_string(r) + ", " +
                          std::to_string(c) + ")");
      m.set(r, c, {a, b, z});
    }
  return m;
}

}  // namespace satdepth
