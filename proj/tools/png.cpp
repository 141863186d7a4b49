#include "png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>

#include "satdepth/error.hpp"

namespace satdepth::cli {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int k = 3; k >= 0; --k) s.push_back(char((v >> (8 * k)) & 0xff));
}

void chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, std::uint32_t(data.size()));
  const std::string body = std::string(type, 4) + data;
  out += body;
  put_u32(out, std::uint32_t(crc32(0, reinterpret_cast<const Bytef*>(body.data()), uInt(body.size()))));
}

}  // namespace

std::string encode_png_gray8(const std::vector<std::uint8_t>& pixels, int height, int width) {
  if (height < 1 || width < 1 || pixels.size() != std::size_t(height) * std::size_t(width))
    throw DomainError("png: pixel count does not match the image size");
  // Filter type 0 on every scanline.
  std::string raw;
  raw.reserve(std::size_t(height) * (std::size_t(width) + 1));
  for (int r = 0; r < height; ++r) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(pixels.data()) + std::size_t(r) * width, std::size_t(width));
  }
  uLongf zlen = compressBound(uLong(raw.size()));
  std::string z(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
                uLong(raw.size()), 6) != Z_OK)
    throw FormatError("png: deflate failed");
  z.resize(zlen);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, std::uint32_t(width));
  put_u32(ihdr, std::uint32_t(height));
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // depth 8, gray, deflate, filter 0, no interlace
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", "");
  return out;
}

std::vector<std::uint8_t> percentile_stretch(const Image& img, double lo_pct, double hi_pct) {
  std::vector<float> v;
  v.reserve(std::size_t(img.size()));
  for (Eigen::Index k = 0; k < img.size(); ++k)
    if (std::isfinite(img.data()[k])) v.push_back(img.data()[k]);
  std::vector<std::uint8_t> out(std::size_t(img.size()), 0);
  if (v.empty()) return out;
  std::sort(v.begin(), v.end());
  const auto at = [&](double pct) {
    const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * double(v.size() - 1);
    return double(v[std::size_t(std::lround(pos))]);
  };
  const double lo = at(lo_pct), hi = at(hi_pct);
  const double span = hi > lo ? hi - lo : 1.0;
  for (Eigen::Index k = 0; k < img.size(); ++k) {
    const float x = img.data()[k];
    if (!std::isfinite(x)) continue;
    out[std::size_t(k)] = std::uint8_t(std::lround(std::clamp((x - lo) / span, 0.0, 1.0) * 255.0));
  }
  return out;
}

}  // namespace satdepth::cli
