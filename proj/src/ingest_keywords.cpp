#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "satdepth/error.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/text.hpp"

namespace satdepth {

std::vector<KeywordEntry> parse_keywords(std::string_view text) {
  std::vector<KeywordEntry> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };

  while (i < n) {
    while (i < n && is_ws(text[i])) ++i;
    if (i >= n) break;

    const std::size_t key_start = i;
    while (i < n && text[i] != '=' && text[i] != ';' && text[i] != '\n') ++i;
    const std::string key(text::trim(text.substr(key_start, i - key_start)));

    if (i >= n || text[i] == ';' || text[i] == '\n') {
      if (i < n) ++i;
      if (key.empty()) continue;
      out.push_back({key, "", false});
      continue;
    }
    ++i;  // '='
    if (key.empty()) throw FormatError("statement with '=' but no keyword");
    while (i < n && (text[i] == ' ' || text[i] == '\t')) ++i;

    std::string value;
    if (i < n && text[i] == '(') {
      const std::size_t close = text.find(')', i);
      if (close == std::string_view::npos) throw FormatError("unterminated list for '" + key + "'");
      value = std::string(text.substr(i, close - i + 1));
      i = close + 1;
      while (i < n && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
      if (i < n && text[i] == ';') ++i;
    } else {
      const std::size_t start = i;
      bool quoted = false;
      while (i < n && (quoted || (text[i] != ';' && text[i] != '\n'))) {
        if (text[i] == '"') quoted = !quoted;
        ++i;
      }
      value = std::string(text::trim(text.substr(start, i - start)));
      if (i < n && text[i] == ';') ++i;
    }
    out.push_back({key, value, true});
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::array<const char*, 10> RpbDocument::kScalarKeys = {
    "LINE_OFF",   "SAMP_OFF",   "LAT_OFF",   "LONG_OFF",   "HEIGHT_OFF",
    "LINE_SCALE", "SAMP_SCALE", "LAT_SCALE", "LONG_SCALE", "HEIGHT_SCALE"};
const std::array<const char*, 4> RpbDocument::kCoefficientKeys = {
    "LINE_NUM_COEFF", "LINE_DEN_COEFF", "SAMP_NUM_COEFF", "SAMP_DEN_COEFF"};

namespace {

const std::unordered_map<std::string, std::string>& rpb_aliases() {
  static const std::unordered_map<std::string, std::string> aliases = {
      {"lineOffset", "LINE_OFF"},     {"sampOffset", "SAMP_OFF"},     {"latOffset", "LAT_OFF"},
      {"longOffset", "LONG_OFF"},     {"heightOffset", "HEIGHT_OFF"}, {"lineScale", "LINE_SCALE"},
      {"sampScale", "SAMP_SCALE"},    {"latScale", "LAT_SCALE"},      {"longScale", "LONG_SCALE"},
      {"heightScale", "HEIGHT_SCALE"}, {"lineNumCoef", "LINE_NUM_COEFF"},
      {"lineDenCoef", "LINE_DEN_COEFF"}, {"sampNumCoef", "SAMP_NUM_COEFF"},
      {"sampDenCoef", "SAMP_DEN_COEFF"}};
  return aliases;
}

bool is_scalar_key(const std::string& k) {
  for (const char* s : RpbDocument::kScalarKeys)
    if (k == s) return true;
  return false;
}

bool is_coefficient_key(const std::string& k) {
  for (const char* s : RpbDocument::kCoefficientKeys)
    if (k == s) return true;
  return false;
}

std::array<double, 20> parse_coefficient_list(const std::string& key, std::string_view value) {
  value = text::trim(value);
  if (value.size() < 2 || value.front() != '(' || value.back() != ')')
    throw FormatError(key + ": expected a parenthesized list");
  const auto parts = text::split(value.substr(1, value.size() - 2), ',');
  if (parts.size() != 20)
    throw FormatError(key + ": expected 20 coefficients, found " + std::to_string(parts.size()));
  std::array<double, 20> out{};
  for (std::size_t k = 0; k < 20; ++k) out[k] = text::parse_real_or_throw(parts[k], key);
  return out;
}

}  // namespace

RpbDocument parse_rpb(std::string_view text) {
  RpbDocument doc;
  for (const KeywordEntry& e : parse_keywords(text)) {
    std::string key = e.key;
    if (auto it = rpb_aliases().find(key); it != rpb_aliases().end()) key = it->second;

    if (e.has_value && is_scalar_key(key)) {
      if (doc.scalars.count(key)) throw FormatError("duplicate field " + key);
      doc.scalars[key] = text::parse_real_or_throw(e.value, key);
    } else if (e.has_value && is_coefficient_key(key)) {
      if (doc.coefficients.count(key)) throw FormatError("duplicate field " + key);
      doc.coefficients[key] = parse_coefficient_list(key, e.value);
    } else {
      doc.extras.push_back(e);
    }
  }
  for (const char* k : RpbDocument::kScalarKeys)
    if (!doc.scalars.count(k)) throw FormatError(std::string("missing mandatory field ") + k);
  for (const char* k : RpbDocument::kCoefficientKeys)
    if (!doc.coefficients.count(k)) throw FormatError(std::string("missing mandatory field ") + k);
  for (const char* k : {"LINE_SCALE", "SAMP_SCALE", "LAT_SCALE", "LONG_SCALE", "HEIGHT_SCALE"})
    if (!(doc.scalars.at(k) > 0.0)) throw FormatError(std::string(k) + " must be strictly positive");
  return doc;
}

std::string serialize_rpb(const RpbDocument& doc) {
  std::ostringstream out;
  for (const char* k : RpbDocument::kScalarKeys)
    out << k << " = " << text::format_signed_real(doc.scalars.at(k)) << ";\n";
  for (const char* k : RpbDocument::kCoefficientKeys) {
    const auto& list = doc.coefficients.at(k);
    out << k << " = (\n";
    for (std::size_t i = 0; i < list.size(); ++i)
      out << "\t" << text::format_signed_real(list[i]) << (i + 1 < list.size() ? ",\n" : ");\n");
  }
  for (const KeywordEntry& e : doc.extras) {
    if (e.has_value)
      out << e.key << " = " << e.value << ";\n";
    else
      out << e.key << ";\n";
  }
  return out.str();
}

RpcModel to_rpc_model(const RpbDocument& doc) {
  RpcModel m;
  const auto& s = doc.scalars;
  m.line_off = s.at("LINE_OFF");
  m.samp_off = s.at("SAMP_OFF");
  m.lat_off = s.at("LAT_OFF");
  m.lon_off = s.at("LONG_OFF");
  m.height_off = s.at("HEIGHT_OFF");
  m.line_scale = s.at("LINE_SCALE");
  m.samp_scale = s.at("SAMP_SCALE");
  m.lat_scale = s.at("LAT_SCALE");
  m.lon_scale = s.at("LONG_SCALE");
  m.height_scale = s.at("HEIGHT_SCALE");
  const auto load = [&](const char* key, RpcModel::Coeffs& dst) {
    const auto& src = doc.coefficients.at(key);
    for (int i = 0; i < 20; ++i) dst(i) = src[i];
  };
  load("LINE_NUM_COEFF", m.line_num);
  load("LINE_DEN_COEFF", m.line_den);
  load("SAMP_NUM_COEFF", m.samp_num);
  load("SAMP_DEN_COEFF", m.samp_den);
  validate(m);
  return m;
}

RpbDocument to_rpb_document(const RpcModel& m) {
  RpbDocument doc;
  doc.scalars = {{"LINE_OFF", m.line_off},         {"SAMP_OFF", m.samp_off},
                 {"LAT_OFF", m.lat_off},           {"LONG_OFF", m.lon_off},
                 {"HEIGHT_OFF", m.height_off},     {"LINE_SCALE", m.line_scale},
                 {"SAMP_SCALE", m.samp_scale},     {"LAT_SCALE", m.lat_scale},
                 {"LONG_SCALE", m.lon_scale},      {"HEIGHT_SCALE", m.height_scale}};
  const auto store = [&](const char* key, const RpcModel::Coeffs& src) {
    std::array<double, 20> a{};
    for (int i = 0; i < 20; ++i) a[i] = src(i);
    doc.coefficients[key] = a;
  };
  store("LINE_NUM_COEFF", m.line_num);
  store("LINE_DEN_COEFF", m.line_den);
  store("SAMP_NUM_COEFF", m.samp_num);
  store("SAMP_DEN_COEFF", m.samp_den);
  return doc;
}

RpcModel read_rpb(const std::string& path) { return to_rpc_model(parse_rpb(text::read_file(path))); }

void write_rpb(const RpcModel& cam, const std::string& path) {
  text::write_file_atomic(path, serialize_rpb(to_rpb_document(cam)));
}

// ---------------------------------------------------------------------------

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, long long& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

unsigned days_in_month(long long y, unsigned m) {
  static const unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return m == 2 && leap ? 29 : kDays[m - 1];
}

}  // namespace

UtcTime parse_utc(std::string_view s) {
  s = text::trim(s);
  const auto fail = [&]() -> UtcTime {
    throw FormatError("unparseable UTC timestamp '" + std::string(s) + "'");
  };
  const auto digits = [&](std::size_t pos, std::size_t len, long long& out) {
    if (pos + len > s.size()) return false;
    out = 0;
    for (std::size_t k = pos; k < pos + len; ++k) {
      if (s[k] < '0' || s[k] > '9') return false;
      out = out * 10 + (s[k] - '0');
    }
    return true;
  };
  long long y, mo, d, hh, mm, ss;
  if (s.size() < 20 || !digits(0, 4, y) || s[4] != '-' || !digits(5, 2, mo) || s[7] != '-' ||
      !digits(8, 2, d) || s[10] != 'T' || !digits(11, 2, hh) || s[13] != ':' || !digits(14, 2, mm) ||
      s[16] != ':' || !digits(17, 2, ss))
    return fail();
  std::size_t pos = 19;
  long long micros = 0;
  if (s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    const std::size_t len = pos - start;
    if (len == 0 || len > 9) return fail();
    long long frac = 0;
    digits(start, len, frac);
    for (std::size_t k = len; k < 6; ++k) frac *= 10;
    for (std::size_t k = 6; k < len; ++k) frac /= 10;
    micros = frac;
  }
  if (pos + 1 != s.size() || s[pos] != 'Z') return fail();
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, unsigned(mo)) || hh > 23 || mm > 59 || ss > 60)
    return fail();

  const long long days = days_from_civil(y, unsigned(mo), unsigned(d));
  const long long secs = days * 86400 + hh * 3600 + mm * 60 + ss;
  return UtcTime(std::chrono::microseconds(secs * 1000000 + micros));
}

std::string format_utc(UtcTime t) {
  const long long us = t.time_since_epoch().count();
  long long secs = us / 1000000;
  long long micros = us % 1000000;
  if (micros < 0) {
    micros += 1000000;
    secs -= 1;
  }
  long long days = secs / 86400;
  long long rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  long long y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%06lldZ", y, m, d, rem / 3600,
                (rem / 60) % 60, rem % 60, micros);
  return buf;
}

namespace {

std::string unquote(std::string_view v) {
  v = text::trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return std::string(v);
}

}  // namespace

ImdRecord parse_imd(std::string_view text, const ImdKeyAliases& aliases) {
  const auto entries = parse_keywords(text);
  const auto find = [&](const std::vector<std::string>& keys) -> const KeywordEntry* {
    for (const std::string& k : keys)
      for (const KeywordEntry& e : entries)
        if (e.has_value && e.key == k) return &e;
    return nullptr;
  };
  const auto required = [&](const std::vector<std::string>& keys) -> const KeywordEntry& {
    const KeywordEntry* e = find(keys);
    if (!e) throw FormatError("IMD: missing key " + (keys.empty() ? std::string("?") : keys.front()));
    return *e;
  };

  ImdRecord rec;
  if (const KeywordEntry* e = find(aliases.image_id)) rec.image_id = unquote(e->value);
  const auto real = [&](const std::vector<std::string>& keys) {
    const KeywordEntry& e = required(keys);
    return text::parse_real_or_throw(e.value, "IMD " + e.key);
  };
  rec.sat_azimuth = real(aliases.sat_azimuth);
  rec.sat_elevation = real(aliases.sat_elevation);
  rec.sun_azimuth = real(aliases.sun_azimuth);
  rec.sun_elevation = real(aliases.sun_elevation);
  rec.acquisition_time = parse_utc(required(aliases.acquisition_time).value);

  for (double az : {rec.sat_azimuth, rec.sun_azimuth})
    if (!(az >= 0.0 && az < 360.0)) throw FormatError("IMD azimuth outside [0, 360)");
  for (double el : {rec.sat_elevation, rec.sun_elevation})
    if (!(el > 0.0 && el <= 90.0)) throw FormatError("IMD elevation outside (0, 90]");
  return rec;
}

std::string serialize_imd(const ImdRecord& rec) {
  std::ostringstream out;
  out << "BEGIN_GROUP = IMAGE_1\n";
  if (!rec.image_id.empty()) out << "\tproductCatId = \"" << rec.image_id << "\";\n";
  out << "\tfirstLineTime = " << format_utc(rec.acquisition_time) << ";\n";
  out << "\tmeanSunAz = " << text::format_real(rec.sun_azimuth) << ";\n";
  out << "\tmeanSunEl = " << text::format_real(rec.sun_elevation) << ";\n";
  out << "\tmeanSatAz = " << text::format_real(rec.sat_azimuth) << ";\n";
  out << "\tmeanSatEl = " << text::format_real(rec.sat_elevation) << ";\n";
  out << "END_GROUP = IMAGE_1\nEND;\n";
  return out.str();
}

}  // namespace satdepth
