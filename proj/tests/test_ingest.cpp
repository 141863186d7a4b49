#include <doctest.h>

#include <filesystem>
#include <random>

#include "satdepth/ingest.hpp"
#include "satdepth/text.hpp"
#include "support/corruption.hpp"
#include "support/generators.hpp"

using namespace satdepth;
using namespace satdepth::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("satdepth_ingest_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string list_of(int n, const std::string& first) {
  std::string s = "(" + first;
  for (int i = 1; i < n; ++i) s += ", +0.0";
  return s + ")";
}

std::string minimal_rpb(int n_line_num = 20) {
  std::string s;
  for (const char* k : RpbDocument::kScalarKeys) s += std::string(k) + " = +1.0;\n";
  s.replace(s.find("LINE_OFF = +1.0"), 15, "LINE_OFF = +1234.00");
  s += "LINE_NUM_COEFF = " + list_of(n_line_num, "+1.0E-03") + ";\n";
  s += "LINE_DEN_COEFF = " + list_of(20, "+1.0") + ";\n";
  s += "SAMP_NUM_COEFF = " + list_of(20, "+1.0") + ";\n";
  s += "SAMP_DEN_COEFF = " + list_of(20, "+1.0") + ";\nEND;\n";
  return s;
}

}  // namespace

TEST_CASE("rpb grammar") {
  const RpbDocument doc = parse_rpb(minimal_rpb());
  CHECK(doc.scalars.at("LINE_OFF") == 1234.0);
  CHECK(doc.coefficients.at("LINE_NUM_COEFF")[0] == 0.001);
  CHECK(doc.extras.size() == 1);  // END;

  SUBCASE("short list names the field") {
    try {
      parse_rpb(minimal_rpb(19));
      FAIL("accepted a 19-entry list");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("LINE_NUM_COEFF") != std::string::npos);
    }
  }
  SUBCASE("missing field") {
    std::string s = minimal_rpb();
    s.erase(s.find("SAMP_SCALE"), s.find('\n', s.find("SAMP_SCALE")) - s.find("SAMP_SCALE") + 1);
    CHECK_THROWS_WITH_AS(parse_rpb(s), doctest::Contains("SAMP_SCALE"), FormatError);
  }
  SUBCASE("non-numeric value") {
    std::string s = minimal_rpb();
    s.replace(s.find("+1234.00"), 8, "abc");
    CHECK_THROWS_AS(parse_rpb(s), FormatError);
  }
  SUBCASE("scales must be positive") {
    std::string s = minimal_rpb();
    s.replace(s.find("LAT_SCALE = +1.0"), 16, "LAT_SCALE = -1.0");
    CHECK_THROWS_AS(parse_rpb(s), FormatError);
  }
  SUBCASE("camelCase aliases") {
    std::string s = minimal_rpb();
    s.replace(s.find("LINE_OFF"), 8, "lineOffset");
    CHECK(parse_rpb(s).scalars.at("LINE_OFF") == 1234.0);
  }
}

TEST_CASE("rpb round trip property") {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 1000; ++k) {
    const RpbDocument doc = random_rpb_document(rng);
    const std::string text = serialize_rpb(doc);
    const RpbDocument back = parse_rpb(text);
    REQUIRE(back == doc);
    CHECK(serialize_rpb(back) == text);
  }
}

TEST_CASE("rpb model conversion is lossless") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    RpbDocument doc = random_rpb_document(rng);
    doc.extras.clear();
    const RpcModel m = to_rpc_model(doc);
    CHECK(to_rpb_document(m) == doc);
  }
}

TEST_CASE("rpb file round trip") {
  const fs::path dir = scratch("rpb");
  std::mt19937_64 rng(9);
  RpbDocument doc = random_rpb_document(rng);
  const RpcModel m = to_rpc_model(doc);
  write_rpb(m, (dir / "a.RPB").string());
  CHECK(read_rpb((dir / "a.RPB").string()) == m);
  CHECK_THROWS_AS(read_rpb((dir / "missing.RPB").string()), Error);
}

TEST_CASE("imd parsing") {
  const std::string text =
      "BEGIN_GROUP = IMAGE_1\n\tcatId = \"X\";\n\tfirstLineTime = 2015-10-05T16:01:09.000000Z;\n"
      "\tmeanSatAz = 125.3;\n\tmeanSatEl = 62.5;\n\tmeanSunAz = 150.0;\n\tmeanSunEl = 50.0;\n"
      "END_GROUP = IMAGE_1\nEND;\n";
  const ImdRecord r = parse_imd(text);
  CHECK(r.sat_azimuth == 125.3);
  CHECK(r.sat_elevation == 62.5);
  CHECK(format_utc(r.acquisition_time) == "2015-10-05T16:01:09.000000Z");

  std::string missing = text;
  missing.erase(missing.find("\tmeanSatEl"), std::string("\tmeanSatEl = 62.5;\n").size());
  CHECK_THROWS_WITH_AS(parse_imd(missing), doctest::Contains("meanSatEl"), FormatError);

  std::string bad_time = text;
  bad_time.replace(bad_time.find("2015-10-05"), 10, "2015-13-05");
  CHECK_THROWS_AS(parse_imd(bad_time), FormatError);

  std::string bad_el = text;
  bad_el.replace(bad_el.find("62.5"), 4, "95.0");
  CHECK_THROWS_AS(parse_imd(bad_el), FormatError);
}

TEST_CASE("utc timestamps") {
  CHECK(format_utc(parse_utc("1970-01-01T00:00:00Z")) == "1970-01-01T00:00:00.000000Z");
  CHECK(parse_utc("2000-02-29T12:00:00.5Z").time_since_epoch().count() == 951825600500000LL);
  CHECK_THROWS_AS(parse_utc("2001-02-29T00:00:00Z"), FormatError);
  CHECK_THROWS_AS(parse_utc("2001-01-01 00:00:00Z"), FormatError);
  CHECK_THROWS_AS(parse_utc("2001-01-01T24:00:00Z"), FormatError);
}

TEST_CASE("imd round trip property") {
  std::mt19937_64 rng(202);
  for (int k = 0; k < 1000; ++k) {
    const ImdRecord r = random_imd(rng);
    REQUIRE(parse_imd(serialize_imd(r)) == r);
  }
}

TEST_CASE("annotation csv") {
  const auto recs = parse_annotations(
      "gcp_id,image_id,row,col,status\nG1,IMG_A,120.5,88.0,annotated\nG1,IMG_B,,,cannot_annotate\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].pixel->row == 120.5);
  CHECK(recs[0].pixel->col == 88.0);
  CHECK(recs[1].status == AnnotationStatus::CannotAnnotate);
  CHECK_FALSE(recs[1].pixel.has_value());

  CHECK_THROWS_AS(parse_annotations("gcp_id,image_id,row,col,status\nG1,IMG_C,12,,annotated\n"), FormatError);
  CHECK_THROWS_AS(parse_annotations("gcp_id,image_id,row,col,status\nG1,IMG_C,1,2,cannot_annotate\n"),
                  FormatError);
  CHECK_THROWS_AS(parse_annotations("gcp_id,image_id,row,col,status\nG1,IMG_C,1,2,maybe\n"), FormatError);
  CHECK_THROWS_AS(parse_annotations("gcp,image_id,row,col,status\n"), FormatError);
  CHECK_THROWS_AS(parse_annotations("gcp_id,image_id,row,col,status\nG1,IMG_C,1,2\n"), FormatError);
  CHECK(parse_annotations("gcp_id,image_id,row,col,status\r\nG1,A,1,2,annotated\r\n").size() == 1);
}

TEST_CASE("annotation round trip property") {
  std::mt19937_64 rng(303);
  for (int k = 0; k < 1000; ++k) {
    const auto recs = random_annotations(rng);
    REQUIRE(parse_annotations(serialize_annotations(recs)) == recs);
  }
}

TEST_CASE("annotation append is atomic and cumulative") {
  const fs::path dir = scratch("ann");
  const std::string path = (dir / "gcp" / "annotations" / "GCP_G1_annotations.csv").string();
  append_annotations(path, {{"G1", "A", PixelPoint{1, 2}, AnnotationStatus::Annotated}});
  append_annotations(path, {{"G1", "B", std::nullopt, AnnotationStatus::CannotAnnotate}});
  const auto recs = read_annotations(path);
  REQUIRE(recs.size() == 2);
  CHECK(recs[1].image_id == "B");
  CHECK_FALSE(fs::exists(path + ".tmp"));
  CHECK(text::read_file(path).rfind("gcp_id,image_id,row,col,status\n", 0) == 0);
}

TEST_CASE("match and gcp csv") {
  const auto m = parse_matches("row_i,col_i,row_j,col_j\n1,2,3,4.5\n");
  REQUIRE(m.size() == 1);
  CHECK(m[0].xj.col == 4.5);
  CHECK(parse_matches(serialize_matches(m)) == m);
  CHECK_THROWS_AS(parse_matches("row_i,col_i,row_j,col_j\n-1,2,3,4\n"), FormatError);
  CHECK_THROWS_AS(parse_matches("row_i,col_i,row_j,col_j\nnan,2,3,4\n"), FormatError);

  const auto g = parse_gcps("gcp_id,lat,lon,h\nG7,30.1,-81.5,12.25\n");
  REQUIRE(g.size() == 1);
  CHECK(g[0].position.h == 12.25);
  CHECK(parse_gcps(serialize_gcps(g)) == g);
  CHECK_THROWS_AS(parse_gcps("gcp_id,lat,lon,h\nG7,95,-81.5,12\n"), FormatError);
}

TEST_CASE("raster round trip") {
  const fs::path dir = scratch("raster");
  RasterF64 g(3, 3, GeoTransform{10, 50, 0.001, 0.002}, std::numeric_limits<double>::quiet_NaN());
  g.values << 1, 2, 3, 4, std::numeric_limits<double>::quiet_NaN(), 6, 7, 8, 9;
  for (const char* name : {"g.grd", "g.tif"}) {
    write_raster(g, (dir / name).string());
    const AnyRaster back = read_raster((dir / name).string());
    CHECK(bit_equal(back, g));
  }
  write_raster(g, (dir / "d.tif").string(), RasterWriteOptions{true});
  CHECK(bit_equal(read_raster((dir / "d.tif").string()), g));

  text::write_file_atomic((dir / "bad.grd").string(), "NOTAGRID");
  CHECK_THROWS_AS(read_raster((dir / "bad.grd").string()), FormatError);
}

TEST_CASE("raster round trip property") {
  std::mt19937_64 rng(404);
  for (int k = 0; k < 1000; ++k) {
    const AnyRaster g = random_any_raster(rng);
    REQUIRE(bit_equal(decode_grd(encode_grd(g)), g));
    if (k % 4 == 0) {
      REQUIRE(bit_equal(decode_geotiff(encode_geotiff(g)), g));
      REQUIRE(bit_equal(decode_geotiff(encode_geotiff(g, RasterWriteOptions{true})), g));
    }
  }
}

TEST_CASE("grd rejects truncation and trailing bytes") {
  std::mt19937_64 rng(8);
  const std::string bytes = encode_grd(random_raster<float>(rng));
  CHECK_THROWS_AS(decode_grd(bytes.substr(0, bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(decode_grd(bytes + "x"), FormatError);
  CHECK_THROWS_AS(decode_grd(bytes.substr(0, 5)), FormatError);
}

TEST_CASE("satdepth triple") {
  const fs::path dir = scratch("triple");
  SatDepthMap m(4, 5);
  m.set(1, 2, {30.1, -81.2, 5.5});
  m.set(3, 4, {30.2, -81.3, -2.25});
  const std::string base = (dir / "IMG").string();
  write_satdepth(m, base);
  const SatDepthMap back = read_satdepth(base);
  CHECK(back.valid_count() == 2);
  CHECK(back.at(1, 2) == m.at(1, 2));
  CHECK(back.at(3, 4) == m.at(3, 4));

  SUBCASE("mismatched plane") {
    RasterF32 ht(3, 5, GeoTransform{}, std::numeric_limits<float>::quiet_NaN());
    write_raster(ht, base + "_depth.grd");
    CHECK_THROWS_AS(read_satdepth(base), FormatError);
  }
  SUBCASE("partial validity") {
    RasterF32 ht(4, 5, GeoTransform{}, std::numeric_limits<float>::quiet_NaN());
    ht.values = m.ht;
    ht.values(1, 2) = std::numeric_limits<float>::quiet_NaN();
    write_raster(ht, base + "_depth.grd");
    CHECK_THROWS_AS(read_satdepth(base), FormatError);
  }
  SUBCASE("geotiff triple") {
    const std::string tb = (dir / "TIF").string();
    write_satdepth(m, tb, ".tif");
    CHECK(read_satdepth(tb).at(1, 2) == m.at(1, 2));
  }
}

// A corrupted numeric byte must either be rejected, or change the decoded
// document. The only exception is a corruption that the independent decoder
// reads as the same number (e.g. 'e' -> 'E'), which no text format can detect.
template <typename Parse, typename Original>
void check_corruptions(const std::string& text, const Original& original, Parse parse, std::mt19937_64& rng,
                       int trials, int* equivalent) {
  for (int t = 0; t < trials; ++t) {
    const Corruption c = corrupt_numeric(text, rng);
    bool same = false;
    try {
      same = parse(c.text) == original;
    } catch (const Error&) {
      continue;
    }
    if (same) {
      INFO("corrupted byte at " << c.pos << ": " << c.text.substr(c.span.begin, c.span.end - c.span.begin));
      CHECK(c.equivalent());
      if (c.equivalent()) ++*equivalent;
    }
  }
}

TEST_CASE("single-byte corruption property") {
  std::mt19937_64 rng(505);
  int equivalent = 0;
  for (int k = 0; k < 1000; ++k) {
    const RpbDocument doc = random_rpb_document(rng);
    check_corruptions(serialize_rpb(doc), doc, [](const std::string& s) { return parse_rpb(s); }, rng, 3,
                      &equivalent);
    const ImdRecord imd = random_imd(rng);
    check_corruptions(serialize_imd(imd), imd, [](const std::string& s) { return parse_imd(s); }, rng, 3,
                      &equivalent);
    const auto ann = random_annotations(rng);
    const std::string ann_text = serialize_annotations(ann);
    if (!numeric_spans(ann_text).empty())
      check_corruptions(ann_text, ann, [](const std::string& s) { return parse_annotations(s); }, rng, 3,
                        &equivalent);
  }
  MESSAGE("equivalent spellings accepted: " << equivalent);
}

TEST_CASE("imd timestamp corruption is rejected or visible") {
  std::mt19937_64 rng(606);
  for (int k = 0; k < 1000; ++k) {
    const ImdRecord imd = random_imd(rng);
    const std::string text = serialize_imd(imd);
    const std::size_t at = text.find("firstLineTime = ") + 16;
    const std::size_t pos = at + std::uniform_int_distribution<std::size_t>(0, 26)(rng);
    std::string bad = text;
    char b;
    do b = char(std::uniform_int_distribution<int>(0, 255)(rng));
    while (b == text[pos]);
    bad[pos] = b;
    bool same = false;
    try {
      same = parse_imd(bad) == imd;
    } catch (const Error&) {
    }
    CHECK_FALSE(same);
  }
}

TEST_CASE("grd corruption is rejected or visible") {
  std::mt19937_64 rng(707);
  for (int k = 0; k < 1000; ++k) {
    const AnyRaster g = random_any_raster(rng, 6);
    const std::string bytes = encode_grd(g);
    std::string bad = bytes;
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, bytes.size() - 1)(rng);
    bad[pos] = char(bad[pos] ^ std::uniform_int_distribution<int>(1, 255)(rng));
    bool same = false;
    try {
      same = bit_equal(decode_grd(bad), g);
    } catch (const Error&) {
      continue;
    }
    if (same) {
      // Only a JSON header number respelled as the same value may decode identically.
      INFO("byte " << pos << " of " << bytes.size());
      bool respelled = false;
      for (const Span& sp : numeric_spans(bytes))
        if (sp.begin <= pos && pos < sp.end) {
          const auto v = decode_token(bad.substr(sp.begin, sp.end - sp.begin));
          respelled = v && *v == *decode_token(bytes.substr(sp.begin, sp.end - sp.begin));
        }
      CHECK(respelled);
    }
  }
  const std::string bytes = encode_grd(random_any_raster(rng));
  for (std::size_t i = 0; i < kGrdMagic.size(); ++i) {
    std::string bad = bytes;
    bad[i] = char(bad[i] ^ 0x20);
    CHECK_THROWS_AS(decode_grd(bad), FormatError);
  }
}
