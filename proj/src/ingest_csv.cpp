#include <filesystem>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "satdepth/error.hpp"
#include "satdepth/ingest.hpp"
#include "satdepth/text.hpp"

namespace satdepth {

namespace {

// Splits into data rows after checking the header. Tolerates CRLF and a
// trailing newline; any other blank line is malformed.
void check_identifier(const std::string& s, const char* what, std::size_t line) {
  if (s.empty()) throw FormatError("CSV line " + std::to_string(line) + ": empty " + what);
  for (char c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"')
      throw FormatError(std::string("illegal character in ") + what + " '" + s + "'");
}

const char* status_name(AnnotationStatus s) {
  return s == AnnotationStatus::Annotated ? "annotated" : "cannot_annotate";
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations(std::string_view csv) {
  std::vector<AnnotationRecord> out;
  const auto rows = text::csv_rows(csv, kAnnotationHeader, 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    const std::size_t line = i + 2;
    AnnotationRecord rec;
    rec.gcp_id = f[0];
    rec.image_id = f[1];
    check_identifier(rec.gcp_id, "gcp_id", line);
    check_identifier(rec.image_id, "image_id", line);
    const std::string where = "annotation line " + std::to_string(line);
    if (f[4] == "annotated") {
      if (f[2].empty() || f[3].empty()) throw FormatError(where + ": row/col required for annotated status");
      rec.status = AnnotationStatus::Annotated;
      rec.pixel = PixelPoint{text::parse_real_or_throw(f[2], where + " row"),
                             text::parse_real_or_throw(f[3], where + " col")};
    } else if (f[4] == "cannot_annotate") {
      if (!f[2].empty() || !f[3].empty())
        throw FormatError(where + ": row/col must be empty for cannot_annotate");
      rec.status = AnnotationStatus::CannotAnnotate;
    } else {
      throw FormatError(where + ": unknown status '" + f[4] + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

std::string annotation_line(const AnnotationRecord& r) {
  if ((r.status == AnnotationStatus::Annotated) != r.pixel.has_value())
    throw DomainError("annotation for " + r.gcp_id + "/" + r.image_id + ": pixel present iff annotated");
  check_identifier(r.gcp_id, "gcp_id", 0);
  check_identifier(r.image_id, "image_id", 0);
  std::string s = r.gcp_id + "," + r.image_id + ",";
  if (r.pixel) s += text::format_real(r.pixel->row) + "," + text::format_real(r.pixel->col);
  else s += ",";
  s += ",";
  s += status_name(r.status);
  s += "\n";
  return s;
}

}  // namespace

std::string serialize_annotations(const std::vector<AnnotationRecord>& records) {
  std::string out(kAnnotationHeader);
  out += "\n";
  for (const auto& r : records) out += annotation_line(r);
  return out;
}

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
  if (!std::filesystem::exists(path)) return {};
  return parse_annotations(text::read_file(path));
}

void append_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  // One writer per file within this process.
  static std::mutex registry_mutex;
  static std::unordered_map<std::string, std::unique_ptr<std::mutex>> locks;
  std::mutex* file_lock;
  {
    std::lock_guard<std::mutex> g(registry_mutex);
    auto& slot = locks[std::filesystem::absolute(path).lexically_normal().string()];
    if (!slot) slot = std::make_unique<std::mutex>();
    file_lock = slot.get();
  }
  std::lock_guard<std::mutex> g(*file_lock);

  std::string contents;
  if (std::filesystem::exists(path)) {
    contents = text::read_file(path);
    parse_annotations(contents);  // refuse to extend a corrupt file
    if (!contents.empty() && contents.back() != '\n') contents += "\n";
  } else {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    contents = std::string(kAnnotationHeader) + "\n";
  }
  for (const auto& r : records) contents += annotation_line(r);
  text::write_file_atomic(path, contents);
}

std::vector<MatchRecord> parse_matches(std::string_view csv) {
  std::vector<MatchRecord> out;
  const auto rows = text::csv_rows(csv, kMatchHeader, 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "match line " + std::to_string(i + 2);
    double v[4];
    for (int k = 0; k < 4; ++k) {
      v[k] = text::parse_real_or_throw(rows[i][k], where);
      if (v[k] < 0) throw FormatError(where + ": negative pixel coordinate");
    }
    out.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  return out;
}

std::string serialize_matches(const std::vector<MatchRecord>& matches) {
  std::string out(kMatchHeader);
  out += "\n";
  for (const auto& m : matches) {
    out += text::format_real(m.xi.row) + "," + text::format_real(m.xi.col) + "," +
           text::format_real(m.xj.row) + "," + text::format_real(m.xj.col) + "\n";
  }
  return out;
}

std::vector<GcpRecord> parse_gcps(std::string_view csv) {
  std::vector<GcpRecord> out;
  const auto rows = text::csv_rows(csv, kGcpHeader, 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "GCP line " + std::to_string(i + 2);
    GcpRecord g;
    g.gcp_id = rows[i][0];
    check_identifier(g.gcp_id, "gcp_id", i + 2);
    g.position = {text::parse_real_or_throw(rows[i][1], where + " lat"),
                  text::parse_real_or_throw(rows[i][2], where + " lon"),
                  text::parse_real_or_throw(rows[i][3], where + " h")};
    if (!is_valid(g.position)) throw FormatError(where + ": position out of range");
    out.push_back(std::move(g));
  }
  return out;
}

std::string serialize_gcps(const std::vector<GcpRecord>& gcps) {
  std::string out(kGcpHeader);
  out += "\n";
  for (const auto& g : gcps)
    out += g.gcp_id + "," + text::format_real(g.position.lat) + "," + text::format_real(g.position.lon) + "," +
           text::format_real(g.position.h) + "\n";
  return out;
}

std::string serialize_biases(const std::vector<BiasRecord>& biases) {
  std::string out(kBiasHeader);
  out += "\n";
  for (const auto& b : biases)
    out += b.image_id + "," + text::format_real(b.db_row) + "," + text::format_real(b.db_col) + "\n";
  return out;
}

std::vector<BiasRecord> parse_biases(std::string_view csv) {
  std::vector<BiasRecord> out;
  const auto rows = text::csv_rows(csv, kBiasHeader, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "bias line " + std::to_string(i + 2);
    check_identifier(rows[i][0], "image_id", i + 2);
    out.push_back({rows[i][0], text::parse_real_or_throw(rows[i][1], where),
                   text::parse_real_or_throw(rows[i][2], where)});
  }
  return out;
}

}  // namespace satdepth
