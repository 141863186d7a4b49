#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace satdepth::text {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Strict decimal real: [+-]?digits[.digits*]?([eE][+-]?digits)?
/// The whole token must match; no surrounding whitespace, no leading '.'.
bool parse_real(std::string_view token, double& out);

/// Same grammar; throws FormatError naming `what` on failure.
double parse_real_or_throw(std::string_view token, const std::string& what);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double v);

/// As format_real with an explicit '+' on non-negative values (RPB style).
std::string format_signed_real(double v);

/// Rows of a CSV with an exact header line and a fixed field count. CRLF
/// and one trailing newline are tolerated.
std::vector<std::vector<std::string>> csv_rows(std::string_view csv, std::string_view header, std::size_t ncols);

std::string read_file(const std::string& path);

/// Writes to `path.tmp` then renames over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace satdepth::text
