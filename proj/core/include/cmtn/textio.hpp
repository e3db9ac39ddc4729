#pragma once

#include <string>
#include <vector>

namespace cmtn {

std::string read_text_file(const std::string& path);

// Writes to a sibling temp file and renames over the destination, so
// readers never observe a half-written file.
void atomic_write_text(const std::string& path, const std::string& content);

// Shortest decimal that round-trips a 64-bit real (%.17g trimmed).
std::string format_double(double v);

double parse_double(const std::string& text, const std::string& what);
long long parse_integer(const std::string& text, const std::string& what);

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);

} // namespace cmtn
