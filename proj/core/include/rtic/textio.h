#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rtic::io {

// Shortest decimal text that parses back to the identical double.
std::string format_real(double v);
// Strict parse: the whole field must be a finite real.
bool parse_real(std::string_view s, double& out);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::string& path);
// Writes via a temporary sibling and rename.
void write_file(const std::string& path, std::string_view contents);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace rtic::io
