#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace rplids::csv {

// Shortest representation that round-trips exactly; '.' decimal separator
// regardless of locale.
std::string format_double(double v);
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view s, std::size_t line);
std::int64_t parse_int(std::string_view s, std::size_t line);

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string join(const std::vector<std::string>& fields, char sep = ',');

std::ofstream open_output(const std::string& path);
std::ifstream open_input(const std::string& path);

}  // namespace rplids::csv
