#pragma once

#include <string>

namespace hyperot {

// Writes content to a sibling temp file and renames it over the target, so
// readers never observe a partially written file.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Decimal with 17 significant digits; round-trips any finite double.
std::string format_g17(double v);

}  // namespace hyperot
