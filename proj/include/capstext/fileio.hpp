#pragma once

#include <filesystem>
#include <string>

namespace capstext {

std::string read_text_file(const std::filesystem::path& path);

// Writes to "<path>.tmp" then renames, so a crash never leaves a partial
// file under the final name.
void write_text_file_atomic(const std::filesystem::path& path,
                            const std::string& content);

// 17 significant digits: enough for binary64 round trips.
std::string format_double(double v);

double parse_double(const std::string& text, const std::string& context);

}  // namespace capstext
