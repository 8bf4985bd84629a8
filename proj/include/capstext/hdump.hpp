#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "capstext/matrix.hpp"

namespace capstext::encoder {

// Hidden-state dump. Text format:
//   HDUMP v1 <num_records> <d>
//   <record_id> <length>
//   <length> lines of <d> space-separated decimals
// Values are written with 17 significant digits and round-trip exactly.

struct HdumpRecord {
  std::string id;
  numcore::Matrix hidden;  // length x d
};

std::string hdump_to_string(std::span<const HdumpRecord> records);
void save_hidden_states(const std::filesystem::path& path,
                        std::span<const HdumpRecord> records);

std::vector<HdumpRecord> hdump_from_string(const std::string& content);
std::vector<HdumpRecord> load_hidden_states(const std::filesystem::path& path);

}  // namespace capstext::encoder
