#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcsel/detector.hpp"

namespace vcsel {

struct FeatureMapSet {
  std::uint32_t id = 0;
  std::uint8_t label = 0;
  std::vector<ReconstructedMap> maps;
};

// "VSFM" little-endian: u32 version, u32 image count, u32 k, u32 width,
// u32 height; per image u32 id, u8 label, k*height*width bytes of 0/1.
// A JSON sidecar (path + ".json") describes the file and carries `extra`.
void export_feature_maps(const std::vector<FeatureMapSet>& sets,
                         const std::string& path,
                         const nlohmann::json& extra = nlohmann::json::object());

std::vector<FeatureMapSet> import_feature_maps(const std::string& path);

// Byte size of a VSFM file with these dimensions.
std::uint64_t vsfm_file_size(std::uint64_t images, std::uint32_t k,
                             std::uint32_t width, std::uint32_t height);

}  // namespace vcsel
