#pragma once

#include "atvg/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace atvg {

// Container used for checkpoints and PCA models: one JSON header line holding
// user metadata plus a "blobs" manifest of {name, offset, rows, cols}, then
// the named ATVG matrix blobs concatenated. Offsets are bytes past the header
// line's trailing newline.
using NamedBlobs = std::vector<std::pair<std::string, FeatureMatrix>>;

void write_blob_file(const std::filesystem::path& path,
                     const nlohmann::json& header, const NamedBlobs& blobs);

std::pair<nlohmann::json, NamedBlobs> read_blob_file(
    const std::filesystem::path& path);

}  // namespace atvg
