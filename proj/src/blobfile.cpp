#include "atvg/blobfile.hpp"

#include "atvg/tensorio.hpp"

#include <fstream>
#include <sstream>

namespace atvg {

void write_blob_file(const std::filesystem::path& path,
                     const nlohmann::json& header, const NamedBlobs& blobs) {
  // Serialize blobs first so the manifest can carry exact offsets.
  std::ostringstream body;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, matrix] : blobs) {
    const auto offset = body.tellp();
    write_feature_matrix(matrix, body, path.string() + ":" + name);
    manifest.push_back({{"name", name},
                        {"offset", static_cast<std::int64_t>(offset)},
                        {"rows", matrix.rows()},
                        {"cols", matrix.cols()}});
  }
  nlohmann::json full = header;
  full["blobs"] = manifest;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open for write");
  }
  out << full.dump() << '\n';
  const std::string payload = body.str();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoFailure, path.string() + ": write failed");
  }
}

std::pair<nlohmann::json, NamedBlobs> read_blob_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw Error(ErrorCode::SchemaError, path.string() + ": missing header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError,
                path.string() + ": header is not valid JSON: " + e.what());
  }
  require(header.contains("blobs") && header["blobs"].is_array(),
          ErrorCode::SchemaError, path.string() + ": header lacks blob manifest");

  const std::streampos base = in.tellg();
  NamedBlobs blobs;
  for (const auto& entry : header["blobs"]) {
    require(entry.contains("name") && entry.contains("offset"),
            ErrorCode::SchemaError, path.string() + ": malformed manifest entry");
    const std::string name = entry["name"].get<std::string>();
    in.clear();
    in.seekg(base + std::streamoff(entry["offset"].get<std::int64_t>()));
    blobs.emplace_back(name, read_feature_matrix(in, path.string() + ":" + name));
  }
  header.erase("blobs");
  return {header, std::move(blobs)};
}

}  // namespace atvg
