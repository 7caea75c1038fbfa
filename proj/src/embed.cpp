#include "atvg/embed.hpp"

#include "atvg/tensorio.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace atvg {

namespace {

using nlohmann::json;

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

Eigen::VectorXf normalized_or_throw(const Eigen::VectorXf& v,
                                    const std::string& token) {
  const Eigen::VectorXd vd = v.cast<double>();
  const double norm = vd.norm();
  require(norm > 0.0, ErrorCode::ZeroVector,
          "embedding for '" + token + "' has zero norm");
  return (vd / norm).cast<float>();
}

// Splits "http://host:port/prefix" into client base and path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  require(scheme_end != std::string::npos, ErrorCode::HttpFailure,
          "endpoint '" + url + "' lacks a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace

EmbeddingStore read_embedding_store(const std::filesystem::path& path) {
  FeatureMatrix matrix;
  try {
    matrix = read_feature_matrix(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::StoreUnreadable, e.what());
  }

  const std::filesystem::path sidecar = path.string() + ".json";
  std::ifstream in(sidecar);
  if (!in) {
    throw Error(ErrorCode::StoreUnreadable,
                sidecar.string() + ": cannot open sidecar");
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::StoreUnreadable,
                sidecar.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("tokens") ||
      !doc["tokens"].is_array()) {
    throw Error(ErrorCode::StoreUnreadable,
                sidecar.string() + ": expected {\"dim\", \"tokens\"}");
  }

  EmbeddingStore store;
  store.dim = doc["dim"].get<Index>();
  if (store.dim != matrix.cols()) {
    throw Error(ErrorCode::StoreUnreadable,
                sidecar.string() + ": dim does not match matrix cols");
  }
  if (static_cast<Index>(doc["tokens"].size()) != matrix.rows()) {
    throw Error(ErrorCode::StoreUnreadable,
                sidecar.string() + ": token count does not match matrix rows");
  }
  Index row = 0;
  for (const auto& t : doc["tokens"]) {
    if (!t.is_string()) {
      throw Error(ErrorCode::StoreUnreadable,
                  sidecar.string() + ": tokens must be strings");
    }
    const std::string token = lowercase(t.get<std::string>());
    const bool inserted =
        store.entries.emplace(token, matrix.row(row).transpose()).second;
    if (!inserted) {
      throw Error(ErrorCode::StoreUnreadable,
                  sidecar.string() + ": duplicate token '" + token + "'");
    }
    ++row;
  }
  return store;
}

void write_embedding_store(const EmbeddingStore& store,
                           const std::filesystem::path& path) {
  require(store.dim >= 1, ErrorCode::DimZero, "store dim must be >= 1");
  FeatureMatrix matrix(static_cast<Index>(store.entries.size()), store.dim);
  json tokens = json::array();
  // Deterministic file layout: tokens sorted.
  std::vector<std::string> order;
  order.reserve(store.entries.size());
  for (const auto& [token, _] : store.entries) order.push_back(token);
  std::sort(order.begin(), order.end());
  Index row = 0;
  for (const auto& token : order) {
    matrix.row(row) = store.entries.at(token).transpose();
    tokens.push_back(token);
    ++row;
  }
  write_feature_matrix(matrix, path);

  std::ofstream out(path.string() + ".json", std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure,
                path.string() + ".json: cannot open for write");
  }
  out << json{{"dim", store.dim}, {"tokens", tokens}}.dump() << '\n';
}

Provider open_provider(const ProviderConfig& config) {
  Provider p;
  p.timeout_ms = config.timeout_ms;
  p.missing_policy = config.missing_policy;
  if (config.mode == ProviderConfig::Mode::File) {
    p.store = read_embedding_store(config.source);
  } else {
    require(!config.source.empty(), ErrorCode::ConfigError,
            "http provider needs an endpoint URL");
    p.endpoint = config.source;
  }
  return p;
}

LookupResult lookup(const EmbeddingStore& store,
                    const std::vector<std::string>& tokens,
                    MissingPolicy policy) {
  std::vector<const Eigen::VectorXf*> found;
  LookupResult result;
  std::vector<std::string> found_tokens;
  for (const auto& raw : tokens) {
    const std::string token = lowercase(raw);
    auto it = store.entries.find(token);
    if (it == store.entries.end()) {
      if (policy == MissingPolicy::Error) {
        throw Error(ErrorCode::MissingToken, "no embedding for '" + token + "'");
      }
      result.missing.push_back(token);
    } else {
      found.push_back(&it->second);
      found_tokens.push_back(token);
    }
  }
  result.embeddings.resize(static_cast<Index>(found.size()), store.dim);
  for (std::size_t i = 0; i < found.size(); ++i) {
    result.embeddings.row(static_cast<Index>(i)) =
        normalized_or_throw(*found[i], found_tokens[i]).transpose();
  }
  return result;
}

std::vector<Eigen::VectorXd> http_embed(const std::string& endpoint,
                                        const std::vector<std::string>& texts,
                                        int timeout_ms) {
  require(!texts.empty(), ErrorCode::ConfigError,
          "http_embed: texts must be non-empty");
  const auto [base, prefix] = split_endpoint(endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

  const json body{{"texts", texts}};
  auto res = client.Post(prefix + "/embed", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::HttpFailure,
                endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::HttpFailure,
                endpoint + ": status " + std::to_string(res->status));
  }
  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::HttpFailure,
                endpoint + ": malformed body: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("embeddings") ||
      !doc["embeddings"].is_array()) {
    throw Error(ErrorCode::HttpFailure,
                endpoint + ": response lacks \"embeddings\" array");
  }
  const auto& arr = doc["embeddings"];
  if (arr.size() != texts.size()) {
    throw Error(ErrorCode::HttpFailure,
                endpoint + ": expected " + std::to_string(texts.size()) +
                    " embeddings, got " + std::to_string(arr.size()));
  }

  std::vector<Eigen::VectorXd> out;
  out.reserve(arr.size());
  Index dim = -1;
  for (const auto& vec : arr) {
    if (!vec.is_array()) {
      throw Error(ErrorCode::HttpFailure,
                  endpoint + ": embedding entries must be arrays");
    }
    Eigen::VectorXd v(static_cast<Index>(vec.size()));
    Index i = 0;
    for (const auto& x : vec) {
      if (!x.is_number()) {
        throw Error(ErrorCode::HttpFailure,
                    endpoint + ": embedding values must be numbers");
      }
      v(i++) = x.get<double>();
    }
    // Empty arrays signal a missing embedding; non-empty ones must agree on
    // dimension.
    if (v.size() > 0) {
      if (dim < 0) dim = v.size();
      if (v.size() != dim) {
        throw Error(ErrorCode::RaggedResponse,
                    endpoint + ": embeddings of unequal length (" +
                        std::to_string(dim) + " vs " +
                        std::to_string(v.size()) + ")");
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

LookupResult lookup_http(const std::string& endpoint,
                         const std::vector<std::string>& tokens,
                         int timeout_ms, MissingPolicy policy) {
  LookupResult result;
  if (tokens.empty()) {
    result.embeddings.resize(0, 0);
    return result;
  }
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(lowercase(t));

  const auto vectors = http_embed(endpoint, lowered, timeout_ms);
  std::vector<const Eigen::VectorXd*> found;
  std::vector<std::string> found_tokens;
  Index dim = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() == 0) {
      if (policy == MissingPolicy::Error) {
        throw Error(ErrorCode::MissingToken,
                    "no embedding for '" + lowered[i] + "'");
      }
      result.missing.push_back(lowered[i]);
    } else {
      found.push_back(&vectors[i]);
      found_tokens.push_back(lowered[i]);
      dim = vectors[i].size();
    }
  }
  result.embeddings.resize(static_cast<Index>(found.size()), dim);
  for (std::size_t i = 0; i < found.size(); ++i) {
    const double norm = found[i]->norm();
    require(norm > 0.0, ErrorCode::ZeroVector,
            "embedding for '" + found_tokens[i] + "' has zero norm");
    result.embeddings.row(static_cast<Index>(i)) =
        (*found[i] / norm).cast<float>().transpose();
  }
  return result;
}

}  // namespace

LookupResult lookup(const Provider& provider,
                    const std::vector<std::string>& tokens) {
  if (provider.is_http()) {
    return lookup_http(provider.endpoint, tokens, provider.timeout_ms,
                       provider.missing_policy);
  }
  require(provider.store.has_value(), ErrorCode::ConfigError,
          "provider has neither store nor endpoint");
  return lookup(*provider.store, tokens, provider.missing_policy);
}

LookupResult lookup(const ProviderConfig& config,
                    const std::vector<std::string>& tokens) {
  return lookup(open_provider(config), tokens);
}

Eigen::VectorXd pool_moment(const FeatureMatrix& frames, const Moment& moment) {
  require(moment.start < moment.end, ErrorCode::EmptyMoment,
          "pool_moment: empty moment");
  require(moment.start >= 0 && moment.end <= frames.rows(),
          ErrorCode::OutOfRange, "pool_moment: moment outside frame range");
  const Eigen::VectorXd mean =
      frames.middleRows(moment.start, moment.length())
          .cast<double>()
          .colwise()
          .mean();
  const double norm = mean.norm();
  require(norm > 0.0, ErrorCode::ZeroVector, "pool_moment: all-zero mean");
  return mean / norm;
}

Eigen::VectorXd pool_rows(const FeatureMatrix& rows) {
  require(rows.rows() >= 1, ErrorCode::EmptyMoment, "pool_rows: no rows");
  const Eigen::VectorXd mean = rows.cast<double>().colwise().mean();
  const double norm = mean.norm();
  require(norm > 0.0, ErrorCode::ZeroVector, "pool_rows: all-zero mean");
  return mean / norm;
}

}  // namespace atvg
