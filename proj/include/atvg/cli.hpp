#pragma once

#include "atvg/captionsel.hpp"
#include "atvg/embed.hpp"
#include "atvg/grounding.hpp"
#include "atvg/tvghead.hpp"
#include "atvg/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace atvg {

// Exit-code contract shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitEmpty = 2;
inline constexpr int kExitIo = 3;

struct VideoRecord {
  std::string video_id;
  std::filesystem::path feature_path;
  std::filesystem::path subtitle_path;  // may be empty
  VideoMeta meta;
};

struct Manifest {
  std::vector<VideoRecord> videos;

  const VideoRecord* find(const std::string& video_id) const;
};

// Eagerly validates: unique ids, resolvable paths, decodable feature headers,
// duration > 0. Paths resolve relative to the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);

struct TrainSettings {
  int epochs = 200;
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Index batch_size = 0;  // 0 = full batch
  Index attn_dim = 128;
  Index hidden_dim = 128;
  Index sample_budget = 128;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 0;  // 0 = hardware concurrency
  Index sample_budget = 500;
  Index k = 4;
  double index_weight = 1.0;
  std::string strategy = "random";
  Index n1 = 5;
  Index n2 = 3;
  std::string caption_mode = "fixed";
  bool all_candidates = false;
  std::optional<double> scaled_ref_len;
  std::optional<std::string> stoplist_path;
  ProviderConfig provider;
  Index ground_sample_budget = 128;
  double lambda = 1.0;
  double huber_delta = 1.0;
  TrainSettings train;
  std::vector<double> thresholds = {0.3, 0.5, 0.7};

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

SelectionStrategy::Kind parse_strategy(const std::string& name);
SelectionMode::Kind parse_caption_mode(const std::string& name);

// Pseudo-label generation over a manifest; JSONL to `output`, skip report to
// `output`.skips.json. Returns an exit code.
int cmd_generate(const Manifest& manifest, const RunConfig& config,
                 const std::filesystem::path& output, std::ostream& log);

// Zero-shot grounding of queries JSONL ({"video_id", "query"}) against the
// manifest; predictions JSONL to `output`.
int cmd_ground(const Manifest& manifest, const std::filesystem::path& queries,
               const RunConfig& config, const std::filesystem::path& output,
               std::ostream& log);

// R@tIoU / mIoU over the (video_id, query) intersection of two JSONL files.
// Empty `output` prints to `log` only.
int cmd_evaluate(const std::filesystem::path& predictions,
                 const std::filesystem::path& ground_truth,
                 const std::vector<double>& thresholds,
                 const std::filesystem::path& output, std::ostream& log);

// Trains the grounding head on pseudo labels; writes checkpoint + trace CSV.
int cmd_train(const std::filesystem::path& labels, const Manifest& manifest,
              const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::filesystem::path& trace_csv, std::ostream& log);

int cmd_pca_fit(const Manifest& manifest, Index target_dim,
                const std::filesystem::path& model_out, std::ostream& log);
// Writes <stem>.pca<ext> next to each feature file.
int cmd_pca_apply(const Manifest& manifest,
                  const std::filesystem::path& model_path, std::ostream& log);

}  // namespace atvg
