#pragma once

// A small synthetic three-video corpus on disk: feature files with planted
// segments, per-video subtitle words whose embeddings live in one shared
// store, a manifest, queries, and aligned ground truth.

#include "atvg/cli.hpp"
#include "atvg/embed.hpp"
#include "atvg/lexemes.hpp"
#include "atvg/tensorio.hpp"

#include "helpers.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace testutil {

using namespace atvg;

struct FixtureVideo {
  std::string id;
  Moment segment;
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
};

class CliFixture {
 public:
  // `empty_words_video`: give the last video an all-Other subtitle stream so
  // generate has to skip it.
  explicit CliFixture(bool empty_words_video = false) {
    const Index dim = 32;
    EmbeddingStore store;
    store.dim = dim;

    const std::vector<FixtureVideo> specs = {
        {"v1", {30, 70}, {"pan", "meat", "oven", "salt", "cup", "board"},
         {"cook", "cut", "slice", "stir"}},
        {"v2", {10, 50}, {"wall", "brush", "paint", "roller", "tape", "tray"},
         {"roll", "dip", "cover", "dry"}},
        {"v3", {60, 100}, {"trail", "boot", "pack", "map", "ridge", "creek"},
         {"hike", "climb", "cross", "rest"}},
    };

    Index axis = 0;
    nlohmann::json videos = nlohmann::json::array();
    for (std::size_t vi = 0; vi < specs.size(); ++vi) {
      const auto& sv = specs[vi];
      // Target words take canonical axes; the first 5 nouns + 3 verbs form
      // the planted description whose mean is the segment direction.
      Eigen::VectorXd segment_sum = Eigen::VectorXd::Zero(dim);
      std::vector<std::string> all = sv.nouns;
      all.insert(all.end(), sv.verbs.begin(), sv.verbs.end());
      for (std::size_t w = 0; w < all.size(); ++w) {
        Eigen::VectorXf v = Eigen::VectorXf::Zero(dim);
        v(axis % dim) = 1.0f;
        // Rotate through axes; collisions across videos are fine, within a
        // video the first 10 words stay distinct because dim > word count.
        store.entries.emplace(all[w], v);
        if (w < 5 || (w >= sv.nouns.size() && w < sv.nouns.size() + 3)) {
          segment_sum += v.cast<double>();
        }
        ++axis;
      }
      axis += 3;  // leave spare axes between videos
      const Eigen::VectorXd seg_dir = segment_sum / segment_sum.norm();
      Eigen::VectorXd bg_dir = Eigen::VectorXd::Zero(dim);
      bg_dir((axis - 1) % dim) = 1.0;

      FeatureMatrix frames(128, dim);
      std::uint64_t noise = fnv1a64(sv.id);
      for (Index i = 0; i < 128; ++i) {
        const bool inside = i >= sv.segment.start && i < sv.segment.end;
        Eigen::VectorXd row = inside ? seg_dir : bg_dir;
        for (Index j = 0; j < dim; ++j) row(j) += 0.02 * next_gaussian(noise);
        frames.row(i) = row.cast<float>().transpose();
      }
      const auto feature_path = dir / (sv.id + ".atvg");
      write_feature_matrix(frames, feature_path);

      // Subtitles: nouns and verbs interleaved, some repeats and filler.
      std::vector<SubtitleWord> words;
      const bool strip = empty_words_video && vi == specs.size() - 1;
      if (strip) {
        words.push_back({"uh", PosTag::Other, {}, {}});
        words.push_back({"um", PosTag::Other, {}, {}});
      } else {
        for (const auto& n : sv.nouns) words.push_back({n, PosTag::Noun, {}, {}});
        for (const auto& v : sv.verbs) words.push_back({v, PosTag::Verb, {}, {}});
        words.push_back({sv.nouns[0], PosTag::Noun, {}, {}});  // a repeat
        words.push_back({"okay", PosTag::Other, {}, {}});
      }
      const auto subtitle_path = dir / (sv.id + ".words.json");
      std::ofstream(subtitle_path) << serialize_subtitles(words);

      videos.push_back({{"video_id", sv.id},
                        {"feature_path", sv.id + ".atvg"},
                        {"subtitle_path", sv.id + ".words.json"},
                        {"duration_s", 64.0}});
      segments_.push_back(sv.segment);
      queries_.push_back(sv.nouns[0] + " " + sv.verbs[0]);
      ids_.push_back(sv.id);
    }

    store_path = dir / "store.atvg";
    write_embedding_store(store, store_path);

    manifest_path = dir / "manifest.json";
    std::ofstream(manifest_path) << nlohmann::json{{"videos", videos}}.dump();

    // Queries + aligned ground truth (segment frames over 64 s / 128 frames).
    queries_path = dir / "queries.jsonl";
    gt_path = dir / "gt.jsonl";
    std::ofstream q(queries_path), g(gt_path);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const double scale = 64.0 / 128.0;
      q << nlohmann::json{{"video_id", ids_[i]}, {"query", queries_[i]}}.dump()
        << '\n';
      g << nlohmann::json{{"video_id", ids_[i]},
                          {"query", queries_[i]},
                          {"t_start_s", double(segments_[i].start) * scale},
                          {"t_end_s", double(segments_[i].end) * scale}}
               .dump()
        << '\n';
    }
  }

  RunConfig config() const {
    RunConfig cfg;
    cfg.provider.mode = ProviderConfig::Mode::File;
    cfg.provider.source = store_path.string();
    cfg.k = 2;
    cfg.seed = 7;
    return cfg;
  }

  const std::vector<Moment>& segments() const { return segments_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::string>& queries() const { return queries_; }

  TempDir dir;
  std::filesystem::path manifest_path;
  std::filesystem::path store_path;
  std::filesystem::path queries_path;
  std::filesystem::path gt_path;

 private:
  std::vector<Moment> segments_;
  std::vector<std::string> ids_;
  std::vector<std::string> queries_;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace testutil
