#include "atvg/cli.hpp"

#include "atvg/lexemes.hpp"
#include "atvg/rng.hpp"
#include "atvg/tensorio.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace atvg {

namespace {

using nlohmann::json;

json parse_json_text(const std::string& text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, context + ": " + e.what());
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open");
  }
  std::vector<json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    records.push_back(
        parse_json_text(line, path.string() + ":" + std::to_string(lineno)));
  }
  return records;
}

std::string format_threshold(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", tau);
  return buf;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    tokens.push_back(tok);
  }
  return tokens;
}

// Worker pool over [0, n); fn(i) must confine writes to slot i.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (n == 0) return;
  unsigned workers = jobs > 0 ? unsigned(jobs)
                              : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, unsigned(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

void write_skip_report(const std::filesystem::path& output,
                       const std::vector<std::pair<std::string, std::string>>&
                           skips,
                       const json& resolved_config) {
  json entries = json::array();
  for (const auto& [id, reason] : skips) {
    entries.push_back({{"video_id", id}, {"reason", reason}});
  }
  const json doc{{"config", resolved_config}, {"skips", entries}};
  const std::filesystem::path path = output.string() + ".skips.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open for write");
  }
  out << doc.dump() << '\n';
}

std::unordered_set<std::string> load_stoplist(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, path + ": cannot open stoplist");
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path + ": " + e.what());
  }
  require(doc.is_array(), ErrorCode::SchemaError,
          path + ": stoplist must be a JSON array of strings");
  std::unordered_set<std::string> stop;
  for (const auto& t : doc) {
    require(t.is_string(), ErrorCode::SchemaError,
            path + ": stoplist entries must be strings");
    stop.insert(t.get<std::string>());
  }
  return stop;
}

}  // namespace

const VideoRecord* Manifest::find(const std::string& video_id) const {
  for (const auto& v : videos) {
    if (v.video_id == video_id) return &v;
  }
  return nullptr;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const json doc = parse_json_text(buf.str(), path.string());
  require(doc.is_object() && doc.contains("videos") && doc["videos"].is_array(),
          ErrorCode::SchemaError,
          path.string() + ": expected {\"videos\": [...]}");

  const std::filesystem::path base = path.parent_path();
  Manifest manifest;
  std::unordered_set<std::string> ids;
  for (const auto& entry : doc["videos"]) {
    require(entry.is_object(), ErrorCode::SchemaError,
            path.string() + ": video entries must be objects");
    for (const char* field : {"video_id", "feature_path", "duration_s"}) {
      require(entry.contains(field), ErrorCode::SchemaError,
              path.string() + ": video entry missing '" + field + "'");
    }
    VideoRecord rec;
    rec.video_id = entry["video_id"].get<std::string>();
    require(!rec.video_id.empty(), ErrorCode::SchemaError,
            path.string() + ": empty video_id");
    require(ids.insert(rec.video_id).second, ErrorCode::SchemaError,
            path.string() + ": duplicate video_id '" + rec.video_id + "'");

    std::filesystem::path fp = entry["feature_path"].get<std::string>();
    rec.feature_path = fp.is_absolute() ? fp : base / fp;
    if (entry.contains("subtitle_path")) {
      std::filesystem::path sp = entry["subtitle_path"].get<std::string>();
      rec.subtitle_path = sp.is_absolute() ? sp : base / sp;
    }

    rec.meta.video_id = rec.video_id;
    rec.meta.duration_s = entry["duration_s"].get<double>();
    require(rec.meta.duration_s > 0.0 && std::isfinite(rec.meta.duration_s),
            ErrorCode::SchemaError,
            rec.video_id + ": duration_s must be finite and > 0");

    // Fail fast on unreadable files.
    const auto [rows, cols] = read_feature_matrix_shape(rec.feature_path);
    (void)cols;
    rec.meta.frame_count = rows;
    if (entry.contains("frame_count")) {
      require(entry["frame_count"].get<Index>() == rows,
              ErrorCode::SchemaError,
              rec.video_id + ": manifest frame_count does not match file");
    }
    if (!rec.subtitle_path.empty()) {
      require(std::filesystem::exists(rec.subtitle_path), ErrorCode::IoFailure,
              rec.subtitle_path.string() + ": subtitle file missing");
    }
    manifest.videos.push_back(std::move(rec));
  }
  return manifest;
}

void RunConfig::validate() const {
  require(sample_budget >= 1, ErrorCode::ConfigError,
          "sample_budget must be >= 1");
  require(k >= 1, ErrorCode::ConfigError, "k must be >= 1");
  require(index_weight >= 0.0, ErrorCode::ConfigError,
          "index_weight must be >= 0");
  require(n1 >= 0 && n2 >= 0, ErrorCode::ConfigError,
          "n1 and n2 must be >= 0");
  require(jobs >= 0, ErrorCode::ConfigError, "jobs must be >= 0");
  require(ground_sample_budget >= 1, ErrorCode::ConfigError,
          "ground_sample_budget must be >= 1");
  require(lambda >= 0.0, ErrorCode::ConfigError, "lambda must be >= 0");
  require(huber_delta > 0.0, ErrorCode::ConfigError,
          "huber_delta must be > 0");
  require(train.epochs >= 1, ErrorCode::ConfigError, "epochs must be >= 1");
  require(train.lr >= 0.0, ErrorCode::ConfigError, "lr must be >= 0");
  require(train.batch_size >= 0, ErrorCode::ConfigError,
          "batch_size must be >= 0");
  require(train.attn_dim >= 1 && train.hidden_dim >= 1,
          ErrorCode::ConfigError, "head dims must be >= 1");
  require(train.sample_budget >= 1, ErrorCode::ConfigError,
          "train sample_budget must be >= 1");
  require(!thresholds.empty(), ErrorCode::ConfigError,
          "thresholds must be non-empty");
  for (double tau : thresholds) {
    require(tau > 0.0 && tau < 1.0, ErrorCode::ConfigError,
            "thresholds must lie in (0, 1)");
  }
  parse_strategy(strategy);
  parse_caption_mode(caption_mode);
  if (scaled_ref_len) {
    require(*scaled_ref_len > 0.0, ErrorCode::ConfigError,
            "scaled_ref_len must be > 0");
  }
}

nlohmann::json RunConfig::to_json() const {
  json provider_json{
      {"mode", provider.mode == ProviderConfig::Mode::File ? "file" : "http"},
      {"source", provider.source},
      {"timeout_ms", provider.timeout_ms},
      {"missing_policy",
       provider.missing_policy == MissingPolicy::Skip ? "skip" : "error"}};
  // `jobs` is runtime machinery, deliberately absent: echoed configs must be
  // identical no matter how the work was scheduled.
  json doc{{"seed", seed},
           {"sample_budget", sample_budget},
           {"k", k},
           {"index_weight", index_weight},
           {"strategy", strategy},
           {"n1", n1},
           {"n2", n2},
           {"caption_mode", caption_mode},
           {"all_candidates", all_candidates},
           {"provider", provider_json},
           {"ground_sample_budget", ground_sample_budget},
           {"lambda", lambda},
           {"huber_delta", huber_delta},
           {"thresholds", thresholds},
           {"train",
            {{"epochs", train.epochs},
             {"lr", train.lr},
             {"beta1", train.beta1},
             {"beta2", train.beta2},
             {"adam_eps", train.adam_eps},
             {"batch_size", train.batch_size},
             {"attn_dim", train.attn_dim},
             {"hidden_dim", train.hidden_dim},
             {"sample_budget", train.sample_budget}}}};
  if (scaled_ref_len) doc["scaled_ref_len"] = *scaled_ref_len;
  if (stoplist_path) doc["stoplist_path"] = *stoplist_path;
  return doc;
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
  require(doc.is_object(), ErrorCode::ConfigError,
          "config: top level must be an object");
  RunConfig cfg;
  try {
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.jobs = doc.value("jobs", cfg.jobs);
    cfg.sample_budget = doc.value("sample_budget", cfg.sample_budget);
    cfg.k = doc.value("k", cfg.k);
    cfg.index_weight = doc.value("index_weight", cfg.index_weight);
    cfg.strategy = doc.value("strategy", cfg.strategy);
    cfg.n1 = doc.value("n1", cfg.n1);
    cfg.n2 = doc.value("n2", cfg.n2);
    cfg.caption_mode = doc.value("caption_mode", cfg.caption_mode);
    cfg.all_candidates = doc.value("all_candidates", cfg.all_candidates);
    cfg.ground_sample_budget =
        doc.value("ground_sample_budget", cfg.ground_sample_budget);
    cfg.lambda = doc.value("lambda", cfg.lambda);
    cfg.huber_delta = doc.value("huber_delta", cfg.huber_delta);
    if (doc.contains("scaled_ref_len") && !doc["scaled_ref_len"].is_null()) {
      cfg.scaled_ref_len = doc["scaled_ref_len"].get<double>();
    }
    if (doc.contains("stoplist_path") && !doc["stoplist_path"].is_null()) {
      cfg.stoplist_path = doc["stoplist_path"].get<std::string>();
    }
    if (doc.contains("thresholds")) {
      cfg.thresholds = doc["thresholds"].get<std::vector<double>>();
    }
    if (doc.contains("provider")) {
      const auto& p = doc["provider"];
      const std::string mode = p.value("mode", "file");
      require(mode == "file" || mode == "http", ErrorCode::ConfigError,
              "provider.mode must be 'file' or 'http'");
      cfg.provider.mode = mode == "file" ? ProviderConfig::Mode::File
                                         : ProviderConfig::Mode::Http;
      cfg.provider.source = p.value("source", std::string{});
      cfg.provider.timeout_ms = p.value("timeout_ms", cfg.provider.timeout_ms);
      const std::string policy = p.value("missing_policy", "skip");
      require(policy == "skip" || policy == "error", ErrorCode::ConfigError,
              "provider.missing_policy must be 'skip' or 'error'");
      cfg.provider.missing_policy =
          policy == "skip" ? MissingPolicy::Skip : MissingPolicy::Error;
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.lr = t.value("lr", cfg.train.lr);
      cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
      cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
      cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.attn_dim = t.value("attn_dim", cfg.train.attn_dim);
      cfg.train.hidden_dim = t.value("hidden_dim", cfg.train.hidden_dim);
      cfg.train.sample_budget =
          t.value("sample_budget", cfg.train.sample_budget);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open");
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

SelectionStrategy::Kind parse_strategy(const std::string& name) {
  if (name == "random") return SelectionStrategy::Kind::Random;
  if (name == "longest") return SelectionStrategy::Kind::Longest;
  if (name == "distinct") return SelectionStrategy::Kind::Distinct;
  if (name == "max-similarity") return SelectionStrategy::Kind::MaxSimilarity;
  if (name == "perfect-boundary") {
    return SelectionStrategy::Kind::PerfectBoundary;
  }
  if (name == "perfect-alignment") {
    return SelectionStrategy::Kind::PerfectAlignment;
  }
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + name + "'");
}

SelectionMode::Kind parse_caption_mode(const std::string& name) {
  if (name == "fixed") return SelectionMode::Kind::Fixed;
  if (name == "scaled") return SelectionMode::Kind::Scaled;
  if (name == "random") return SelectionMode::Kind::Random;
  throw Error(ErrorCode::ConfigError, "unknown caption mode '" + name + "'");
}

int cmd_generate(const Manifest& manifest, const RunConfig& config,
                 const std::filesystem::path& output, std::ostream& log) {
  config.validate();
  require(!manifest.videos.empty(), ErrorCode::ConfigError,
          "generate: manifest has no videos");
  for (const auto& v : manifest.videos) {
    require(!v.subtitle_path.empty(), ErrorCode::ConfigError,
            v.video_id + ": generate requires subtitle_path");
  }
  std::unordered_set<std::string> stoplist;
  if (config.stoplist_path) stoplist = load_stoplist(*config.stoplist_path);

  const Provider provider = open_provider(config.provider);

  struct Outcome {
    std::vector<std::string> lines;
    std::string skip_reason;
    bool skipped = false;
  };
  std::vector<Outcome> outcomes(manifest.videos.size());

  parallel_for(manifest.videos.size(), config.jobs, [&](std::size_t i) {
    const VideoRecord& video = manifest.videos[i];
    Outcome& out = outcomes[i];
    try {
      const FeatureMatrix frames = read_feature_matrix(video.feature_path);
      std::vector<SubtitleWord> words = read_subtitles(video.subtitle_path);
      if (!stoplist.empty()) {
        std::erase_if(words, [&](const SubtitleWord& w) {
          return stoplist.count(w.token) > 0;
        });
      }
      CmgConfig cmg;
      cmg.seed = config.seed ^ fnv1a64(video.video_id);
      cmg.sample_budget = config.sample_budget;
      cmg.k = config.k;
      cmg.index_weight = config.index_weight;
      cmg.strategy.kind = parse_strategy(config.strategy);
      cmg.n1 = config.n1;
      cmg.n2 = config.n2;
      cmg.word_mode = parse_caption_mode(config.caption_mode);
      cmg.all_candidates = config.all_candidates;
      cmg.scaled_ref_len = config.scaled_ref_len;

      const auto moments = run_cmg(frames, video.meta, words, provider, cmg);
      for (const auto& cm : moments) {
        out.lines.push_back(captioned_moment_to_json(cm, video.meta).dump());
      }
    } catch (const std::exception& e) {
      out.skipped = true;
      out.skip_reason = e.what();
    }
  });

  std::ofstream out(output, std::ios::trunc | std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, output.string() + ": cannot open for write");
  }
  std::size_t records = 0;
  std::vector<std::pair<std::string, std::string>> skips;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const Outcome& o = outcomes[i];
    if (o.skipped) {
      skips.emplace_back(manifest.videos[i].video_id, o.skip_reason);
      continue;
    }
    for (const auto& line : o.lines) {
      out << line << '\n';
      ++records;
    }
  }
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoFailure, output.string() + ": write failed");
  }
  write_skip_report(output, skips, config.to_json());

  log << "generate: " << records << " captioned moments, " << skips.size()
      << " videos skipped\n";
  for (const auto& [id, reason] : skips) {
    log << "  skipped " << id << ": " << reason << '\n';
  }
  return records > 0 ? kExitOk : kExitEmpty;
}

int cmd_ground(const Manifest& manifest, const std::filesystem::path& queries,
               const RunConfig& config, const std::filesystem::path& output,
               std::ostream& log) {
  config.validate();
  const auto records = read_jsonl(queries);
  require(!records.empty(), ErrorCode::EmptyEvaluation,
          queries.string() + ": no queries");
  const Provider provider = open_provider(config.provider);

  // Features loaded once per distinct video, then queries run in parallel.
  std::unordered_map<std::string, FeatureMatrix> features;
  for (const auto& rec : records) {
    if (!rec.contains("video_id") || !rec.contains("query")) {
      throw Error(ErrorCode::SchemaError,
                  queries.string() + ": query records need video_id and query");
    }
    const std::string id = rec["video_id"].get<std::string>();
    const VideoRecord* video = manifest.find(id);
    if (video != nullptr && features.find(id) == features.end()) {
      features.emplace(id, read_feature_matrix(video->feature_path));
    }
  }

  struct Outcome {
    std::string line;
    std::string fail_reason;
    bool failed = false;
    std::string video_id;
  };
  std::vector<Outcome> outcomes(records.size());

  parallel_for(records.size(), config.jobs, [&](std::size_t i) {
    Outcome& out = outcomes[i];
    try {
      const std::string id = records[i]["video_id"].get<std::string>();
      const std::string query = records[i]["query"].get<std::string>();
      out.video_id = id;
      const VideoRecord* video = manifest.find(id);
      if (video == nullptr) {
        throw Error(ErrorCode::UnknownVideoId,
                    "video '" + id + "' not in manifest");
      }
      GroundConfig gen;
      gen.k = config.k;
      gen.index_weight = config.index_weight;
      gen.seed = config.seed ^ fnv1a64(id) ^ (fnv1a64(query) << 1);
      gen.sample_budget = config.ground_sample_budget;
      const GroundResult res = ground_query(
          features.at(id), video->meta, split_tokens(query), provider, gen);

      json candidates = json::array();
      for (const auto& c : res.diagnostics) {
        const Interval t = frames_to_interval(c.moment, video->meta);
        candidates.push_back({{"start_frame", c.moment.start},
                              {"end_frame", c.moment.end},
                              {"t_start_s", t.t_start},
                              {"t_end_s", t.t_end},
                              {"score", c.similarity}});
      }
      const json record{{"video_id", id},
                        {"query", query},
                        {"t_start_s", res.interval.t_start},
                        {"t_end_s", res.interval.t_end},
                        {"score", res.similarity},
                        {"candidates", candidates},
                        {"config", config.to_json()}};
      out.line = record.dump();
    } catch (const std::exception& e) {
      out.failed = true;
      out.fail_reason = e.what();
    }
  });

  std::ofstream out(output, std::ios::trunc | std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, output.string() + ": cannot open for write");
  }
  std::size_t written = 0;
  std::vector<std::pair<std::string, std::string>> failures;
  for (const auto& o : outcomes) {
    if (o.failed) {
      failures.emplace_back(o.video_id, o.fail_reason);
      continue;
    }
    out << o.line << '\n';
    ++written;
  }
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoFailure, output.string() + ": write failed");
  }
  write_skip_report(output, failures, config.to_json());

  log << "ground: " << written << " predictions, " << failures.size()
      << " failures\n";
  for (const auto& [id, reason] : failures) {
    log << "  failed " << (id.empty() ? "<unknown>" : id) << ": " << reason
        << '\n';
  }
  return written > 0 ? kExitOk : kExitEmpty;
}

int cmd_evaluate(const std::filesystem::path& predictions,
                 const std::filesystem::path& ground_truth,
                 const std::vector<double>& thresholds,
                 const std::filesystem::path& output, std::ostream& log) {
  const auto pred_records = read_jsonl(predictions);
  const auto gt_records = read_jsonl(ground_truth);

  const auto key_of = [](const json& rec) {
    return rec["video_id"].get<std::string>() + '\x1f' +
           rec["query"].get<std::string>();
  };
  const auto interval_of = [](const json& rec, const std::string& what) {
    require(rec.contains("t_start_s") && rec.contains("t_end_s"),
            ErrorCode::SchemaError, what + ": record needs t_start_s/t_end_s");
    return Interval{rec["t_start_s"].get<double>(),
                    rec["t_end_s"].get<double>()};
  };

  std::map<std::string, Interval> gt;
  for (const auto& rec : gt_records) {
    require(rec.contains("video_id") && rec.contains("query"),
            ErrorCode::SchemaError,
            ground_truth.string() + ": records need video_id and query");
    gt.emplace(key_of(rec), interval_of(rec, "ground truth"));
  }

  std::vector<std::pair<Interval, Interval>> pairs;
  std::size_t unmatched_pred = 0;
  std::unordered_set<std::string> seen;
  for (const auto& rec : pred_records) {
    require(rec.contains("video_id") && rec.contains("query"),
            ErrorCode::SchemaError,
            predictions.string() + ": records need video_id and query");
    const std::string key = key_of(rec);
    if (!seen.insert(key).second) continue;  // first occurrence wins
    auto it = gt.find(key);
    if (it == gt.end()) {
      ++unmatched_pred;
      continue;
    }
    pairs.emplace_back(interval_of(rec, "prediction"), it->second);
  }
  const std::size_t unmatched_gt = gt.size() - pairs.size();
  if (unmatched_pred > 0 || unmatched_gt > 0) {
    log << "evaluate: " << unmatched_pred << " predictions and "
        << unmatched_gt << " ground-truth entries had no counterpart\n";
  }
  if (pairs.empty()) {
    log << "evaluate: no (video_id, query) overlap between files\n";
    return kExitEmpty;
  }

  const EvalReport report = evaluate(pairs, thresholds);
  json recall = json::object();
  for (const auto& [tau, value] : report.recall) {
    recall[format_threshold(tau)] = value;
  }
  const json doc{{"n", report.n},
                 {"recall", recall},
                 {"miou", report.miou},
                 {"config", {{"thresholds", thresholds}}}};
  if (output.empty()) {
    log << doc.dump() << '\n';
  } else {
    std::ofstream out(output, std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::IoFailure,
                  output.string() + ": cannot open for write");
    }
    out << doc.dump() << '\n';
    log << doc.dump() << '\n';
  }
  return kExitOk;
}

int cmd_train(const std::filesystem::path& labels, const Manifest& manifest,
              const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::filesystem::path& trace_csv, std::ostream& log) {
  config.validate();
  const auto records = read_jsonl(labels);
  require(!records.empty(), ErrorCode::EmptyEvaluation,
          labels.string() + ": no pseudo labels");
  const Provider provider = open_provider(config.provider);

  std::unordered_map<std::string, FeatureMatrix> feature_cache;
  std::vector<TrainExample> examples;
  std::vector<std::pair<std::string, std::string>> skips;
  Index input_dim = -1;

  for (const auto& rec : records) {
    std::string id;
    try {
      for (const char* field :
           {"video_id", "start_frame", "end_frame", "caption"}) {
        require(rec.contains(field), ErrorCode::SchemaError,
                labels.string() + ": record missing '" + field + "'");
      }
      id = rec["video_id"].get<std::string>();
      const VideoRecord* video = manifest.find(id);
      if (video == nullptr) {
        throw Error(ErrorCode::UnknownVideoId,
                    "video '" + id + "' not in manifest");
      }
      auto cached = feature_cache.find(id);
      if (cached == feature_cache.end()) {
        cached = feature_cache
                     .emplace(id, read_feature_matrix(video->feature_path))
                     .first;
      }
      const FeatureMatrix& full = cached->second;
      const Index budget = std::min(config.train.sample_budget, full.rows());
      const auto index_map = uniform_sample_indices(full.rows(), budget);

      TrainExample ex;
      ex.frames = uniform_sample_rows(full, budget);
      const Moment original{rec["start_frame"].get<Index>(),
                            rec["end_frame"].get<Index>()};
      ex.gt = sample_moment(original, index_map, full.rows());

      const auto tokens = split_tokens(rec["caption"].get<std::string>());
      require(!tokens.empty(), ErrorCode::NoResolvableTokens,
              id + ": caption has no tokens");
      const auto looked = lookup(provider, tokens);
      require(looked.embeddings.rows() >= 1, ErrorCode::NoResolvableTokens,
              id + ": no caption token has an embedding");
      ex.query_vec = pool_rows(looked.embeddings);
      require(ex.query_vec.size() == ex.frames.cols(), ErrorCode::DimMismatch,
              id + ": embedding dim != feature dim; train needs matching dims");
      if (input_dim < 0) input_dim = ex.frames.cols();
      require(ex.frames.cols() == input_dim, ErrorCode::DimMismatch,
              id + ": feature dim differs across videos");
      examples.push_back(std::move(ex));
    } catch (const std::exception& e) {
      skips.emplace_back(id.empty() ? "<unknown>" : id, e.what());
    }
  }

  log << "train: " << examples.size() << " examples, " << skips.size()
      << " records skipped\n";
  for (const auto& [id, reason] : skips) {
    log << "  skipped " << id << ": " << reason << '\n';
  }
  if (examples.empty()) return kExitEmpty;

  TrainConfig tc;
  tc.head.input_dim = input_dim;
  tc.head.attn_dim = config.train.attn_dim;
  tc.head.hidden_dim = config.train.hidden_dim;
  tc.head.lambda = config.lambda;
  tc.head.huber_delta = config.huber_delta;
  tc.epochs = config.train.epochs;
  tc.lr = config.train.lr;
  tc.beta1 = config.train.beta1;
  tc.beta2 = config.train.beta2;
  tc.adam_eps = config.train.adam_eps;
  tc.batch_size = config.train.batch_size;
  tc.seed = config.seed;

  const TrainResult result = train(examples, tc);

  std::ofstream csv(trace_csv, std::ios::trunc);
  if (!csv) {
    throw Error(ErrorCode::IoFailure,
                trace_csv.string() + ": cannot open for write");
  }
  csv << "# config: " << config.to_json().dump() << '\n';
  csv << "epoch,reg,guide,total\n";
  for (std::size_t e = 0; e < result.trace.size(); ++e) {
    const auto& row = result.trace[e];
    csv << e << ',' << row.reg << ',' << row.guide << ',' << row.total << '\n';
  }

  save_checkpoint(checkpoint, result.params, tc.head, config.seed, tc.epochs);
  log << "train: wrote " << checkpoint.string() << " and "
      << trace_csv.string() << '\n';
  return kExitOk;
}

int cmd_pca_fit(const Manifest& manifest, Index target_dim,
                const std::filesystem::path& model_out, std::ostream& log) {
  require(!manifest.videos.empty(), ErrorCode::ConfigError,
          "pca: manifest has no videos");
  require(target_dim >= 1, ErrorCode::ConfigError, "pca: target_dim must be >= 1");

  std::vector<FeatureMatrix> parts;
  Index cols = -1;
  Index total_rows = 0;
  for (const auto& video : manifest.videos) {
    FeatureMatrix m = read_feature_matrix(video.feature_path);
    if (cols < 0) cols = m.cols();
    require(m.cols() == cols, ErrorCode::DimMismatch,
            video.video_id + ": feature dim differs across files");
    total_rows += m.rows();
    parts.push_back(std::move(m));
  }
  require(target_dim <= cols, ErrorCode::ConfigError,
          "pca: target_dim exceeds feature dimension");

  FeatureMatrix stacked(total_rows, cols);
  Index at = 0;
  for (const auto& part : parts) {
    stacked.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  const PcaModel model = pca_fit(stacked, target_dim);
  write_pca_model(model, model_out);
  log << "pca: fit " << total_rows << "x" << cols << " -> " << target_dim
      << ", wrote " << model_out.string() << '\n';
  return kExitOk;
}

int cmd_pca_apply(const Manifest& manifest,
                  const std::filesystem::path& model_path, std::ostream& log) {
  require(!manifest.videos.empty(), ErrorCode::ConfigError,
          "pca: manifest has no videos");
  const PcaModel model = read_pca_model(model_path);
  for (const auto& video : manifest.videos) {
    const FeatureMatrix m = read_feature_matrix(video.feature_path);
    require(m.cols() == model.dim(), ErrorCode::DimMismatch,
            video.video_id + ": feature dim does not match pca model");
    const FeatureMatrix reduced = pca_transform(model, m);
    const std::filesystem::path out =
        video.feature_path.parent_path() /
        (video.feature_path.stem().string() + ".pca" +
         video.feature_path.extension().string());
    write_feature_matrix(reduced, out);
    log << "pca: " << video.video_id << " -> " << out.string() << '\n';
  }
  return kExitOk;
}

}  // namespace atvg
