#include "atvg/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace atvg;

int map_exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::SchemaError:
    case ErrorCode::BadTag:
    case ErrorCode::DimMismatch:
    case ErrorCode::KTooLarge:
      return kExitConfig;
    case ErrorCode::EmptyEvaluation:
    case ErrorCode::NoCandidateWords:
    case ErrorCode::NoResolvableTokens:
      return kExitEmpty;
    case ErrorCode::IoFailure:
    case ErrorCode::BadMagic:
    case ErrorCode::Truncated:
    case ErrorCode::StoreUnreadable:
    case ErrorCode::HttpFailure:
      return kExitIo;
    default:
      return kExitConfig;
  }
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string output;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool output_required) {
  cmd->add_option("--config", flags.config_path, "JSON run-config file");
  cmd->add_option("--seed", flags.seed, "RNG seed (overrides config)");
  cmd->add_option("--jobs", flags.jobs,
                  "worker threads, 0 = logical cores (overrides config)");
  auto* out = cmd->add_option("--output", flags.output, "output path");
  if (output_required) out->required();
}

struct ProviderFlags {
  std::string store;
  std::string url;
  std::optional<int> timeout_ms;
  std::string missing_policy;
};

void add_provider(CLI::App* cmd, ProviderFlags& flags) {
  cmd->add_option("--embed-store", flags.store,
                  "embedding store matrix file (sidecar at <path>.json)");
  cmd->add_option("--embed-url", flags.url, "embedding HTTP endpoint base URL");
  cmd->add_option("--timeout-ms", flags.timeout_ms, "HTTP timeout");
  cmd->add_option("--missing-policy", flags.missing_policy,
                  "skip | error for tokens without embeddings");
}

RunConfig resolve_config(const CommonFlags& common,
                         const ProviderFlags* provider) {
  RunConfig cfg;
  if (!common.config_path.empty()) {
    cfg = load_run_config(common.config_path);
  }
  if (common.seed) cfg.seed = *common.seed;
  if (common.jobs) cfg.jobs = *common.jobs;
  if (provider != nullptr) {
    if (!provider->store.empty()) {
      cfg.provider.mode = ProviderConfig::Mode::File;
      cfg.provider.source = provider->store;
    }
    if (!provider->url.empty()) {
      cfg.provider.mode = ProviderConfig::Mode::Http;
      cfg.provider.source = provider->url;
    }
    if (provider->timeout_ms) cfg.provider.timeout_ms = *provider->timeout_ms;
    if (!provider->missing_policy.empty()) {
      require(provider->missing_policy == "skip" ||
                  provider->missing_policy == "error",
              ErrorCode::ConfigError, "--missing-policy must be skip or error");
      cfg.provider.missing_policy = provider->missing_policy == "skip"
                                        ? MissingPolicy::Skip
                                        : MissingPolicy::Error;
    }
  }
  // Environment override beats everything.
  if (const char* env = std::getenv("ATVG_EMBED_URL");
      env != nullptr && env[0] != '\0') {
    cfg.provider.mode = ProviderConfig::Mode::Http;
    cfg.provider.source = env;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"captioned-moment generation, zero-shot grounding, and "
               "evaluation for temporal video grounding"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand(
      "generate", "produce captioned pseudo-label moments from a manifest");
  CommonFlags gen_common;
  ProviderFlags gen_provider;
  std::string gen_manifest;
  std::string gen_stoplist;
  std::optional<Index> gen_k, gen_n1, gen_n2, gen_budget;
  std::optional<double> gen_weight;
  std::string gen_strategy, gen_mode;
  bool gen_all = false;
  generate->add_option("--manifest", gen_manifest, "manifest JSON")->required();
  add_common(generate, gen_common, true);
  add_provider(generate, gen_provider);
  generate->add_option("--k", gen_k, "k-means cluster count");
  generate->add_option("--n1", gen_n1, "nouns per caption");
  generate->add_option("--n2", gen_n2, "verbs per caption");
  generate->add_option("--sample-budget", gen_budget, "frame sampling budget");
  generate->add_option("--index-weight", gen_weight, "frame-index column weight");
  generate->add_option("--strategy", gen_strategy,
                       "random | longest | distinct | max-similarity");
  generate->add_option("--caption-mode", gen_mode, "fixed | scaled | random");
  generate->add_flag("--all-candidates", gen_all,
                     "emit one record per candidate moment");
  generate->add_option("--stoplist", gen_stoplist,
                       "JSON array of tokens to drop before selection");

  // ground
  auto* ground = app.add_subcommand(
      "ground", "zero-shot grounding of queries against manifest videos");
  CommonFlags ground_common;
  ProviderFlags ground_provider;
  std::string ground_manifest, ground_queries;
  std::optional<Index> ground_k, ground_budget;
  std::optional<double> ground_weight;
  ground->add_option("--manifest", ground_manifest, "manifest JSON")->required();
  ground->add_option("--queries", ground_queries, "queries JSONL")->required();
  add_common(ground, ground_common, true);
  add_provider(ground, ground_provider);
  ground->add_option("--k", ground_k, "k-means cluster count");
  ground->add_option("--sample-budget", ground_budget,
                     "frame sampling budget for grounding");
  ground->add_option("--index-weight", ground_weight,
                     "frame-index column weight");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "R@tIoU and mIoU of predictions against ground truth");
  CommonFlags eval_common;
  std::string eval_predictions, eval_gt;
  std::vector<double> eval_thresholds;
  evaluate->add_option("--predictions", eval_predictions, "predictions JSONL")
      ->required();
  evaluate->add_option("--ground-truth", eval_gt, "ground-truth JSONL")
      ->required();
  evaluate->add_option("--thresholds", eval_thresholds,
                       "tIoU thresholds (default 0.3 0.5 0.7)");
  add_common(evaluate, eval_common, false);

  // train
  auto* train = app.add_subcommand(
      "train", "train the grounding head on pseudo labels");
  CommonFlags train_common;
  ProviderFlags train_provider;
  std::string train_manifest, train_labels, train_trace;
  std::optional<int> train_epochs;
  std::optional<double> train_lr, train_lambda;
  std::optional<Index> train_batch;
  train->add_option("--manifest", train_manifest, "manifest JSON")->required();
  train->add_option("--labels", train_labels, "pseudo-label JSONL")->required();
  train->add_option("--trace", train_trace, "loss trace CSV path")->required();
  add_common(train, train_common, true);
  add_provider(train, train_provider);
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--lr", train_lr, "Adam learning rate");
  train->add_option("--lambda", train_lambda, "guide-loss weight");
  train->add_option("--batch-size", train_batch, "minibatch size, 0 = full");

  // pca
  auto* pca = app.add_subcommand(
      "pca", "fit or apply dimensionality reduction over manifest features");
  CommonFlags pca_common;
  std::string pca_manifest, pca_mode = "fit", pca_model;
  Index pca_dim = 500;
  pca->add_option("--manifest", pca_manifest, "manifest JSON")->required();
  pca->add_option("--mode", pca_mode, "fit | apply")->required();
  pca->add_option("--model", pca_model, "model path (output for fit)")
      ->required();
  pca->add_option("--target-dim", pca_dim, "target dimension (fit mode)");
  add_common(pca, pca_common, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      RunConfig cfg = resolve_config(gen_common, &gen_provider);
      if (gen_k) cfg.k = *gen_k;
      if (gen_n1) cfg.n1 = *gen_n1;
      if (gen_n2) cfg.n2 = *gen_n2;
      if (gen_budget) cfg.sample_budget = *gen_budget;
      if (gen_weight) cfg.index_weight = *gen_weight;
      if (!gen_strategy.empty()) cfg.strategy = gen_strategy;
      if (!gen_mode.empty()) cfg.caption_mode = gen_mode;
      if (gen_all) cfg.all_candidates = true;
      if (!gen_stoplist.empty()) cfg.stoplist_path = gen_stoplist;
      const Manifest manifest = read_manifest(gen_manifest);
      return cmd_generate(manifest, cfg, gen_common.output, std::cout);
    }
    if (ground->parsed()) {
      RunConfig cfg = resolve_config(ground_common, &ground_provider);
      if (ground_k) cfg.k = *ground_k;
      if (ground_budget) cfg.ground_sample_budget = *ground_budget;
      if (ground_weight) cfg.index_weight = *ground_weight;
      const Manifest manifest = read_manifest(ground_manifest);
      return cmd_ground(manifest, ground_queries, cfg, ground_common.output,
                        std::cout);
    }
    if (evaluate->parsed()) {
      RunConfig cfg = resolve_config(eval_common, nullptr);
      if (!eval_thresholds.empty()) cfg.thresholds = eval_thresholds;
      cfg.validate();
      return cmd_evaluate(eval_predictions, eval_gt, cfg.thresholds,
                          eval_common.output, std::cout);
    }
    if (train->parsed()) {
      RunConfig cfg = resolve_config(train_common, &train_provider);
      if (train_epochs) cfg.train.epochs = *train_epochs;
      if (train_lr) cfg.train.lr = *train_lr;
      if (train_lambda) cfg.lambda = *train_lambda;
      if (train_batch) cfg.train.batch_size = *train_batch;
      const Manifest manifest = read_manifest(train_manifest);
      return cmd_train(train_labels, manifest, cfg, train_common.output,
                       train_trace, std::cout);
    }
    if (pca->parsed()) {
      const Manifest manifest = read_manifest(pca_manifest);
      if (pca_mode == "fit") {
        return cmd_pca_fit(manifest, pca_dim, pca_model, std::cout);
      }
      if (pca_mode == "apply") {
        return cmd_pca_apply(manifest, pca_model, std::cout);
      }
      throw Error(ErrorCode::ConfigError, "pca --mode must be fit or apply");
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return map_exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
