#pragma once

// Structured run configuration shared by the command-line tools. Parsed from
// JSON with unknown keys rejected at every level; every run writes the
// resolved configuration back out so it can be replayed.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "strel/augment.hpp"
#include "strel/crosslingual.hpp"
#include "strel/training.hpp"

namespace strel {

struct DataConfig {
  std::string language = "eng";
  std::string train;  // canonical CSV paths; empty when unused
  std::string dev;
  std::string test;
  // Used to carve a dev set out of `train` when `dev` is empty.
  double train_fraction = 0.8;

  bool operator==(const DataConfig&) const = default;
};

// Architecture for randomly initialised models; ignored when `pretrained`
// names a directory.
struct ModelConfig {
  std::string pretrained;
  std::size_t hidden_size = 32;
  std::size_t num_layers = 2;
  std::size_t num_attention_heads = 4;
  std::size_t intermediate_size = 64;
  double init_stddev = 0.02;

  bool operator==(const ModelConfig&) const = default;
};

struct ParaphraserConfig {
  std::string type = "mock";  // mock | http
  std::string url;
  std::string model = "t5-paraphrase";
  nlohmann::json generation = nlohmann::json::object();

  bool operator==(const ParaphraserConfig&) const = default;
};

struct AugmentConfig {
  bool enabled = false;
  AugmentationPolicy policy;
  ParaphraserConfig paraphraser;

  bool operator==(const AugmentConfig&) const = default;
};

struct TranslationConfig {
  std::string client = "identity";  // identity | table | google
  std::string table;                // CSV `source,target` for the table client
  std::string api_key_env = "GOOGLE_TRANSLATE_API_KEY";
  std::string base_url = "https://translation.googleapis.com/language/translate/v2";
  std::string cache;  // empty: memory only
  std::string target_language = "eng";
  std::size_t max_concurrency = 4;
  std::size_t max_attempts = 5;
  std::int64_t initial_delay_ms = 500;

  bool operator==(const TranslationConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "runs/default";
  DataConfig data;
  ModelConfig model;
  TrainingConfig training;
  AugmentConfig augmentation;
  TranslationConfig translation;
  std::size_t eval_batch_size = 16;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError naming the offending key.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);
// Pretty-printed JSON with a trailing newline; stable key order.
std::string serialize_run_config(const RunConfig& config);

}  // namespace strel
