#pragma once

// Translate-then-score evaluation: both sentences of every pair are
// translated into the target language (English by default) and scored with a
// model trained in that language.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strel/data.hpp"
#include "strel/encoder.hpp"
#include "strel/error.hpp"
#include "strel/metrics.hpp"
#include "strel/tokenizer.hpp"

namespace strel {

class TranslationError : public Error {
 public:
  enum class Category { transient, permanent, quota };

  TranslationError(Category category, const std::string& message)
      : Error("translation", message), category_(category) {}

  Category category() const noexcept { return category_; }
  bool retryable() const noexcept { return category_ != Category::permanent; }

 private:
  Category category_;
};

// Raised by translate_dataset when some pairs could not be translated.
class TranslationPipelineError : public Error {
 public:
  TranslationPipelineError(std::vector<std::string> failed_pair_ids, const std::string& detail);
  const std::vector<std::string>& failed_pair_ids() const noexcept { return failed_; }

 private:
  std::vector<std::string> failed_;
};

// Implementations must tolerate concurrent translate() calls.
class TranslationClient {
 public:
  virtual ~TranslationClient() = default;
  // Throws TranslationError.
  virtual std::string translate(std::string_view text, std::string_view source_language,
                                std::string_view target_language) = 0;
  virtual std::string identifier() const = 0;
  virtual bool is_identity() const { return false; }
};

class IdentityClient : public TranslationClient {
 public:
  std::string translate(std::string_view text, std::string_view,
                        std::string_view) override {
    return std::string(text);
  }
  std::string identifier() const override { return "identity"; }
  bool is_identity() const override { return true; }
};

// Looks texts up in a fixed table; unknown texts are a permanent failure.
class TableClient : public TranslationClient {
 public:
  explicit TableClient(std::map<std::string, std::string> table) : table_(std::move(table)) {}
  std::string translate(std::string_view text, std::string_view source_language,
                        std::string_view target_language) override;
  std::string identifier() const override { return "table"; }

 private:
  std::map<std::string, std::string> table_;
};

struct HttpTranslationConfig {
  std::string api_key;
  std::string base_url = "https://translation.googleapis.com/language/translate/v2";
  std::chrono::milliseconds timeout{30000};
};

// Google Cloud Translation v2 REST API. HTTP 429 and quota-exceeded 403s map
// to quota, 5xx and transport errors to transient, other statuses to
// permanent.
class HttpTranslationClient : public TranslationClient {
 public:
  explicit HttpTranslationClient(HttpTranslationConfig config);
  std::string translate(std::string_view text, std::string_view source_language,
                        std::string_view target_language) override;
  std::string identifier() const override { return "google-v2"; }

 private:
  HttpTranslationConfig config_;
};

// Map from (text, source language, target language) to a translation,
// optionally persisted to an append-only file.
//
// File layout (integers little-endian):
//   magic     8 bytes  "STRELTC" 0x01
//   record*   u32 payload_length
//             payload: key[32] (SHA-256 of src NUL tgt NUL text)
//                      u8 src_len, src, u8 tgt_len, tgt,
//                      u32 text_len, translated text
//             u32 CRC-32 of the payload
// A partially written final record is discarded on open; any other damage
// is an error.
class TranslationCache {
 public:
  TranslationCache() = default;  // memory only
  // Creates the file if missing. Throws IoError on a malformed file.
  explicit TranslationCache(const std::filesystem::path& path);

  std::optional<std::string> lookup(std::string_view text, std::string_view source_language,
                                    std::string_view target_language) const;
  void insert(std::string_view text, std::string_view source_language,
              std::string_view target_language, std::string_view translation);
  std::size_t size() const;

  using Key = std::array<std::uint8_t, 32>;
  static Key make_key(std::string_view text, std::string_view source_language,
                      std::string_view target_language);

 private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  mutable std::mutex mu_;
  std::unordered_map<Key, std::string, KeyHash> entries_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
};

struct RetryPolicy {
  std::size_t max_attempts = 5;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};
  // Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;

  // Delay before attempt `attempt` (2-based: the first retry).
  std::chrono::milliseconds delay_before(std::size_t attempt) const;
};

// Calls the client, retrying transient and quota failures with exponential
// backoff. Rethrows the last error once attempts run out.
std::string translate_with_retry(TranslationClient& client, std::string_view text,
                                 std::string_view source_language,
                                 std::string_view target_language, const RetryPolicy& retry);

struct TranslateOptions {
  std::string target_language = "eng";
  std::size_t max_concurrency = 4;
  RetryPolicy retry;
};

// Translates every sentence independently, consulting the cache first.
// Pair ids and scores pass through unchanged. Throws ValidationError when
// source and target languages match and the client is not the identity, and
// TranslationPipelineError listing the pairs that failed.
PairDataset translate_dataset(const PairDataset& dataset, TranslationClient& client,
                              TranslationCache& cache, const TranslateOptions& options);

struct CrosslingualResult {
  PairDataset translated;
  std::vector<double> predictions;
  metrics::EvaluationReport report;
};

CrosslingualResult crosslingual_evaluate(const Model& model, const Tokenizer& tokenizer,
                                         const PairDataset& dataset, TranslationClient& client,
                                         TranslationCache& cache, const TranslateOptions& options,
                                         std::size_t max_tokens, std::size_t batch_size);

}  // namespace strel
