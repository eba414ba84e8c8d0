#pragma once

// Paraphrase augmentation of training sets. Augmented pairs inherit the
// source pair's score and get ids of the form `<source>#aug<k>`, k from 1.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "strel/data.hpp"

namespace strel {

// Implementations must tolerate concurrent paraphrase() calls.
class Paraphraser {
 public:
  virtual ~Paraphraser() = default;

  // Up to k non-empty paraphrases of `text`. May throw on failure.
  virtual std::vector<std::string> paraphrase(std::string_view text, std::size_t k) = 0;
  virtual std::string identifier() const = 0;
  // Generation settings recorded in the manifest.
  virtual nlohmann::json parameters() const { return nlohmann::json::object(); }
};

// Deterministic stand-in: the k-th paraphrase rotates the words of the text
// by k and marks it with the copy number.
class MockParaphraser : public Paraphraser {
 public:
  std::vector<std::string> paraphrase(std::string_view text, std::size_t k) override;
  std::string identifier() const override { return "mock"; }
};

struct HttpParaphraserConfig {
  std::string url;  // POST target
  std::string model = "t5-paraphrase";
  // Merged into every request, e.g. {"num_beams": 5}.
  nlohmann::json generation = nlohmann::json::object();
  std::chrono::milliseconds timeout{30000};
};

// Sends {"text", "num_return_sequences", "model", ...generation} and expects
// {"paraphrases": [..]} back.
class HttpParaphraser : public Paraphraser {
 public:
  explicit HttpParaphraser(HttpParaphraserConfig config);
  std::vector<std::string> paraphrase(std::string_view text, std::size_t k) override;
  std::string identifier() const override;
  nlohmann::json parameters() const override;

 private:
  HttpParaphraserConfig config_;
};

enum class AugmentTarget { first, second, both };

std::string_view target_name(AugmentTarget target);
AugmentTarget parse_target(std::string_view name);

struct AugmentationPolicy {
  std::size_t copies_per_pair = 1;
  AugmentTarget target = AugmentTarget::first;
  // Drop augmented pairs identical to a pair already in the output.
  bool dedup = true;
  std::size_t max_concurrency = 4;

  bool operator==(const AugmentationPolicy&) const = default;
};

struct ManifestEntry {
  std::string pair_id;
  std::string source_pair_id;
  std::size_t copy_index = 0;
  std::string paraphraser;
  AugmentTarget target = AugmentTarget::first;
  nlohmann::json parameters;

  bool operator==(const ManifestEntry&) const = default;
};

struct AugmentResult {
  PairDataset dataset;
  std::vector<ManifestEntry> manifest;
  // Sources the paraphraser failed on; they contribute no augmented pairs.
  std::vector<std::string> skipped;
};

// Originals first, in order, then augmented pairs grouped by source in
// source order. Throws ValidationError unless the set is a labeled training
// split.
AugmentResult augment(const PairDataset& train_set, Paraphraser& paraphraser,
                      const AugmentationPolicy& policy);

std::string serialize_manifest(std::span<const ManifestEntry> manifest);
std::vector<ManifestEntry> parse_manifest(std::string_view text);

}  // namespace strel
