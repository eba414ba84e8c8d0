#pragma once

// Checkpoint directories and import of pretrained RoBERTa-family weights.
//
// A checkpoint directory holds:
//   checkpoint.json     format tag, version, dtype, encoder config, tokenizer
//   model.safetensors   F32 weights, CRC-32 of the data region in metadata
//   vocab.json, merges.txt
//   training_log.jsonl  (optional)

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "strel/encoder.hpp"
#include "strel/tokenizer.hpp"
#include "strel/training.hpp"

namespace strel {

inline constexpr std::string_view kCheckpointFormat = "strel-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  Tokenizer tokenizer;
  std::size_t max_tokens = 128;
};

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
// Throws ConfigError on missing or mistyped fields.
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

void save_checkpoint(const Model& model, const Tokenizer& tokenizer,
                     const std::filesystem::path& dir, std::size_t max_tokens,
                     const TrainingLog* log = nullptr);

// Throws CheckpointError for a wrong format tag or version, a corrupted
// weight file, or weights that disagree with the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Reads a Hugging Face style directory (config.json, model.safetensors,
// vocab.json, merges.txt). Tensor names may carry a "roberta." prefix or
// none. When the file has no regression head, the head is initialised
// randomly from head_seed. Throws ImportError.
Checkpoint import_pretrained(const std::filesystem::path& dir, std::uint64_t head_seed,
                             std::size_t max_tokens = 128);

}  // namespace strel
