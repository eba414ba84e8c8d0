#pragma once

// Byte-level BPE tokenizer with the RoBERTa pair convention
// `<s> A </s></s> B </s>`.
//
// Loads the standard vocab.json / merges.txt pair, so pretrained RoBERTa
// vocabularies work unchanged. Without files it falls back to a built-in
// byte vocabulary (4 specials + 256 byte symbols, no merges), which is what
// randomly initialised models use.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace strel {

struct LabeledPair;

struct TokenizedInput {
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> attention_mask;

  std::size_t size() const noexcept { return token_ids.size(); }
  bool operator==(const TokenizedInput&) const = default;
};

struct SpecialTokens {
  std::int32_t bos = 0;
  std::int32_t pad = 1;
  std::int32_t eos = 2;
  std::int32_t unk = 3;
};

class Tokenizer {
 public:
  static constexpr std::string_view kIdentifier = "byte-level-bpe";
  // <s> A </s></s> B </s>
  static constexpr std::size_t kPairSpecialTokens = 4;

  static Tokenizer byte_level();
  static Tokenizer from_files(const std::filesystem::path& vocab_json,
                              const std::filesystem::path& merges_txt);
  // Reads vocab.json and merges.txt from `dir`.
  static Tokenizer load(const std::filesystem::path& dir);

  // Writes vocab.json and merges.txt into `dir`.
  void save(const std::filesystem::path& dir) const;

  // Token ids for `text`, without special tokens.
  std::vector<std::int32_t> encode(std::string_view text) const;
  std::string decode(std::span<const std::int32_t> ids) const;

  // Throws ValidationError for an empty sentence or max_tokens < 4. Longer
  // inputs are truncated one token at a time from the longer sentence.
  TokenizedInput encode_pair(std::string_view first, std::string_view second,
                             std::size_t max_tokens) const;

  std::size_t vocab_size() const noexcept { return id_to_token_.size(); }
  const SpecialTokens& special() const noexcept { return special_; }
  std::size_t merge_count() const noexcept { return merges_.size(); }

  // Splits text into the pre-tokens BPE runs on (GPT-2 pattern). Exposed for
  // testing.
  static std::vector<std::string> pretokenize(std::string_view text);

 private:
  Tokenizer(std::vector<std::string> id_to_token,
            std::vector<std::pair<std::string, std::string>> merges);

  std::vector<std::string> bpe(const std::string& mapped) const;

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, std::size_t> merge_rank_;
  SpecialTokens special_;
};

TokenizedInput tokenize(const Tokenizer& tokenizer, const LabeledPair& pair,
                        std::size_t max_tokens);

}  // namespace strel
