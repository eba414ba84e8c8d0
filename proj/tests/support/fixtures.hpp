#pragma once

// Shared builders for tests: synthetic pair datasets and tiny models.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "strel/data.hpp"
#include "strel/encoder.hpp"
#include "strel/tokenizer.hpp"

namespace fixtures {

// n distinct labeled pairs with scores spread over [0, 1].
inline strel::PairDataset synthetic_pairs(std::size_t n, std::uint64_t seed = 1,
                                          strel::Split split = strel::Split::train,
                                          const std::string& language = "eng") {
  static const char* words[] = {"red",  "blue",  "cat",   "dog",  "tree", "stone",
                                "river", "sky", "bread", "house", "boat", "field"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(words) - 1);
  std::vector<strel::LabeledPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string a = std::string(words[pick(rng)]) + " " + words[pick(rng)] + " " +
                    std::to_string(i);
    std::string b = std::string(words[pick(rng)]) + " near the " + words[pick(rng)];
    const double score = static_cast<double>(i % 17) / 16.0;
    pairs.push_back({"P-" + std::to_string(i), a, b, score});
  }
  return strel::PairDataset(language, split, std::move(pairs));
}

template <typename T = float>
strel::RegressionModel<T> tiny_model(const strel::Tokenizer& tok, std::uint64_t seed = 7,
                                     std::size_t max_tokens = 64, double stddev = 0.02) {
  strel::RegressionModel<T> m(strel::EncoderConfig::tiny(tok.vocab_size(), max_tokens));
  m.init_random(seed, stddev);
  m.set_dropout(0.0, 0.0);
  return m;
}

}  // namespace fixtures
