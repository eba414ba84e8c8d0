#pragma once

// Sentence-pair relatedness datasets: the canonical CSV format, the SemEval
// distribution importer, reproducible splitting and summary statistics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strel {

enum class Split { train, dev, test, unsplit };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct LabeledPair {
  std::string pair_id;
  std::string sentence_1;
  std::string sentence_2;
  // Relatedness in [0, 1]; absent for unlabeled (competition test) files.
  std::optional<double> score;

  bool operator==(const LabeledPair&) const = default;
};

// An immutable, validated, ordered collection of pairs.
//
// Either every pair carries a score (labeled) or none does. Pair ids are
// unique, sentences are non-empty after trimming, scores lie in [0, 1].
class PairDataset {
 public:
  PairDataset() = default;

  // Throws ValidationError when any invariant fails. `labeled` is inferred
  // from the pairs unless given; it only matters for an empty dataset.
  PairDataset(std::string language, Split split, std::vector<LabeledPair> pairs,
              std::optional<bool> labeled = std::nullopt);

  const std::string& language() const noexcept { return language_; }
  Split split() const noexcept { return split_; }
  bool labeled() const noexcept { return labeled_; }

  std::span<const LabeledPair> pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const LabeledPair& operator[](std::size_t i) const { return pairs_[i]; }
  auto begin() const noexcept { return pairs_.begin(); }
  auto end() const noexcept { return pairs_.end(); }

  // Throws ValidationError for an unlabeled dataset.
  std::vector<double> scores() const;

  bool operator==(const PairDataset&) const = default;

 private:
  std::string language_;
  Split split_ = Split::unsplit;
  std::vector<LabeledPair> pairs_;
  bool labeled_ = true;
};

// Canonical format: UTF-8, header `pair_id,sentence_1,sentence_2,score`,
// RFC 4180 quoting. An empty score column marks an unlabeled row.
PairDataset parse_dataset(std::string_view csv_text, std::string language,
                          Split split);
PairDataset parse_dataset(std::istream& in, std::string language, Split split);

// Sentences are always quoted, the score uses the shortest decimal form that
// round-trips, lines end with LF. parse_dataset(serialize_dataset(d)) == d.
std::string serialize_dataset(const PairDataset& dataset);
void write_dataset(std::ostream& out, const PairDataset& dataset);

// SemEval distribution: columns `PairID,Text[,Score]`, where Text holds both
// sentences separated by a newline. A literal two-character "\n" escape is
// accepted when the field has no real line break.
PairDataset import_semrel(std::string_view csv_text, std::string language,
                          Split split);
PairDataset import_semrel(std::istream& in, std::string language, Split split);

struct SplitResult {
  PairDataset train;
  PairDataset held_out;
};

// Random partition with round(train_fraction * size) training pairs. Each
// side keeps the source order. Deterministic for a given seed.
SplitResult split_dataset(const PairDataset& dataset, double train_fraction,
                          std::uint64_t seed, Split held_out_split = Split::dev);

inline constexpr std::size_t kHistogramBins = 10;
using ScoreHistogram = std::array<std::size_t, kHistogramBins>;

struct DatasetStats {
  std::size_t count = 0;
  double mean_score = 0.0;
  double std_score = 0.0;  // sample standard deviation (n - 1); 0 for n = 1
  double min_score = 0.0;
  double max_score = 0.0;
  ScoreHistogram histogram{};
};

// Bin b holds scores in [0.1 b, 0.1 (b + 1)); the last bin is closed.
// Throws ValidationError for scores outside [0, 1].
std::size_t histogram_bin(double score);
ScoreHistogram score_histogram(std::span<const double> scores);

// Throws ValidationError for empty or unlabeled datasets.
DatasetStats compute_stats(const PairDataset& dataset);

// Whole-file helpers that throw IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

PairDataset load_dataset(const std::filesystem::path& path, std::string language,
                         Split split);
void save_dataset(const std::filesystem::path& path, const PairDataset& dataset);

}  // namespace strel
