#include "strel/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "strel/csv.hpp"
#include "strel/error.hpp"

namespace strel {
namespace {

constexpr std::string_view kCanonicalHeader[] = {"pair_id", "sentence_1",
                                                  "sentence_2", "score"};

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

// Returns the byte offset of the first invalid UTF-8 sequence, or npos.
std::size_t invalid_utf8_offset(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return i;
    }
    if (i + len > s.size()) return i;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (cc & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
    i += len;
  }
  return std::string_view::npos;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

void require_utf8(std::string_view text) {
  if (auto bad = invalid_utf8_offset(text); bad != std::string_view::npos) {
    throw ParseError(line_of_offset(text, bad), "invalid UTF-8 byte sequence");
  }
}

// Strict decimal: digits, optionally followed by '.' and digits.
std::optional<double> parse_score(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 0) return std::nullopt;
  if (i < s.size()) {
    if (s[i] != '.') return std::nullopt;
    const std::size_t frac = ++i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == frac || i != s.size()) return std::nullopt;
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string format_score(double score) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), score);
  return std::string(buf, ptr);
}

bool is_blank_record(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].empty();
}

std::string slurp(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
    case Split::unsplit:
      return "unsplit";
  }
  return "unsplit";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  if (name == "unsplit") return Split::unsplit;
  throw ValidationError("unknown split name '" + std::string(name) + "'");
}

PairDataset::PairDataset(std::string language, Split split,
                         std::vector<LabeledPair> pairs,
                         std::optional<bool> labeled)
    : language_(std::move(language)), split_(split), pairs_(std::move(pairs)) {
  std::size_t with_score = 0;
  std::unordered_set<std::string_view> ids;
  ids.reserve(pairs_.size());
  for (const auto& p : pairs_) {
    if (p.pair_id.empty()) throw ValidationError("pair with empty pair_id");
    if (!ids.insert(p.pair_id).second) {
      throw ValidationError("duplicate pair_id '" + p.pair_id + "'");
    }
    if (trim(p.sentence_1).empty() || trim(p.sentence_2).empty()) {
      throw ValidationError("pair '" + p.pair_id + "' has an empty sentence");
    }
    if (p.score) {
      const double s = *p.score;
      if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw ValidationError("pair '" + p.pair_id + "' has score " +
                              format_score(s) + " outside [0, 1]");
      }
      ++with_score;
    }
  }
  if (with_score != 0 && with_score != pairs_.size()) {
    throw ValidationError("dataset mixes labeled and unlabeled pairs");
  }
  labeled_ = pairs_.empty() ? labeled.value_or(true) : with_score != 0;
  if (labeled && *labeled != labeled_) {
    throw ValidationError(labeled_ ? "expected unlabeled pairs"
                                   : "expected labeled pairs");
  }
}

std::vector<double> PairDataset::scores() const {
  if (!labeled_) throw ValidationError("dataset is unlabeled");
  std::vector<double> out;
  out.reserve(pairs_.size());
  for (const auto& p : pairs_) out.push_back(*p.score);
  return out;
}

PairDataset parse_dataset(std::string_view csv_text, std::string language,
                          Split split) {
  require_utf8(csv_text);
  csv::Reader reader(csv_text);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ParseError(1, "missing header");
  if (fields.size() != 4 ||
      !std::equal(fields.begin(), fields.end(), std::begin(kCanonicalHeader))) {
    throw ParseError(reader.record_line(),
                     "expected header pair_id,sentence_1,sentence_2,score");
  }

  std::vector<LabeledPair> pairs;
  while (reader.next(fields)) {
    if (is_blank_record(fields)) continue;
    const std::size_t line = reader.record_line();
    if (fields.size() != 4) {
      throw ParseError(line, "expected 4 fields, found " +
                                 std::to_string(fields.size()));
    }
    LabeledPair pair{std::move(fields[0]), std::move(fields[1]),
                     std::move(fields[2]), std::nullopt};
    if (!fields[3].empty()) {
      pair.score = parse_score(fields[3]);
      if (!pair.score) {
        throw ParseError(line, "score '" + fields[3] + "' of pair '" +
                                   pair.pair_id + "' is not a decimal number");
      }
    }
    pairs.push_back(std::move(pair));
  }
  return PairDataset(std::move(language), split, std::move(pairs));
}

PairDataset parse_dataset(std::istream& in, std::string language, Split split) {
  return parse_dataset(slurp(in), std::move(language), split);
}

std::string serialize_dataset(const PairDataset& dataset) {
  std::string out = "pair_id,sentence_1,sentence_2,score\n";
  for (const auto& p : dataset) {
    csv::append_field(out, p.pair_id);
    out.push_back(',');
    csv::append_field(out, p.sentence_1, true);
    out.push_back(',');
    csv::append_field(out, p.sentence_2, true);
    out.push_back(',');
    if (p.score) out += format_score(*p.score);
    out.push_back('\n');
  }
  return out;
}

void write_dataset(std::ostream& out, const PairDataset& dataset) {
  out << serialize_dataset(dataset);
}

PairDataset import_semrel(std::string_view csv_text, std::string language,
                          Split split) {
  require_utf8(csv_text);
  csv::Reader reader(csv_text);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ImportError("missing header");

  std::optional<std::size_t> id_col, text_col, score_col;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto name = trim(fields[i]);
    if (name == "PairID") id_col = i;
    if (name == "Text") text_col = i;
    if (name == "Score") score_col = i;
  }
  if (!id_col || !text_col) {
    throw ImportError("header must contain PairID and Text columns");
  }
  const std::size_t width = fields.size();

  std::vector<LabeledPair> pairs;
  while (reader.next(fields)) {
    if (is_blank_record(fields)) continue;
    const std::size_t line = reader.record_line();
    if (fields.size() != width) {
      throw ParseError(line, "expected " + std::to_string(width) +
                                 " fields, found " +
                                 std::to_string(fields.size()));
    }
    const std::string& id = fields[*id_col];
    const std::string& text = fields[*text_col];

    std::string first, second;
    if (auto nl = text.find('\n'); nl != std::string::npos) {
      first = text.substr(0, nl);
      if (!first.empty() && first.back() == '\r') first.pop_back();
      second = text.substr(nl + 1);
    } else if (auto esc = text.find("\\n"); esc != std::string::npos) {
      first = text.substr(0, esc);
      second = text.substr(esc + 2);
    } else {
      throw ImportError("pair '" + id + "' (line " + std::to_string(line) +
                        "): Text has no newline separating the two sentences");
    }

    LabeledPair pair{id, std::move(first), std::move(second), std::nullopt};
    if (score_col) {
      const std::string_view raw = trim(fields[*score_col]);
      pair.score = parse_score(raw);
      if (!pair.score) {
        throw ParseError(line, "score '" + std::string(raw) + "' of pair '" +
                                   id + "' is not a decimal number");
      }
    }
    pairs.push_back(std::move(pair));
  }
  return PairDataset(std::move(language), split, std::move(pairs),
                     score_col.has_value());
}

PairDataset import_semrel(std::istream& in, std::string language, Split split) {
  return import_semrel(slurp(in), std::move(language), split);
}

SplitResult split_dataset(const PairDataset& dataset, double train_fraction,
                          std::uint64_t seed, Split held_out_split) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  if (n < 2) throw ValidationError("cannot split fewer than 2 pairs");
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw ValidationError("train fraction " + format_score(train_fraction) +
                          " leaves one side of the split empty");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  std::vector<LabeledPair> train, held_out;
  train.reserve(n_train);
  held_out.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : held_out).push_back(dataset[i]);
  }
  return {PairDataset(dataset.language(), Split::train, std::move(train),
                      dataset.labeled()),
          PairDataset(dataset.language(), held_out_split, std::move(held_out),
                      dataset.labeled())};
}

std::size_t histogram_bin(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("score " + format_score(score) +
                          " outside [0, 1] cannot be binned");
  }
  // Compare against the decimal edges rather than flooring score * 10, which
  // misplaces values such as 0.3 that sit on an edge.
  std::size_t bin = 0;
  while (bin + 1 < kHistogramBins &&
         score >= static_cast<double>(bin + 1) / 10.0) {
    ++bin;
  }
  return bin;
}

ScoreHistogram score_histogram(std::span<const double> scores) {
  ScoreHistogram h{};
  for (double s : scores) ++h[histogram_bin(s)];
  return h;
}

DatasetStats compute_stats(const PairDataset& dataset) {
  if (!dataset.labeled()) {
    throw ValidationError("statistics require a labeled dataset");
  }
  if (dataset.empty()) throw ValidationError("statistics of an empty dataset");
  const auto scores = dataset.scores();

  DatasetStats stats;
  stats.count = scores.size();
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  stats.min_score = *lo;
  stats.max_score = *hi;
  double sum = 0.0;
  for (double s : scores) sum += s;
  stats.mean_score = sum / static_cast<double>(stats.count);
  // Keep the mean inside [min, max] when rounding would push it out.
  stats.mean_score = std::clamp(stats.mean_score, stats.min_score, stats.max_score);
  if (stats.count > 1) {
    double ss = 0.0;
    for (double s : scores) ss += (s - stats.mean_score) * (s - stats.mean_score);
    stats.std_score = std::sqrt(ss / static_cast<double>(stats.count - 1));
  }
  stats.histogram = score_histogram(scores);
  return stats;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

PairDataset load_dataset(const std::filesystem::path& path, std::string language,
                         Split split) {
  return parse_dataset(read_text_file(path), std::move(language), split);
}

void save_dataset(const std::filesystem::path& path, const PairDataset& dataset) {
  write_text_file(path, serialize_dataset(dataset));
}

}  // namespace strel
