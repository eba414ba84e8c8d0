#include "strel/augment.hpp"

#include <atomic>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "strel/error.hpp"
#include "strel/http.hpp"

namespace strel {

std::vector<std::string> MockParaphraser::paraphrase(std::string_view text, std::size_t k) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(std::move(w));
  std::vector<std::string> out;
  for (std::size_t c = 1; c <= k; ++c) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) s += ' ';
      s += words[(i + c) % words.size()];
    }
    out.push_back(s + " (v" + std::to_string(c) + ")");
  }
  return out;
}

HttpParaphraser::HttpParaphraser(HttpParaphraserConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) throw ConfigError("paraphraser url is empty");
}

std::vector<std::string> HttpParaphraser::paraphrase(std::string_view text, std::size_t k) {
  nlohmann::json req = config_.generation;
  req["text"] = text;
  req["num_return_sequences"] = k;
  req["model"] = config_.model;
  const auto res = http::post_json(config_.url, req.dump(), config_.timeout);
  if (res.status == 0) throw IoError("paraphraser unreachable: " + res.transport_error);
  if (res.status != 200) {
    throw IoError("paraphraser returned HTTP " + std::to_string(res.status));
  }
  try {
    auto body = nlohmann::json::parse(res.body);
    auto out = body.at("paraphrases").get<std::vector<std::string>>();
    if (out.size() > k) out.resize(k);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed paraphraser response: ") + e.what());
  }
}

std::string HttpParaphraser::identifier() const { return "http:" + config_.model; }

nlohmann::json HttpParaphraser::parameters() const {
  nlohmann::json p = config_.generation;
  p["url"] = config_.url;
  return p;
}

std::string_view target_name(AugmentTarget target) {
  switch (target) {
    case AugmentTarget::first: return "first";
    case AugmentTarget::second: return "second";
    case AugmentTarget::both: return "both";
  }
  return "first";
}

AugmentTarget parse_target(std::string_view name) {
  if (name == "first") return AugmentTarget::first;
  if (name == "second") return AugmentTarget::second;
  if (name == "both") return AugmentTarget::both;
  throw ConfigError("augmentation target must be first, second or both, not '" +
                    std::string(name) + "'");
}

namespace {

struct Variants {
  std::vector<std::string> first, second;
  std::string error;
};

std::vector<std::string> checked(std::vector<std::string> got, std::size_t k) {
  if (got.size() > k) got.resize(k);
  for (const auto& s : got) {
    if (s.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ValidationError("paraphraser returned an empty string");
    }
  }
  return got;
}

}  // namespace

AugmentResult augment(const PairDataset& train_set, Paraphraser& paraphraser,
                      const AugmentationPolicy& policy) {
  if (train_set.split() != Split::train) {
    throw ValidationError("augmentation applies to training splits only, not " +
                          std::string(split_name(train_set.split())));
  }
  if (!train_set.labeled()) throw ValidationError("cannot augment an unlabeled set");

  AugmentResult result{train_set, {}, {}};
  const std::size_t k = policy.copies_per_pair;
  if (k == 0 || train_set.empty()) return result;

  const std::size_t n = train_set.size();
  std::vector<Variants> variants(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& p = train_set[i];
      try {
        if (policy.target != AugmentTarget::second) {
          variants[i].first = checked(paraphraser.paraphrase(p.sentence_1, k), k);
        }
        if (policy.target != AugmentTarget::first) {
          variants[i].second = checked(paraphraser.paraphrase(p.sentence_2, k), k);
        }
      } catch (const std::exception& e) {
        variants[i].error = e.what();
      }
    }
  };
  {
    const std::size_t workers = std::max<std::size_t>(1, std::min(policy.max_concurrency, n));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<LabeledPair> pairs(train_set.begin(), train_set.end());
  std::set<std::string> ids;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    ids.insert(p.pair_id);
    seen.emplace(p.sentence_1, p.sentence_2);
  }
  const auto params = paraphraser.parameters();
  const auto ident = paraphraser.identifier();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = train_set[i];
    const auto& v = variants[i];
    if (!v.error.empty()) {
      spdlog::warn("paraphrasing {} failed, skipping it: {}", src.pair_id, v.error);
      result.skipped.push_back(src.pair_id);
      continue;
    }
    std::size_t copies = k;
    if (policy.target != AugmentTarget::second) copies = std::min(copies, v.first.size());
    if (policy.target != AugmentTarget::first) copies = std::min(copies, v.second.size());
    for (std::size_t c = 0; c < copies; ++c) {
      LabeledPair aug = src;
      aug.pair_id = src.pair_id + "#aug" + std::to_string(c + 1);
      if (policy.target != AugmentTarget::second) aug.sentence_1 = v.first[c];
      if (policy.target != AugmentTarget::first) aug.sentence_2 = v.second[c];
      if (policy.dedup && !seen.emplace(aug.sentence_1, aug.sentence_2).second) continue;
      if (!ids.insert(aug.pair_id).second) {
        throw ValidationError("derived pair_id " + aug.pair_id + " collides with an existing id");
      }
      result.manifest.push_back(
          {aug.pair_id, src.pair_id, c + 1, ident, policy.target, params});
      pairs.push_back(std::move(aug));
    }
  }
  result.dataset = PairDataset(train_set.language(), train_set.split(), std::move(pairs));
  return result;
}

std::string serialize_manifest(std::span<const ManifestEntry> manifest) {
  std::string out;
  for (const auto& m : manifest) {
    nlohmann::json j{{"pair_id", m.pair_id},
                     {"source_pair_id", m.source_pair_id},
                     {"copy_index", m.copy_index},
                     {"paraphraser", m.paraphraser},
                     {"target", target_name(m.target)},
                     {"parameters", m.parameters}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("pair_id").get<std::string>(),
                     j.at("source_pair_id").get<std::string>(),
                     j.at("copy_index").get<std::size_t>(),
                     j.at("paraphraser").get<std::string>(),
                     parse_target(j.at("target").get<std::string>()),
                     j.at("parameters")});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace strel
