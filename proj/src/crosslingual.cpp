#include "strel/crosslingual.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <set>
#include <thread>

#include <json.hpp>
#include <openssl/sha.h>
#include <spdlog/spdlog.h>

#include "strel/http.hpp"
#include "strel/safetensors.hpp"

namespace strel {
namespace fs = std::filesystem;

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i == 8) return out + ", ... (" + std::to_string(ids.size()) + " in total)";
    out += (i ? ", " : "") + ids[i];
  }
  return out;
}

// SemRel language codes are ISO 639-3; the v2 API wants 639-1 where one
// exists.
std::string api_language(std::string_view code) {
  static const std::map<std::string, std::string, std::less<>> table{
      {"afr", "af"}, {"amh", "am"}, {"arb", "ar"}, {"arq", "ar"}, {"ary", "ar"},
      {"eng", "en"}, {"esp", "es"}, {"spa", "es"}, {"hau", "ha"}, {"hin", "hi"},
      {"ind", "id"}, {"kin", "rw"}, {"mar", "mr"}, {"pan", "pa"}, {"tel", "te"}};
  auto it = table.find(code);
  return it == table.end() ? std::string(code) : it->second;
}

constexpr char kMagic[8] = {'S', 'T', 'R', 'E', 'L', 'T', 'C', '\x01'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

TranslationPipelineError::TranslationPipelineError(std::vector<std::string> failed_pair_ids,
                                                   const std::string& detail)
    : Error("translation", "translation failed for " + std::to_string(failed_pair_ids.size()) +
                               " pair(s): " + join_ids(failed_pair_ids) + " (" + detail + ")"),
      failed_(std::move(failed_pair_ids)) {}

std::string TableClient::translate(std::string_view text, std::string_view,
                                   std::string_view) {
  auto it = table_.find(std::string(text));
  if (it == table_.end()) {
    throw TranslationError(TranslationError::Category::permanent,
                           "no table entry for '" + std::string(text) + "'");
  }
  return it->second;
}

HttpTranslationClient::HttpTranslationClient(HttpTranslationConfig config)
    : config_(std::move(config)) {
  if (config_.api_key.empty()) throw ConfigError("translation api_key is empty");
}

std::string HttpTranslationClient::translate(std::string_view text,
                                             std::string_view source_language,
                                             std::string_view target_language) {
  using C = TranslationError::Category;
  const nlohmann::json req{{"q", text},
                           {"source", api_language(source_language)},
                           {"target", api_language(target_language)},
                           {"format", "text"}};
  const auto sep = config_.base_url.find('?') == std::string::npos ? "?" : "&";
  const auto res = http::post_json(config_.base_url + sep + "key=" + config_.api_key,
                                   req.dump(), config_.timeout);
  if (res.status == 0) throw TranslationError(C::transient, res.transport_error);
  if (res.status == 429) throw TranslationError(C::quota, "rate limited (HTTP 429)");
  if (res.status == 403 && res.body.find("Limit Exceeded") != std::string::npos) {
    throw TranslationError(C::quota, "quota exceeded (HTTP 403)");
  }
  if (res.status >= 500) {
    throw TranslationError(C::transient, "server error (HTTP " + std::to_string(res.status) + ")");
  }
  if (res.status != 200) {
    throw TranslationError(C::permanent, "HTTP " + std::to_string(res.status) + ": " +
                                             res.body.substr(0, 200));
  }
  try {
    const auto body = nlohmann::json::parse(res.body);
    auto out = body.at("data").at("translations").at(0).at("translatedText").get<std::string>();
    if (out.empty()) throw TranslationError(C::permanent, "empty translation");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw TranslationError(C::permanent, std::string("malformed response: ") + e.what());
  }
}

std::size_t TranslationCache::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t h;
  std::memcpy(&h, k.data(), sizeof(h));
  return h;
}

TranslationCache::Key TranslationCache::make_key(std::string_view text,
                                                 std::string_view source_language,
                                                 std::string_view target_language) {
  std::string buf;
  buf.reserve(text.size() + source_language.size() + target_language.size() + 2);
  buf.append(source_language).push_back('\0');
  buf.append(target_language).push_back('\0');
  buf.append(text);
  Key key;
  SHA256(reinterpret_cast<const unsigned char*>(buf.data()), buf.size(), key.data());
  return key;
}

TranslationCache::TranslationCache(const fs::path& path) : path_(path) {
  std::string bytes;
  if (fs::exists(path)) bytes = read_text_file(path);
  std::size_t good_end = 0;
  if (bytes.empty()) {
    write_text_file(path, std::string_view(kMagic, sizeof(kMagic)));
    good_end = sizeof(kMagic);
  } else {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
      throw IoError(path.string() + " is not a translation cache file");
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
    std::size_t pos = sizeof(kMagic);
    std::size_t record = 0;
    while (pos + 4 <= bytes.size()) {
      const std::uint32_t len = get_u32(p + pos);
      if (pos + 4 + std::size_t{len} + 4 > bytes.size()) break;  // torn tail
      ++record;
      const auto payload = std::span<const std::uint8_t>(p + pos + 4, len);
      const auto corrupt = [&](const char* why) {
        return IoError(path.string() + ": cache record " + std::to_string(record) + " " + why);
      };
      if (get_u32(p + pos + 4 + len) != safetensors::crc32(payload)) throw corrupt("fails its CRC");
      std::size_t q = 0;
      auto need = [&](std::size_t n) {
        if (q + n > payload.size()) throw corrupt("is malformed");
      };
      Key key;
      need(32);
      std::memcpy(key.data(), payload.data(), 32);
      q = 32;
      need(1);
      const std::size_t src_len = payload[q++];
      need(src_len);
      const std::string src(reinterpret_cast<const char*>(payload.data() + q), src_len);
      q += src_len;
      need(1);
      const std::size_t tgt_len = payload[q++];
      need(tgt_len);
      const std::string tgt(reinterpret_cast<const char*>(payload.data() + q), tgt_len);
      q += tgt_len;
      need(4);
      const std::size_t text_len = get_u32(payload.data() + q);
      q += 4;
      need(text_len);
      if (q + text_len != payload.size()) throw corrupt("has trailing bytes");
      entries_[key] = std::string(reinterpret_cast<const char*>(payload.data() + q), text_len);
      pos += 4 + std::size_t{len} + 4;
    }
    good_end = pos;
    if (good_end != bytes.size()) {
      spdlog::warn("{}: discarding {} bytes of an incomplete final record", path.string(),
                   bytes.size() - good_end);
      fs::resize_file(path, good_end);
    }
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot append to " + path.string());
}

std::optional<std::string> TranslationCache::lookup(std::string_view text,
                                                    std::string_view source_language,
                                                    std::string_view target_language) const {
  const auto key = make_key(text, source_language, target_language);
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TranslationCache::insert(std::string_view text, std::string_view source_language,
                              std::string_view target_language, std::string_view translation) {
  if (source_language.size() > 255 || target_language.size() > 255) {
    throw ValidationError("language code too long for the cache");
  }
  const auto key = make_key(text, source_language, target_language);
  std::lock_guard lock(mu_);
  entries_[key] = std::string(translation);
  if (!path_) return;
  std::string payload(reinterpret_cast<const char*>(key.data()), key.size());
  payload.push_back(static_cast<char>(source_language.size()));
  payload.append(source_language);
  payload.push_back(static_cast<char>(target_language.size()));
  payload.append(target_language);
  put_u32(payload, static_cast<std::uint32_t>(translation.size()));
  payload.append(translation);
  std::string record;
  put_u32(record, static_cast<std::uint32_t>(payload.size()));
  record += payload;
  put_u32(record, safetensors::crc32(as_bytes(payload)));
  out_.write(record.data(), static_cast<std::streamsize>(record.size()));
  out_.flush();
  if (!out_) throw IoError("cannot append to " + path_->string());
}

std::size_t TranslationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::chrono::milliseconds RetryPolicy::delay_before(std::size_t attempt) const {
  const double factor = std::pow(multiplier, static_cast<double>(attempt) - 2.0);
  const double ms = static_cast<double>(initial_delay.count()) * factor;
  return std::chrono::milliseconds(static_cast<std::int64_t>(
      std::min(ms, static_cast<double>(max_delay.count()))));
}

std::string translate_with_retry(TranslationClient& client, std::string_view text,
                                 std::string_view source_language,
                                 std::string_view target_language, const RetryPolicy& retry) {
  const std::size_t attempts = std::max<std::size_t>(1, retry.max_attempts);
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      auto out = client.translate(text, source_language, target_language);
      if (out.empty() && !text.empty()) {
        throw TranslationError(TranslationError::Category::permanent, "empty translation");
      }
      return out;
    } catch (const TranslationError& e) {
      if (!e.retryable() || attempt >= attempts) throw;
      const auto delay = retry.delay_before(attempt + 1);
      spdlog::debug("translation attempt {} failed ({}), retrying in {} ms", attempt, e.what(),
                    delay.count());
      if (retry.sleep) {
        retry.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
}

PairDataset translate_dataset(const PairDataset& dataset, TranslationClient& client,
                              TranslationCache& cache, const TranslateOptions& options) {
  const auto& src = dataset.language();
  const auto& tgt = options.target_language;
  if (src == tgt && !client.is_identity()) {
    throw ValidationError("dataset is already in " + tgt + "; nothing to translate");
  }
  // Identity output is never cached: the cache is keyed by languages, not by
  // client.
  const bool use_cache = !client.is_identity();

  std::vector<std::string> texts;
  {
    std::set<std::string_view> seen;
    for (const auto& p : dataset) {
      for (const auto* s : {&p.sentence_1, &p.sentence_2}) {
        if (seen.insert(*s).second) texts.push_back(*s);
      }
    }
  }
  std::vector<std::optional<std::string>> translated(texts.size());
  std::vector<std::string> errors(texts.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < texts.size(); i = next++) {
      if (use_cache) {
        if (auto hit = cache.lookup(texts[i], src, tgt)) {
          translated[i] = std::move(*hit);
          continue;
        }
      }
      try {
        auto out = translate_with_retry(client, texts[i], src, tgt, options.retry);
        if (use_cache) cache.insert(texts[i], src, tgt, out);
        translated[i] = std::move(out);
      } catch (const TranslationError& e) {
        errors[i] = e.what();
      }
    }
  };
  {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min(options.max_concurrency, texts.size()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < texts.size(); ++i) index.emplace(texts[i], i);

  std::vector<LabeledPair> out;
  out.reserve(dataset.size());
  std::vector<std::string> failed;
  std::string first_error;
  for (const auto& p : dataset) {
    const auto a = index.at(p.sentence_1);
    const auto b = index.at(p.sentence_2);
    if (!translated[a] || !translated[b]) {
      failed.push_back(p.pair_id);
      if (first_error.empty()) first_error = !translated[a] ? errors[a] : errors[b];
      continue;
    }
    out.push_back({p.pair_id, *translated[a], *translated[b], p.score});
  }
  if (!failed.empty()) throw TranslationPipelineError(std::move(failed), first_error);
  return PairDataset(tgt, dataset.split(), std::move(out),
                     dataset.empty() ? std::optional<bool>(dataset.labeled()) : std::nullopt);
}

CrosslingualResult crosslingual_evaluate(const Model& model, const Tokenizer& tokenizer,
                                         const PairDataset& dataset, TranslationClient& client,
                                         TranslationCache& cache, const TranslateOptions& options,
                                         std::size_t max_tokens, std::size_t batch_size) {
  if (!dataset.labeled()) throw ValidationError("cross-lingual evaluation needs labels");
  auto translated = translate_dataset(dataset, client, cache, options);
  auto preds = predict(model, tokenizer, translated.pairs(), max_tokens, batch_size);
  auto report = metrics::evaluate(metrics::PredictionSet(translated.scores(), preds));
  return {std::move(translated), std::move(preds), report};
}

}  // namespace strel
