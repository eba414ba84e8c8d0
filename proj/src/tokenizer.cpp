#include "strel/tokenizer.hpp"

#include <unicode/uchar.h>

#include <array>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "strel/data.hpp"
#include "strel/error.hpp"

namespace strel {
namespace {

std::string utf8_encode(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

// GPT-2's reversible byte -> printable code point table.
const std::array<std::string, 256>& byte_symbols() {
  static const std::array<std::string, 256> table = [] {
    std::array<std::uint32_t, 256> cp{};
    std::array<bool, 256> direct{};
    auto keep = [&](int lo, int hi) {
      for (int b = lo; b <= hi; ++b) {
        direct[b] = true;
        cp[b] = static_cast<std::uint32_t>(b);
      }
    };
    keep('!', '~');
    keep(0xA1, 0xAC);
    keep(0xAE, 0xFF);
    std::uint32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      if (!direct[b]) cp[b] = next++;
    }
    std::array<std::string, 256> out;
    for (int b = 0; b < 256; ++b) out[b] = utf8_encode(cp[b]);
    return out;
  }();
  return table;
}

const std::unordered_map<std::string, unsigned char>& symbol_bytes() {
  static const auto table = [] {
    std::unordered_map<std::string, unsigned char> m;
    const auto& sym = byte_symbols();
    for (int b = 0; b < 256; ++b) m.emplace(sym[b], static_cast<unsigned char>(b));
    return m;
  }();
  return table;
}

struct CodePoint {
  std::uint32_t value;
  std::size_t offset;
  std::size_t length;
};

std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    std::uint32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    bool ok = len == 1 ? c < 0x80 : i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      ok = (cc & 0xC0) == 0x80;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      // Stray byte: keep it as a lone symbol so no input bytes are lost.
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

enum class CharClass { letter, number, space, other };

CharClass classify(std::uint32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  if (u_isUWhiteSpace(c)) return CharClass::space;
  const auto mask = U_GET_GC_MASK(c);
  if (mask & U_GC_L_MASK) return CharClass::letter;
  if (mask & U_GC_N_MASK) return CharClass::number;
  return CharClass::other;
}

std::string merge_key(const std::string& a, const std::string& b) {
  std::string key;
  key.reserve(a.size() + b.size() + 1);
  key += a;
  key.push_back(' ');
  key += b;
  return key;
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> id_to_token,
                     std::vector<std::pair<std::string, std::string>> merges)
    : id_to_token_(std::move(id_to_token)), merges_(std::move(merges)) {
  if (id_to_token_.size() >
      static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw ValidationError("vocabulary too large");
  }
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<std::int32_t>(i)).second) {
      throw ValidationError("duplicate vocabulary entry '" + id_to_token_[i] + "'");
    }
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    merge_rank_.emplace(merge_key(merges_[r].first, merges_[r].second), r);
  }
  auto require = [&](const char* tok) {
    auto it = token_to_id_.find(tok);
    if (it == token_to_id_.end()) {
      throw ValidationError(std::string("vocabulary lacks special token ") + tok);
    }
    return it->second;
  };
  special_.bos = require("<s>");
  special_.pad = require("<pad>");
  special_.eos = require("</s>");
  special_.unk = require("<unk>");
}

Tokenizer Tokenizer::byte_level() {
  std::vector<std::string> vocab = {"<s>", "<pad>", "</s>", "<unk>"};
  for (const auto& s : byte_symbols()) vocab.push_back(s);
  return Tokenizer(std::move(vocab), {});
}

Tokenizer Tokenizer::from_files(const std::filesystem::path& vocab_json,
                                const std::filesystem::path& merges_txt) {
  nlohmann::json vocab;
  try {
    vocab = nlohmann::json::parse(read_text_file(vocab_json));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed " + vocab_json.string() + ": " + e.what());
  }
  if (!vocab.is_object()) {
    throw ValidationError(vocab_json.string() + " must map tokens to ids");
  }
  std::vector<std::string> id_to_token(vocab.size());
  std::vector<bool> seen(vocab.size(), false);
  for (const auto& [token, id_json] : vocab.items()) {
    if (!id_json.is_number_unsigned()) {
      throw ValidationError("token '" + token + "' has a non-integer id");
    }
    const auto id = id_json.get<std::size_t>();
    if (id >= id_to_token.size() || seen[id]) {
      throw ValidationError("vocabulary ids must be a permutation of 0..n-1");
    }
    seen[id] = true;
    id_to_token[id] = token;
  }

  std::vector<std::pair<std::string, std::string>> merges;
  std::istringstream lines(read_text_file(merges_txt));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.starts_with("#version"))) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw ParseError(line_no, "malformed merge rule in " + merges_txt.string());
    }
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return Tokenizer(std::move(id_to_token), std::move(merges));
}

Tokenizer Tokenizer::load(const std::filesystem::path& dir) {
  return from_files(dir / "vocab.json", dir / "merges.txt");
}

void Tokenizer::save(const std::filesystem::path& dir) const {
  nlohmann::json vocab = nlohmann::json::object();
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) vocab[id_to_token_[i]] = i;
  write_text_file(dir / "vocab.json", vocab.dump());
  std::string merges = "#version: 0.2\n";
  for (const auto& [a, b] : merges_) {
    merges += a;
    merges.push_back(' ');
    merges += b;
    merges.push_back('\n');
  }
  write_text_file(dir / "merges.txt", merges);
}

std::vector<std::string> Tokenizer::pretokenize(std::string_view text) {
  const auto cps = decode_utf8(text);
  const std::size_t n = cps.size();
  std::vector<CharClass> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = classify(cps[i].value);

  std::vector<std::string> out;
  auto emit = [&](std::size_t from, std::size_t to) {
    const std::size_t begin = cps[from].offset;
    const std::size_t end = to < n ? cps[to].offset : text.size();
    out.emplace_back(text.substr(begin, end - begin));
  };
  auto is = [&](std::size_t i, std::uint32_t c) {
    return i < n && cps[i].value == c;
  };

  std::size_t i = 0;
  while (i < n) {
    // 's 't 're 've 'm 'll 'd
    if (is(i, '\'')) {
      if (is(i + 1, 's') || is(i + 1, 't') || is(i + 1, 'm') || is(i + 1, 'd')) {
        emit(i, i + 2);
        i += 2;
        continue;
      }
      if ((is(i + 1, 'r') && is(i + 2, 'e')) || (is(i + 1, 'v') && is(i + 2, 'e')) ||
          (is(i + 1, 'l') && is(i + 2, 'l'))) {
        emit(i, i + 3);
        i += 3;
        continue;
      }
    }
    // ' ?\p{L}+', ' ?\p{N}+', ' ?[^\s\p{L}\p{N}]+'
    const std::size_t start = is(i, ' ') ? i + 1 : i;
    if (start < n && cls[start] != CharClass::space) {
      const CharClass run = cls[start];
      std::size_t end = start + 1;
      while (end < n && cls[end] == run) ++end;
      emit(i, end);
      i = end;
      continue;
    }
    // '\s+(?!\S)' then '\s+'
    std::size_t end = i + 1;
    while (end < n && cls[end] == CharClass::space) ++end;
    if (end < n && end - i > 1) --end;
    emit(i, end);
    i = end;
  }
  return out;
}

std::vector<std::string> Tokenizer::bpe(const std::string& mapped) const {
  std::vector<std::string> symbols;
  for (const auto& cp : decode_utf8(mapped)) {
    symbols.push_back(mapped.substr(cp.offset, cp.length));
  }
  if (merge_rank_.empty()) return symbols;
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find(merge_key(symbols[i], symbols[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string first = symbols[best_pos];
    const std::string second = symbols[best_pos + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == first && symbols[i + 1] == second) {
        merged.push_back(first + second);
        ++i;
      } else {
        merged.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
  const auto& sym = byte_symbols();
  std::vector<std::int32_t> ids;
  for (const auto& piece : pretokenize(text)) {
    std::string mapped;
    for (char c : piece) mapped += sym[static_cast<unsigned char>(c)];
    for (const auto& token : bpe(mapped)) {
      auto it = token_to_id_.find(token);
      ids.push_back(it == token_to_id_.end() ? special_.unk : it->second);
    }
  }
  return ids;
}

std::string Tokenizer::decode(std::span<const std::int32_t> ids) const {
  const auto& bytes = symbol_bytes();
  std::string out;
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) continue;
    if (id == special_.bos || id == special_.eos || id == special_.pad) continue;
    const std::string& token = id_to_token_[static_cast<std::size_t>(id)];
    for (const auto& cp : decode_utf8(token)) {
      auto it = bytes.find(token.substr(cp.offset, cp.length));
      if (it != bytes.end()) {
        out.push_back(static_cast<char>(it->second));
      } else {
        out += token.substr(cp.offset, cp.length);
      }
    }
  }
  return out;
}

TokenizedInput Tokenizer::encode_pair(std::string_view first,
                                      std::string_view second,
                                      std::size_t max_tokens) const {
  if (max_tokens < kPairSpecialTokens) {
    throw ValidationError("max_tokens must be at least 4 to fit the special tokens");
  }
  auto a = encode(first);
  auto b = encode(second);
  if (a.empty() || b.empty()) {
    throw ValidationError("cannot tokenize an empty sentence");
  }
  const std::size_t budget = max_tokens - kPairSpecialTokens;
  while (a.size() + b.size() > budget) {
    if (a.size() > b.size()) {
      a.pop_back();
    } else {
      b.pop_back();
    }
  }

  TokenizedInput out;
  out.token_ids.reserve(a.size() + b.size() + kPairSpecialTokens);
  out.token_ids.push_back(special_.bos);
  out.token_ids.insert(out.token_ids.end(), a.begin(), a.end());
  out.token_ids.push_back(special_.eos);
  out.token_ids.push_back(special_.eos);
  out.token_ids.insert(out.token_ids.end(), b.begin(), b.end());
  out.token_ids.push_back(special_.eos);
  out.attention_mask.assign(out.token_ids.size(), 1);
  return out;
}

TokenizedInput tokenize(const Tokenizer& tokenizer, const LabeledPair& pair,
                        std::size_t max_tokens) {
  return tokenizer.encode_pair(pair.sentence_1, pair.sentence_2, max_tokens);
}

}  // namespace strel
