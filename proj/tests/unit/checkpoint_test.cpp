#include "strel/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "strel/error.hpp"
#include "strel/safetensors.hpp"
#include "support/fixtures.hpp"

using namespace strel;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("strel_ckpt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void flip_byte(const fs::path& path, std::size_t from_end) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(0, std::ios::end);
  const auto size = static_cast<std::streamoff>(f.tellg());
  f.seekg(size - static_cast<std::streamoff>(from_end));
  char c;
  f.get(c);
  f.seekp(size - static_cast<std::streamoff>(from_end));
  f.put(static_cast<char>(c ^ 0x5a));
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text_file(p)); }

void write_json(const fs::path& p, const nlohmann::json& j) { write_text_file(p, j.dump(2)); }

}  // namespace

TEST(Checkpoint, RoundTripPreservesPredictions) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok, 7, 64, 0.2);
  const auto dir = fresh_dir("roundtrip");
  save_checkpoint(m, tok, dir, 64);
  const auto ck = load_checkpoint(dir);
  EXPECT_EQ(ck.max_tokens, 64u);
  EXPECT_EQ(ck.model.config(), m.config());
  EXPECT_TRUE(std::equal(m.parameters().begin(), m.parameters().end(),
                         ck.model.parameters().begin()));
  const auto ds = fixtures::synthetic_pairs(10);
  const auto a = predict(m, tok, ds.pairs(), 64, 4);
  const auto b = predict(ck.model, ck.tokenizer, ds.pairs(), 64, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
  EXPECT_FALSE(fs::exists(dir / "training_log.jsonl"));
}

TEST(Checkpoint, WritesTrainingLogWhenGiven) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok);
  TrainingLog log;
  log.epochs.push_back(EpochRecord{1, 3, 0.2, 0.5, 0.1, 0.0});
  log.selected_epoch = 1;
  const auto dir = fresh_dir("withlog");
  save_checkpoint(m, tok, dir, 64, &log);
  EXPECT_EQ(read_text_file(dir / "training_log.jsonl"), serialize_training_log(log));
}

TEST(Checkpoint, RejectsWrongFormatOrVersion) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok);
  const auto dir = fresh_dir("format");
  save_checkpoint(m, tok, dir, 64);
  auto meta = read_json(dir / "checkpoint.json");
  auto bad = meta;
  bad["format"] = "something-else";
  write_json(dir / "checkpoint.json", bad);
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  bad = meta;
  bad["version"] = kCheckpointVersion + 1;
  write_json(dir / "checkpoint.json", bad);
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  bad = meta;
  bad["encoder"]["hidden_size"] = 16;
  bad["encoder"]["intermediate_size"] = 32;
  write_json(dir / "checkpoint.json", bad);
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  write_json(dir / "checkpoint.json", meta);
  EXPECT_NO_THROW(load_checkpoint(dir));
  fs::remove(dir / "checkpoint.json");
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
}

TEST(Checkpoint, DetectsCorruptedWeights) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok);
  const auto dir = fresh_dir("corrupt");
  save_checkpoint(m, tok, dir, 64);
  flip_byte(dir / "model.safetensors", 5);
  try {
    load_checkpoint(dir);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("crc32"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, RejectsTruncatedWeights) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok);
  const auto dir = fresh_dir("truncated");
  save_checkpoint(m, tok, dir, 64);
  const auto p = dir / "model.safetensors";
  fs::resize_file(p, fs::file_size(p) - 16);
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
}

TEST(Safetensors, SerializeParseRoundTrip) {
  const std::vector<float> a{1, 2, 3, 4, 5, 6}, b{-0.5f};
  const std::vector<safetensors::NamedTensor> ts{{"a", {2, 3}, a}, {"b", {1}, b}};
  const auto bytes = safetensors::serialize(ts, {{"k", "v"}});
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data(), 8);
  EXPECT_EQ((8 + header_len) % 8, 0u);
  const auto f = safetensors::File::parse(bytes);
  EXPECT_EQ(f.metadata().at("k"), "v");
  EXPECT_EQ(f.entry("a").shape, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(f.values("a"), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(f.values("b"), (std::vector<double>{-0.5}));
  EXPECT_THROW(f.entry("c"), CheckpointError);
  auto broken = bytes;
  broken.resize(6);
  EXPECT_THROW(safetensors::File::parse(broken), CheckpointError);
}

TEST(Safetensors, Crc32KnownValue) {
  const std::string s = "123456789";
  EXPECT_EQ(safetensors::crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()),
                                         s.size())),
            0xCBF43926u);
}

namespace {

// A safetensors file whose tensors may use F16 or BF16, built by hand.
struct RawTensor {
  std::string name;
  std::string dtype;
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> bytes;
};

void write_raw_safetensors(const fs::path& path, const std::vector<RawTensor>& ts) {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::uint8_t> data;
  for (const auto& t : ts) {
    header[t.name] = {{"dtype", t.dtype},
                      {"shape", t.shape},
                      {"data_offsets", {data.size(), data.size() + t.bytes.size()}}};
    data.insert(data.end(), t.bytes.begin(), t.bytes.end());
  }
  std::string h = header.dump();
  while ((8 + h.size()) % 8) h.push_back(' ');
  std::ofstream out(path, std::ios::binary);
  const std::uint64_t n = h.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

std::vector<std::uint8_t> f32_bytes(std::span<const float> v) {
  std::vector<std::uint8_t> b(v.size() * 4);
  std::memcpy(b.data(), v.data(), b.size());
  return b;
}

std::vector<std::uint8_t> bf16_bytes(std::span<const float> v) {
  std::vector<std::uint8_t> b;
  for (float x : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    const auto hi = static_cast<std::uint16_t>(bits >> 16);
    b.push_back(static_cast<std::uint8_t>(hi & 0xff));
    b.push_back(static_cast<std::uint8_t>(hi >> 8));
  }
  return b;
}

float bf16_round_trip(float x) {
  std::uint32_t bits;
  std::memcpy(&bits, &x, 4);
  bits &= 0xffff0000u;
  std::memcpy(&x, &bits, 4);
  return x;
}

// Hugging Face layout without the "roberta." prefix, no classifier tensors.
fs::path make_hf_dir(const Model& source, const Tokenizer& tok, const std::string& name) {
  const auto dir = fresh_dir(name);
  tok.save(dir);
  const auto& c = source.config();
  write_json(dir / "config.json", {{"model_type", "roberta"},
                                   {"hidden_act", "gelu"},
                                   {"vocab_size", c.vocab_size},
                                   {"hidden_size", c.hidden_size},
                                   {"num_hidden_layers", c.num_layers},
                                   {"num_attention_heads", c.num_attention_heads},
                                   {"intermediate_size", c.intermediate_size},
                                   {"max_position_embeddings", c.max_position},
                                   {"type_vocab_size", c.type_vocab_size},
                                   {"pad_token_id", c.pad_token_id},
                                   {"layer_norm_eps", c.layer_norm_eps}});
  std::vector<RawTensor> ts;
  for (const auto& info : source.parameter_table()) {
    if (info.name.rfind("classifier.", 0) == 0) continue;
    const auto values = source.parameter(info.name);
    RawTensor t{info.name.substr(std::string("roberta.").size()), "F32", info.shape, {}};
    if (info.name == "roberta.embeddings.LayerNorm.weight") {
      // 1 + i/64 is exact in half precision.
      t.dtype = "F16";
      for (std::size_t i = 0; i < values.size(); ++i) {
        const auto h = static_cast<std::uint16_t>(0x3C00 | (i << 4));
        t.bytes.push_back(static_cast<std::uint8_t>(h & 0xff));
        t.bytes.push_back(static_cast<std::uint8_t>(h >> 8));
      }
    } else if (info.name == "roberta.embeddings.word_embeddings.weight") {
      t.dtype = "BF16";
      t.bytes = bf16_bytes(values);
    } else {
      t.bytes = f32_bytes(values);
    }
    ts.push_back(std::move(t));
  }
  write_raw_safetensors(dir / "model.safetensors", ts);
  return dir;
}

}  // namespace

TEST(ImportPretrained, LoadsUnprefixedMixedPrecisionWeights) {
  const auto tok = Tokenizer::byte_level();
  const auto src = fixtures::tiny_model(tok, 21, 64, 0.2);
  const auto dir = make_hf_dir(src, tok, "hf");
  const auto ck = import_pretrained(dir, 99, 32);
  EXPECT_EQ(ck.max_tokens, 32u);
  EXPECT_EQ(ck.tokenizer.vocab_size(), tok.vocab_size());

  const auto q = ck.model.parameter("roberta.encoder.layer.1.attention.self.query.weight");
  const auto q_src = src.parameter("roberta.encoder.layer.1.attention.self.query.weight");
  EXPECT_TRUE(std::equal(q.begin(), q.end(), q_src.begin()));

  const auto ln = ck.model.parameter("roberta.embeddings.LayerNorm.weight");
  for (std::size_t i = 0; i < ln.size(); ++i) EXPECT_EQ(ln[i], 1.0f + static_cast<float>(i) / 64);

  const auto w = ck.model.parameter("roberta.embeddings.word_embeddings.weight");
  const auto w_src = src.parameter("roberta.embeddings.word_embeddings.weight");
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], bf16_round_trip(w_src[i]));

  // Missing head: random from head_seed, deterministic.
  const auto head = ck.model.parameter("classifier.dense.weight");
  EXPECT_FALSE(std::equal(head.begin(), head.end(),
                          src.parameter("classifier.dense.weight").begin()));
  const auto again = import_pretrained(dir, 99, 32);
  const auto head2 = again.model.parameter("classifier.dense.weight");
  EXPECT_TRUE(std::equal(head.begin(), head.end(), head2.begin()));
}

TEST(ImportPretrained, RejectsBadDirectories) {
  const auto tok = Tokenizer::byte_level();
  const auto src = fixtures::tiny_model(tok, 21);
  const auto dir = make_hf_dir(src, tok, "hf_bad");
  EXPECT_THROW(import_pretrained(dir, 1, 4096), ImportError);

  auto cfg = read_json(dir / "config.json");
  auto bad = cfg;
  bad["model_type"] = "bert";
  write_json(dir / "config.json", bad);
  EXPECT_THROW(import_pretrained(dir, 1, 32), ImportError);
  bad = cfg;
  bad["hidden_act"] = "relu";
  write_json(dir / "config.json", bad);
  EXPECT_THROW(import_pretrained(dir, 1, 32), ImportError);
  bad = cfg;
  bad.erase("hidden_size");
  write_json(dir / "config.json", bad);
  EXPECT_THROW(import_pretrained(dir, 1, 32), ImportError);
  bad = cfg;
  bad["intermediate_size"] = 48;
  write_json(dir / "config.json", bad);
  EXPECT_THROW(import_pretrained(dir, 1, 32), ImportError);

  write_json(dir / "config.json", cfg);
  EXPECT_NO_THROW(import_pretrained(dir, 1, 32));
  fs::remove(dir / "model.safetensors");
  EXPECT_THROW(import_pretrained(dir, 1, 32), ImportError);
  EXPECT_THROW(import_pretrained(fresh_dir("hf_empty"), 1, 32), ImportError);
}
