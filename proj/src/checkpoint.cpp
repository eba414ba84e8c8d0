#include "strel/checkpoint.hpp"

#include <cstring>
#include <map>

#include "strel/data.hpp"
#include "strel/error.hpp"
#include "strel/safetensors.hpp"

namespace strel {
namespace fs = std::filesystem;

nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"hidden_size", c.hidden_size},
          {"num_layers", c.num_layers},
          {"num_attention_heads", c.num_attention_heads},
          {"intermediate_size", c.intermediate_size},
          {"intermediate_activation", "gelu"},
          {"max_position", c.max_position},
          {"type_vocab_size", c.type_vocab_size},
          {"pad_token_id", c.pad_token_id},
          {"layer_norm_eps", c.layer_norm_eps},
          {"dropout_rate", c.dropout_rate},
          {"attention_dropout_rate", c.attention_dropout_rate}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  try {
    EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.num_attention_heads = j.at("num_attention_heads").get<std::size_t>();
    c.intermediate_size = j.at("intermediate_size").get<std::size_t>();
    if (j.value("intermediate_activation", "gelu") != "gelu") {
      throw ConfigError("only the gelu activation is supported");
    }
    c.max_position = j.at("max_position").get<std::size_t>();
    c.type_vocab_size = j.at("type_vocab_size").get<std::size_t>();
    c.pad_token_id = j.at("pad_token_id").get<std::int32_t>();
    c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.attention_dropout_rate = j.at("attention_dropout_rate").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder config: ") + e.what());
  }
}

namespace {

std::vector<std::uint8_t> float_bytes(std::span<const float> v) {
  std::vector<std::uint8_t> out(v.size_bytes());
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

// Copies every model parameter from the same-named tensor in `file`.
void copy_weights(Model& model, const safetensors::File& file) {
  for (const auto& info : model.parameter_table()) {
    if (!file.contains(info.name)) {
      throw CheckpointError("missing tensor " + info.name);
    }
    const auto& e = file.entry(info.name);
    if (e.shape != info.shape) {
      std::string got, want;
      for (auto d : e.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
      for (auto d : info.shape) want += (want.empty() ? "" : "x") + std::to_string(d);
      throw CheckpointError("tensor " + info.name + " has shape [" + got +
                            "] but the config implies [" + want + "]");
    }
    const auto values = file.values(info.name);
    auto dst = model.parameter(info.name);
    for (std::size_t i = 0; i < values.size(); ++i) dst[i] = static_cast<float>(values[i]);
  }
}

}  // namespace

void save_checkpoint(const Model& model, const Tokenizer& tokenizer, const fs::path& dir,
                     std::size_t max_tokens, const TrainingLog* log) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<safetensors::NamedTensor> tensors;
  for (const auto& info : model.parameter_table()) {
    tensors.push_back({info.name, info.shape, model.parameter(info.name)});
  }
  const auto crc = safetensors::crc32(float_bytes(model.parameters()));
  safetensors::write(dir / "model.safetensors", tensors,
                     {{"format", std::string(kCheckpointFormat)},
                      {"crc32", std::to_string(crc)}});

  tokenizer.save(dir);

  nlohmann::json meta{{"format", kCheckpointFormat},
                      {"version", kCheckpointVersion},
                      {"dtype", "F32"},
                      {"weights", "model.safetensors"},
                      {"max_tokens", max_tokens},
                      {"encoder", encoder_config_to_json(model.config())},
                      {"tokenizer",
                       {{"type", Tokenizer::kIdentifier},
                        {"vocab_size", tokenizer.vocab_size()},
                        {"merges", tokenizer.merge_count()}}}};
  write_text_file(dir / "checkpoint.json", meta.dump(2) + "\n");
  if (log) write_text_file(dir / "training_log.jsonl", serialize_training_log(*log));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "checkpoint.json")) {
    throw CheckpointError(dir.string() + " is not a checkpoint directory (no checkpoint.json)");
  }
  nlohmann::json meta;
  try {
    meta = read_json(dir / "checkpoint.json");
  } catch (const Error& e) {
    throw CheckpointError(e.what());
  }
  const auto format = meta.value("format", std::string());
  if (format != kCheckpointFormat) {
    throw CheckpointError("unrecognized checkpoint format tag '" + format + "'");
  }
  if (!meta.contains("version") || !meta["version"].is_number_integer() ||
      meta["version"].get<int>() != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          (meta.contains("version") ? meta["version"].dump() : "(none)") +
                          "; this build reads version " +
                          std::to_string(kCheckpointVersion));
  }
  if (meta.value("dtype", std::string()) != "F32") {
    throw CheckpointError("unsupported checkpoint dtype " + meta.value("dtype", std::string()));
  }

  EncoderConfig config;
  try {
    config = encoder_config_from_json(meta.at("encoder"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad encoder config: ") + e.what());
  }
  const auto tok_type = meta.contains("tokenizer")
                            ? meta["tokenizer"].value("type", std::string())
                            : std::string();
  if (tok_type != Tokenizer::kIdentifier) {
    throw CheckpointError("unsupported tokenizer '" + tok_type + "'");
  }

  auto tokenizer = [&] {
    try {
      return Tokenizer::load(dir);
    } catch (const Error& e) {
      throw CheckpointError(std::string("tokenizer: ") + e.what());
    }
  }();
  if (tokenizer.vocab_size() > config.vocab_size) {
    throw CheckpointError("tokenizer has " + std::to_string(tokenizer.vocab_size()) +
                          " tokens but the model only " + std::to_string(config.vocab_size));
  }
  if (tokenizer.special().pad != config.pad_token_id) {
    throw CheckpointError("tokenizer pad id disagrees with the encoder config");
  }

  const auto file =
      safetensors::File::read(dir / meta.value("weights", std::string("model.safetensors")));
  const auto stored_crc = file.metadata().find("crc32");
  if (stored_crc == file.metadata().end()) {
    throw CheckpointError("weight file lacks its crc32 checksum");
  }
  if (stored_crc->second != std::to_string(safetensors::crc32(file.data()))) {
    throw CheckpointError("weight file is corrupted (crc32 mismatch)");
  }

  Model model(config);
  copy_weights(model, file);
  if (file.tensors().size() != model.parameter_table().size()) {
    throw CheckpointError("weight file holds tensors the config does not describe");
  }
  const auto max_tokens = meta.value("max_tokens", std::size_t{128});
  return Checkpoint{std::move(model), std::move(tokenizer), max_tokens};
}

Checkpoint import_pretrained(const fs::path& dir, std::uint64_t head_seed,
                             std::size_t max_tokens) {
  try {
    const auto hf = read_json(dir / "config.json");
    const auto model_type = hf.value("model_type", std::string("roberta"));
    if (model_type != "roberta" && model_type != "xlm-roberta" && model_type != "camembert") {
      throw ImportError("unsupported model_type '" + model_type + "'");
    }
    if (hf.value("hidden_act", std::string("gelu")) != "gelu") {
      throw ImportError("only the gelu activation is supported");
    }
    EncoderConfig config;
    config.vocab_size = hf.at("vocab_size").get<std::size_t>();
    config.hidden_size = hf.at("hidden_size").get<std::size_t>();
    config.num_layers = hf.at("num_hidden_layers").get<std::size_t>();
    config.num_attention_heads = hf.at("num_attention_heads").get<std::size_t>();
    config.intermediate_size = hf.at("intermediate_size").get<std::size_t>();
    config.max_position = hf.at("max_position_embeddings").get<std::size_t>();
    config.type_vocab_size = hf.value("type_vocab_size", std::size_t{1});
    config.pad_token_id = hf.value("pad_token_id", 1);
    config.layer_norm_eps = hf.value("layer_norm_eps", 1e-5);
    config.dropout_rate = hf.value("hidden_dropout_prob", 0.1);
    config.attention_dropout_rate = hf.value("attention_probs_dropout_prob", 0.1);
    config.validate();

    auto tokenizer = Tokenizer::load(dir);
    if (tokenizer.vocab_size() > config.vocab_size) {
      throw ImportError("vocab.json is larger than the embedding table");
    }
    if (max_tokens > config.max_sequence_length()) {
      throw ImportError("max_tokens exceeds the model's position table");
    }

    const auto file = safetensors::File::read(dir / "model.safetensors");
    // Re-key tensors to the model's names: add the encoder prefix if absent.
    std::map<std::string, std::string> rename;
    for (const auto& [name, entry] : file.tensors()) {
      if (name.rfind("roberta.", 0) == 0 || name.rfind("classifier.", 0) == 0) {
        rename[name] = name;
      } else if (name.rfind("embeddings.", 0) == 0 || name.rfind("encoder.", 0) == 0) {
        rename["roberta." + name] = name;
      }
    }

    Model model(config);
    model.init_random(head_seed);
    for (const auto& info : model.parameter_table()) {
      const bool is_head = info.name.rfind("classifier.", 0) == 0;
      auto it = rename.find(info.name);
      if (it == rename.end()) {
        if (is_head) continue;  // keeps its random initialisation
        throw ImportError("pretrained weights lack " + info.name);
      }
      const auto& e = file.entry(it->second);
      if (e.shape != info.shape) {
        throw ImportError("pretrained tensor " + it->second + " has an unexpected shape");
      }
      const auto values = file.values(it->second);
      auto dst = model.parameter(info.name);
      for (std::size_t i = 0; i < values.size(); ++i) dst[i] = static_cast<float>(values[i]);
    }
    return Checkpoint{std::move(model), std::move(tokenizer), max_tokens};
  } catch (const ImportError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ImportError(dir.string() + "/config.json: " + e.what());
  } catch (const Error& e) {
    throw ImportError(e.what());
  }
}

}  // namespace strel
