#include "strel/run_config.hpp"

#include <set>

#include "strel/data.hpp"
#include "strel/error.hpp"

namespace strel {
namespace {

using nlohmann::json;

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown configuration key " + path_ + "." + k);
    }
  }

 private:
  std::string where() const { return path_.empty() ? "configuration" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  training.validate();
  if (eval_batch_size == 0) throw ConfigError("evaluation.batch_size must be positive");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction must lie in (0, 1)");
  }
  if (model.pretrained.empty()) {
    if (model.hidden_size == 0 || model.num_layers == 0 || model.num_attention_heads == 0 ||
        model.intermediate_size == 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (model.hidden_size % model.num_attention_heads != 0) {
      throw ConfigError("model.hidden_size must be divisible by model.num_attention_heads");
    }
    if (!(model.init_stddev > 0.0)) throw ConfigError("model.init_stddev must be positive");
  }
  if (augmentation.paraphraser.type != "mock" && augmentation.paraphraser.type != "http") {
    throw ConfigError("augmentation.paraphraser.type must be mock or http");
  }
  if (augmentation.policy.max_concurrency == 0) {
    throw ConfigError("augmentation.max_concurrency must be positive");
  }
  const auto& c = translation.client;
  if (c != "identity" && c != "table" && c != "google") {
    throw ConfigError("translation.client must be identity, table or google");
  }
  if (translation.max_concurrency == 0 || translation.max_attempts == 0) {
    throw ConfigError("translation.max_concurrency and max_attempts must be positive");
  }
  if (translation.initial_delay_ms < 0) {
    throw ConfigError("translation.initial_delay_ms must be non-negative");
  }
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);

  if (const auto* d = root.child("data")) {
    Section s(*d, "data");
    s.get("language", c.data.language);
    s.get("train", c.data.train);
    s.get("dev", c.data.dev);
    s.get("test", c.data.test);
    s.get("train_fraction", c.data.train_fraction);
    s.finish();
  }
  if (const auto* m = root.child("model")) {
    Section s(*m, "model");
    s.get("pretrained", c.model.pretrained);
    s.get("hidden_size", c.model.hidden_size);
    s.get("num_layers", c.model.num_layers);
    s.get("num_attention_heads", c.model.num_attention_heads);
    s.get("intermediate_size", c.model.intermediate_size);
    s.get("init_stddev", c.model.init_stddev);
    s.finish();
  }
  if (const auto* t = root.child("training")) {
    Section s(*t, "training");
    s.get("learning_rate", c.training.learning_rate);
    s.get("dropout_rate", c.training.dropout_rate);
    s.get("batch_size", c.training.batch_size);
    s.get("max_tokens", c.training.max_tokens);
    s.get("weight_decay", c.training.weight_decay);
    s.get("epochs", c.training.epochs);
    s.finish();
  }
  if (const auto* a = root.child("augmentation")) {
    Section s(*a, "augmentation");
    s.get("enabled", c.augmentation.enabled);
    s.get("copies_per_pair", c.augmentation.policy.copies_per_pair);
    std::string target(target_name(c.augmentation.policy.target));
    s.get("target", target);
    c.augmentation.policy.target = parse_target(target);
    s.get("dedup", c.augmentation.policy.dedup);
    s.get("max_concurrency", c.augmentation.policy.max_concurrency);
    if (const auto* p = s.child("paraphraser")) {
      Section ps(*p, s.path("paraphraser"));
      ps.get("type", c.augmentation.paraphraser.type);
      ps.get("url", c.augmentation.paraphraser.url);
      ps.get("model", c.augmentation.paraphraser.model);
      ps.get("generation", c.augmentation.paraphraser.generation);
      ps.finish();
    }
    s.finish();
  }
  if (const auto* t = root.child("translation")) {
    Section s(*t, "translation");
    s.get("client", c.translation.client);
    s.get("table", c.translation.table);
    s.get("api_key_env", c.translation.api_key_env);
    s.get("base_url", c.translation.base_url);
    s.get("cache", c.translation.cache);
    s.get("target_language", c.translation.target_language);
    s.get("max_concurrency", c.translation.max_concurrency);
    s.get("max_attempts", c.translation.max_attempts);
    s.get("initial_delay_ms", c.translation.initial_delay_ms);
    s.finish();
  }
  if (const auto* e = root.child("evaluation")) {
    Section s(*e, "evaluation");
    s.get("batch_size", c.eval_batch_size);
    s.finish();
  }
  root.finish();
  c.training.seed = c.seed;
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& a = c.augmentation;
  const auto& t = c.translation;
  return json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"data",
       {{"language", c.data.language},
        {"train", c.data.train},
        {"dev", c.data.dev},
        {"test", c.data.test},
        {"train_fraction", c.data.train_fraction}}},
      {"model",
       {{"pretrained", c.model.pretrained},
        {"hidden_size", c.model.hidden_size},
        {"num_layers", c.model.num_layers},
        {"num_attention_heads", c.model.num_attention_heads},
        {"intermediate_size", c.model.intermediate_size},
        {"init_stddev", c.model.init_stddev}}},
      {"training",
       {{"learning_rate", c.training.learning_rate},
        {"dropout_rate", c.training.dropout_rate},
        {"batch_size", c.training.batch_size},
        {"max_tokens", c.training.max_tokens},
        {"weight_decay", c.training.weight_decay},
        {"epochs", c.training.epochs}}},
      {"augmentation",
       {{"enabled", a.enabled},
        {"copies_per_pair", a.policy.copies_per_pair},
        {"target", target_name(a.policy.target)},
        {"dedup", a.policy.dedup},
        {"max_concurrency", a.policy.max_concurrency},
        {"paraphraser",
         {{"type", a.paraphraser.type},
          {"url", a.paraphraser.url},
          {"model", a.paraphraser.model},
          {"generation", a.paraphraser.generation}}}}},
      {"translation",
       {{"client", t.client},
        {"table", t.table},
        {"api_key_env", t.api_key_env},
        {"base_url", t.base_url},
        {"cache", t.cache},
        {"target_language", t.target_language},
        {"max_concurrency", t.max_concurrency},
        {"max_attempts", t.max_attempts},
        {"initial_delay_ms", t.initial_delay_ms}}},
      {"evaluation", {{"batch_size", c.eval_batch_size}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string serialize_run_config(const RunConfig& config) {
  return run_config_to_json(config).dump(2) + "\n";
}

}  // namespace strel
