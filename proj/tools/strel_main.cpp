// strel: command-line front end for training, evaluating and analysing
// sentence-pair relatedness regressors.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "strel/augment.hpp"
#include "strel/checkpoint.hpp"
#include "strel/crosslingual.hpp"
#include "strel/csv.hpp"
#include "strel/data.hpp"
#include "strel/error.hpp"
#include "strel/metrics.hpp"
#include "strel/report.hpp"
#include "strel/run_config.hpp"
#include "strel/training.hpp"

namespace fs = std::filesystem;
using namespace strel;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_run_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.training.seed = cfg.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  return cfg;
}

fs::path make_out_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_resolved(const fs::path& dir, const RunConfig& cfg) {
  write_text_file(dir / "resolved_config.json", serialize_run_config(cfg));
}

std::string require_path(const std::string& given, const std::string& fallback,
                         const char* what) {
  if (!given.empty()) return given;
  if (!fallback.empty()) return fallback;
  throw ConfigError(std::string("no ") + what + " dataset given");
}

std::unique_ptr<Paraphraser> make_paraphraser(const ParaphraserConfig& pc) {
  if (pc.type == "mock") return std::make_unique<MockParaphraser>();
  HttpParaphraserConfig hc;
  hc.url = pc.url;
  hc.model = pc.model;
  hc.generation = pc.generation;
  return std::make_unique<HttpParaphraser>(hc);
}

std::map<std::string, std::string> load_translation_table(const fs::path& path) {
  const auto text = read_text_file(path);
  csv::Reader reader(text);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields != std::vector<std::string>{"source", "target"}) {
    throw ParseError(1, path.string() + ": expected header source,target");
  }
  std::map<std::string, std::string> table;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 2) throw ParseError(reader.record_line(), "expected 2 fields");
    table[fields[0]] = fields[1];
  }
  return table;
}

std::unique_ptr<TranslationClient> make_translation_client(const TranslationConfig& tc) {
  if (tc.client == "identity") return std::make_unique<IdentityClient>();
  if (tc.client == "table") {
    if (tc.table.empty()) throw ConfigError("translation.table is required for the table client");
    return std::make_unique<TableClient>(load_translation_table(tc.table));
  }
  const char* key = std::getenv(tc.api_key_env.c_str());
  if (!key || !*key) throw ConfigError("environment variable " + tc.api_key_env + " is not set");
  HttpTranslationConfig hc;
  hc.api_key = key;
  hc.base_url = tc.base_url;
  return std::make_unique<HttpTranslationClient>(hc);
}

std::string stats_json(const DatasetStats& s) {
  nlohmann::json j{{"count", s.count},
                   {"mean_score", s.mean_score},
                   {"std_score", s.std_score},
                   {"min_score", s.min_score},
                   {"max_score", s.max_score},
                   {"histogram", s.histogram}};
  return j.dump(2) + "\n";
}

void print_report(const metrics::EvaluationReport& r) {
  std::cout << "n=" << r.n << " spearman=" << r.spearman << " pearson=" << r.pearson
            << " mse=" << r.mse << " mae=" << r.mae << " r_squared=" << r.r_squared << "\n";
}

void write_evaluation(const fs::path& dir, const PairDataset& ds,
                      const std::vector<double>& preds, const metrics::EvaluationReport& r) {
  write_text_file(dir / "report.txt", metrics::serialize_report(r));
  write_text_file(dir / "predictions.csv",
                  report::serialize_predictions(report::make_rows(ds, preds)));
}

// --- commands --------------------------------------------------------------

struct ImportArgs {
  std::string input, output, format = "semrel", language, split = "unsplit";
};

void cmd_import(const Globals& g, const ImportArgs& a) {
  const auto cfg = resolve(g);
  const auto language = a.language.empty() ? cfg.data.language : a.language;
  const auto text = read_text_file(a.input);
  const auto split = parse_split(a.split);
  PairDataset ds;
  if (a.format == "semrel") {
    ds = import_semrel(text, language, split);
  } else if (a.format == "canonical") {
    ds = parse_dataset(text, language, split);
  } else {
    throw ConfigError("--format must be semrel or canonical");
  }
  const auto out = serialize_dataset(ds);
  if (a.output.empty()) {
    std::cout << out;
  } else {
    write_text_file(a.output, out);
    spdlog::info("wrote {} pairs to {}", ds.size(), a.output);
  }
}

struct StatsArgs {
  std::string input, language, split = "train";
};

void cmd_stats(const Globals& g, const StatsArgs& a) {
  const auto cfg = resolve(g);
  const auto ds = load_dataset(a.input, a.language.empty() ? cfg.data.language : a.language,
                               parse_split(a.split));
  const auto body = stats_json(compute_stats(ds));
  std::cout << body;
  if (!g.out.empty()) write_text_file(make_out_dir(cfg) / "stats.json", body);
}

struct TrainArgs {
  std::string train, dev, pretrained;
  std::optional<std::size_t> epochs, batch_size, max_tokens;
  std::optional<double> lr, dropout, weight_decay;
  bool augment = false;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  auto cfg = resolve(g);
  if (!a.train.empty()) cfg.data.train = a.train;
  if (!a.dev.empty()) cfg.data.dev = a.dev;
  if (!a.pretrained.empty()) cfg.model.pretrained = a.pretrained;
  if (a.epochs) cfg.training.epochs = *a.epochs;
  if (a.batch_size) cfg.training.batch_size = *a.batch_size;
  if (a.max_tokens) cfg.training.max_tokens = *a.max_tokens;
  if (a.lr) cfg.training.learning_rate = *a.lr;
  if (a.dropout) cfg.training.dropout_rate = *a.dropout;
  if (a.weight_decay) cfg.training.weight_decay = *a.weight_decay;
  if (a.augment) cfg.augmentation.enabled = true;
  cfg.validate();

  const auto dir = make_out_dir(cfg);
  write_resolved(dir, cfg);

  auto train_set = load_dataset(require_path(cfg.data.train, "", "train"), cfg.data.language,
                                Split::train);
  PairDataset dev_set;
  if (!cfg.data.dev.empty()) {
    dev_set = load_dataset(cfg.data.dev, cfg.data.language, Split::dev);
  } else {
    auto parts = split_dataset(train_set, cfg.data.train_fraction, cfg.seed);
    train_set = std::move(parts.train);
    dev_set = std::move(parts.held_out);
    spdlog::info("no dev set given; split train into {}/{}", train_set.size(), dev_set.size());
  }

  if (cfg.augmentation.enabled) {
    auto paraphraser = make_paraphraser(cfg.augmentation.paraphraser);
    auto result = augment(train_set, *paraphraser, cfg.augmentation.policy);
    save_dataset(dir / "augmented_train.csv", result.dataset);
    write_text_file(dir / "augmentation_manifest.jsonl", serialize_manifest(result.manifest));
    spdlog::info("augmented train set: {} -> {} pairs", train_set.size(), result.dataset.size());
    train_set = std::move(result.dataset);
  }

  auto ckpt = [&] {
    if (!cfg.model.pretrained.empty()) {
      return import_pretrained(cfg.model.pretrained, cfg.seed, cfg.training.max_tokens);
    }
    auto tokenizer = Tokenizer::byte_level();
    EncoderConfig ec;
    ec.vocab_size = tokenizer.vocab_size();
    ec.hidden_size = cfg.model.hidden_size;
    ec.num_layers = cfg.model.num_layers;
    ec.num_attention_heads = cfg.model.num_attention_heads;
    ec.intermediate_size = cfg.model.intermediate_size;
    ec.pad_token_id = tokenizer.special().pad;
    ec.max_position = cfg.training.max_tokens + static_cast<std::size_t>(ec.pad_token_id) + 1;
    ec.validate();
    Model model(ec);
    model.init_random(cfg.seed, cfg.model.init_stddev);
    return Checkpoint{std::move(model), std::move(tokenizer), cfg.training.max_tokens};
  }();

  const auto log = train(ckpt.model, ckpt.tokenizer, train_set, dev_set, cfg.training,
                         [](const EpochRecord& r) {
                           spdlog::info("epoch {} steps {} train_loss {} dev_spearman {} dev_mse {}",
                                        r.epoch, r.steps,
                                        r.train_loss ? std::to_string(*r.train_loss) : "-",
                                        r.dev_spearman ? std::to_string(*r.dev_spearman) : "n/a",
                                        r.dev_mse);
                         });
  write_text_file(dir / "training_log.jsonl", serialize_training_log(log));
  save_checkpoint(ckpt.model, ckpt.tokenizer, dir / "best", cfg.training.max_tokens, &log);
  const auto& sel = log.selected();
  std::cout << "selected_epoch=" << log.selected_epoch << " dev_spearman="
            << (sel.dev_spearman ? std::to_string(*sel.dev_spearman) : "nan")
            << " dev_mse=" << sel.dev_mse << " checkpoint=" << (dir / "best").string() << "\n";
}

struct EvalArgs {
  std::string checkpoint, input, language, split = "test";
};

void cmd_evaluate(const Globals& g, const EvalArgs& a) {
  const auto cfg = resolve(g);
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto ds = load_dataset(require_path(a.input, cfg.data.test, "evaluation"),
                               a.language.empty() ? cfg.data.language : a.language,
                               parse_split(a.split));
  if (!ds.labeled()) throw ValidationError("evaluation needs a labeled dataset");
  const auto preds = predict(ckpt.model, ckpt.tokenizer, ds.pairs(), ckpt.max_tokens,
                             cfg.eval_batch_size);
  const auto r = metrics::evaluate(metrics::PredictionSet(ds.scores(), preds));
  const auto dir = make_out_dir(cfg);
  write_resolved(dir, cfg);
  write_evaluation(dir, ds, preds, r);
  print_report(r);
}

void cmd_predict(const Globals& g, const EvalArgs& a) {
  const auto cfg = resolve(g);
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto ds = load_dataset(require_path(a.input, cfg.data.test, "input"),
                               a.language.empty() ? cfg.data.language : a.language,
                               parse_split(a.split));
  const auto preds = predict(ckpt.model, ckpt.tokenizer, ds.pairs(), ckpt.max_tokens,
                             cfg.eval_batch_size);
  const auto dir = make_out_dir(cfg);
  write_resolved(dir, cfg);
  write_text_file(dir / "predictions.csv",
                  report::serialize_predictions(report::make_rows(ds, preds)));
  spdlog::info("wrote {} predictions to {}", preds.size(), (dir / "predictions.csv").string());
}

struct AugmentArgs {
  std::string input, language, target, paraphraser, paraphraser_url;
  std::optional<std::size_t> copies;
  bool no_dedup = false;
};

void cmd_augment(const Globals& g, const AugmentArgs& a) {
  auto cfg = resolve(g);
  auto& aug = cfg.augmentation;
  if (a.copies) aug.policy.copies_per_pair = *a.copies;
  if (!a.target.empty()) aug.policy.target = parse_target(a.target);
  if (a.no_dedup) aug.policy.dedup = false;
  if (!a.paraphraser.empty()) aug.paraphraser.type = a.paraphraser;
  if (!a.paraphraser_url.empty()) aug.paraphraser.url = a.paraphraser_url;
  aug.enabled = true;
  cfg.validate();
  const auto ds = load_dataset(require_path(a.input, cfg.data.train, "train"),
                               a.language.empty() ? cfg.data.language : a.language, Split::train);
  auto paraphraser = make_paraphraser(aug.paraphraser);
  const auto result = augment(ds, *paraphraser, aug.policy);
  const auto dir = make_out_dir(cfg);
  write_resolved(dir, cfg);
  save_dataset(dir / "augmented.csv", result.dataset);
  write_text_file(dir / "manifest.jsonl", serialize_manifest(result.manifest));
  std::cout << "input=" << ds.size() << " output=" << result.dataset.size()
            << " skipped=" << result.skipped.size() << "\n";
}

struct XevalArgs {
  std::string checkpoint, input, language, client, table, cache;
};

void cmd_xeval(const Globals& g, const XevalArgs& a) {
  auto cfg = resolve(g);
  auto& tc = cfg.translation;
  if (!a.client.empty()) tc.client = a.client;
  if (!a.table.empty()) tc.table = a.table;
  if (!a.cache.empty()) tc.cache = a.cache;
  if (!a.language.empty()) cfg.data.language = a.language;
  cfg.validate();
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto ds = load_dataset(require_path(a.input, cfg.data.test, "evaluation"),
                               cfg.data.language, Split::test);
  auto client = make_translation_client(tc);
  auto cache = tc.cache.empty() ? TranslationCache() : TranslationCache(tc.cache);
  TranslateOptions opts;
  opts.target_language = tc.target_language;
  opts.max_concurrency = tc.max_concurrency;
  opts.retry.max_attempts = tc.max_attempts;
  opts.retry.initial_delay = std::chrono::milliseconds(tc.initial_delay_ms);
  const auto result = crosslingual_evaluate(ckpt.model, ckpt.tokenizer, ds, *client, cache, opts,
                                            ckpt.max_tokens, cfg.eval_batch_size);
  const auto dir = make_out_dir(cfg);
  write_resolved(dir, cfg);
  save_dataset(dir / "translated.csv", result.translated);
  write_evaluation(dir, result.translated, result.predictions, result.report);
  print_report(result.report);
}

struct ReportArgs {
  std::string predictions, title = "predictions";
};

void cmd_report(const Globals& g, const ReportArgs& a) {
  const auto cfg = resolve(g);
  const auto rows = report::parse_predictions(read_text_file(a.predictions));
  const auto files = report::write_plots(make_out_dir(cfg), rows, a.title);
  for (const auto& f : files) std::cout << f.string() << "\n";
}

std::string escape_message(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else {
      out += c;
    }
  }
  return out;
}

int fail(std::string_view kind, std::string_view message) {
  std::cerr << "error kind=" << kind << " message=\"" << escape_message(message) << "\"\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("strel"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Sentence-pair relatedness toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  ImportArgs imp;
  auto* c_import = app.add_subcommand("import", "Convert a dataset to canonical CSV");
  c_import->add_option("input", imp.input, "Input CSV")->required();
  c_import->add_option("-o,--output", imp.output, "Output file (default: stdout)");
  c_import->add_option("--format", imp.format, "semrel or canonical");
  c_import->add_option("--language", imp.language, "ISO 639 language code");
  c_import->add_option("--split", imp.split, "train, dev, test or unsplit");

  StatsArgs st;
  auto* c_stats = app.add_subcommand("stats", "Score statistics of a labeled dataset");
  c_stats->add_option("input", st.input, "Canonical CSV")->required();
  c_stats->add_option("--language", st.language);
  c_stats->add_option("--split", st.split);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Fine-tune a model");
  c_train->add_option("--train", tr.train, "Training set (canonical CSV)");
  c_train->add_option("--dev", tr.dev, "Dev set; split from train when absent");
  c_train->add_option("--pretrained", tr.pretrained, "Pretrained model directory");
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--lr", tr.lr, "Learning rate");
  c_train->add_option("--batch-size", tr.batch_size);
  c_train->add_option("--max-tokens", tr.max_tokens);
  c_train->add_option("--dropout", tr.dropout);
  c_train->add_option("--weight-decay", tr.weight_decay);
  c_train->add_flag("--augment", tr.augment, "Paraphrase-augment the training set");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score a labeled dataset and report metrics");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("input", ev.input, "Canonical CSV (default: data.test)");
  c_eval->add_option("--language", ev.language);
  c_eval->add_option("--split", ev.split);

  EvalArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Write predictions for a dataset");
  c_predict->add_option("--checkpoint", pr.checkpoint)->required();
  c_predict->add_option("input", pr.input, "Canonical CSV (default: data.test)");
  c_predict->add_option("--language", pr.language);
  c_predict->add_option("--split", pr.split);

  AugmentArgs au;
  auto* c_aug = app.add_subcommand("augment", "Paraphrase-augment a training set");
  c_aug->add_option("input", au.input, "Canonical CSV (default: data.train)");
  c_aug->add_option("--language", au.language);
  c_aug->add_option("--copies", au.copies, "Copies per pair");
  c_aug->add_option("--target", au.target, "first, second or both");
  c_aug->add_flag("--no-dedup", au.no_dedup);
  c_aug->add_option("--paraphraser", au.paraphraser, "mock or http");
  c_aug->add_option("--paraphraser-url", au.paraphraser_url);

  XevalArgs xe;
  auto* c_xeval = app.add_subcommand("xeval", "Translate a dataset, then score it");
  c_xeval->add_option("--checkpoint", xe.checkpoint)->required();
  c_xeval->add_option("input", xe.input, "Canonical CSV (default: data.test)");
  c_xeval->add_option("--language", xe.language, "Source language");
  c_xeval->add_option("--client", xe.client, "identity, table or google");
  c_xeval->add_option("--table", xe.table, "CSV source,target for the table client");
  c_xeval->add_option("--cache", xe.cache, "Persistent translation cache file");

  ReportArgs rp;
  auto* c_report = app.add_subcommand("report", "Plot predictions against labels");
  c_report->add_option("--predictions", rp.predictions, "Predictions CSV")->required();
  c_report->add_option("--title", rp.title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error kind=usage message=\"" << escape_message(e.what()) << "\"\n";
    return 2;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (c_import->parsed()) cmd_import(g, imp);
    else if (c_stats->parsed()) cmd_stats(g, st);
    else if (c_train->parsed()) cmd_train(g, tr);
    else if (c_eval->parsed()) cmd_evaluate(g, ev);
    else if (c_predict->parsed()) cmd_predict(g, pr);
    else if (c_aug->parsed()) cmd_augment(g, au);
    else if (c_xeval->parsed()) cmd_xeval(g, xe);
    else if (c_report->parsed()) cmd_report(g, rp);
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
