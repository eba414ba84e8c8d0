// Acceptance checks. Prints one PASS, FAIL or SKIP line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "oracles/metric_oracles.hpp"
#include "strel/augment.hpp"
#include "strel/checkpoint.hpp"
#include "strel/crosslingual.hpp"
#include "strel/data.hpp"
#include "strel/encoder.hpp"
#include "strel/metrics.hpp"
#include "strel/training.hpp"
#include "support/fixtures.hpp"

using namespace strel;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

// Collects the first few failure messages of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 5) messages_ << (failures_ > 1 ? "; " : "") << what;
  }
  Outcome outcome(std::string pass_detail = {}) const {
    if (failures_ == 0) return {Status::pass, std::move(pass_detail)};
    std::ostringstream s;
    s << failures_ << " failure(s): " << messages_.str();
    return {Status::fail, s.str()};
  }

 private:
  std::size_t failures_ = 0;
  std::ostringstream messages_;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = ties ? std::round(u(rng) * 8) / 8 : u(rng);
  return v;
}

Outcome metric_oracles() {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  const double tol = 1e-9;
  std::size_t compared = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = len(rng);
    const bool ties = t % 2 == 1;
    auto y = random_scores(rng, n, ties);
    auto p = random_scores(rng, n, ties);
    if (oracle::constant(y) || oracle::constant(p)) {
      --t;  // correlations are undefined; draw again
      continue;
    }
    const metrics::PredictionSet ps(y, p);
    const auto tag = " (set " + std::to_string(t) + ", n=" + std::to_string(n) + ")";
    c.expect(std::abs(metrics::mse(ps) - oracle::mse(y, p)) <= tol, "mse" + tag);
    c.expect(std::abs(metrics::mae(ps) - oracle::mae(y, p)) <= tol, "mae" + tag);
    c.expect(std::abs(metrics::r_squared(ps) - oracle::r_squared(y, p)) <= tol, "r2" + tag);
    c.expect(std::abs(metrics::pearson(ps) - oracle::pearson(y, p)) <= tol, "pearson" + tag);
    c.expect(std::abs(metrics::spearman(ps) - oracle::spearman(y, p)) <= tol, "spearman" + tag);
    ++compared;
  }

  // Every tie pattern of length <= 6 against every other one.
  std::atomic<std::size_t> exhaustive{0}, bad{0};
  for (std::size_t n = 2; n <= 6; ++n) {
    const auto orders = oracle::weak_orderings(n);
    for (const auto& o : orders) {
      const auto r = metrics::fractional_ranks(o);
      c.expect(r == oracle::fractional_ranks(o), "fractional ranks, n=" + std::to_string(n));
    }
    std::vector<std::size_t> usable;
    std::vector<std::vector<double>> oracle_ranks(orders.size());
    for (std::size_t i = 0; i < orders.size(); ++i) {
      if (!oracle::constant(orders[i])) usable.push_back(i);
      oracle_ranks[i] = oracle::fractional_ranks(orders[i]);
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t a = next++; a < usable.size(); a = next++) {
        const auto& y = orders[usable[a]];
        for (std::size_t b : usable) {
          const auto& p = orders[b];
          const metrics::PredictionSet ps(y, p);
          const double want = oracle::pearson(oracle_ranks[usable[a]], oracle_ranks[b]);
          if (std::abs(metrics::spearman(ps) - want) > tol) ++bad;
          ++exhaustive;
        }
      }
    };
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  c.expect(bad == 0, std::to_string(bad.load()) + " exhaustive spearman mismatches");

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 30.0, "took " + num(secs) + " s");
  return c.outcome(std::to_string(compared) + " random sets, " + std::to_string(exhaustive) +
                   " exhaustive pairs, " + num(secs) + " s");
}

// ---------------------------------------------------------------- 2

Outcome mse_identities() {
  Check c;
  c.expect(metrics::mse(metrics::PredictionSet({0.0, 1.0}, {0.5, 0.5})) == 0.25,
           "mse([0,1],[0.5,0.5]) != 0.25");
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> len(1, 200);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_scores(rng, len(rng), t % 2 == 0);
    c.expect(metrics::mse(metrics::PredictionSet(x, x)) == 0.0, "mse(x,x) != 0");
  }
  return c.outcome();
}

// ---------------------------------------------------------------- 3

Outcome overfit_smoke() {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  const auto tok = Tokenizer::byte_level();
  const auto pairs = fixtures::synthetic_pairs(16);

  auto model = fixtures::tiny_model<float>(tok, 7, 64);
  c.expect(model.config().num_layers == 2 && model.config().hidden_size == 32,
           "not the tiny architecture");
  TrainingConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.dropout_rate = 0.0;
  cfg.weight_decay = 0.0;
  cfg.batch_size = 16;
  cfg.max_tokens = 64;
  cfg.epochs = 200;  // one step per epoch: 200 optimizer steps
  const auto log = train(model, tok, pairs, pairs, cfg);
  c.expect(log.epochs.back().steps == 200, "ran " + std::to_string(log.epochs.back().steps) +
                                               " steps");
  const auto preds = predict(model, tok, pairs.pairs(), 64, 16);
  const metrics::PredictionSet ps(pairs.scores(), preds);
  const double train_mse = metrics::mse(ps);
  const double rho = metrics::spearman(ps);
  c.expect(train_mse < 0.01, "train mse " + num(train_mse));
  c.expect(rho >= 0.95, "train spearman " + num(rho));

  // Head gradient against central differences, in double precision.
  auto dm = fixtures::tiny_model<double>(tok, 11, 64, 0.2);
  std::vector<TokenizedInput> inputs;
  for (const auto& p : pairs) inputs.push_back(tokenize(tok, p, 64));
  const auto batch = pad_batch(inputs, tok.special().pad);
  const auto labels = pairs.scores();
  std::mt19937_64 rng(0);
  dm.zero_grad();
  loss_and_gradient(dm, batch, labels, rng);
  const std::vector<double> grad(dm.gradients().begin(), dm.gradients().end());
  auto loss = [&] {
    const auto out = dm.forward(batch);
    return mse_loss(std::vector<double>(out.begin(), out.end()), labels);
  };
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& info : dm.parameter_table()) {
    if (info.name.rfind("classifier.", 0) != 0) continue;
    for (std::size_t j = 0; j < info.size; ++j) {
      double& w = dm.parameters()[info.offset + j];
      const double saved = w, h = 1e-6;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double fd = (up - down) / (2 * h);
      const double g = grad[info.offset + j];
      const double rel = std::abs(g - fd) / std::max(std::abs(fd), 1e-5);
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  c.expect(worst <= 1e-3, "head gradient relative error " + num(worst));

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 120.0, "took " + num(secs) + " s");
  return c.outcome("mse " + num(train_mse) + ", spearman " + num(rho) + ", grad rel err " +
                   num(worst) + " over " + std::to_string(checked) + " head params, " +
                   num(secs) + " s");
}

// ---------------------------------------------------------------- 4

Outcome equivalences() {
  Check c;
  const auto tok = Tokenizer::byte_level();
  const auto model = fixtures::tiny_model<float>(tok, 7, 64, 0.2);
  const auto ds = fixtures::synthetic_pairs(40, 3, Split::test, "afr");

  // (a) identity translation
  IdentityClient id;
  TranslationCache cache;
  const auto xl = crosslingual_evaluate(model, tok, ds, id, cache, {}, 64, 16);
  const auto direct = predict(model, tok, ds.pairs(), 64, 16);
  const auto report = metrics::evaluate(metrics::PredictionSet(ds.scores(), direct));
  c.expect(xl.report == report &&
               metrics::serialize_report(xl.report) == metrics::serialize_report(report),
           "(a) identity report differs");

  // (b) batch size
  const auto one = predict(model, tok, ds.pairs(), 64, 1);
  double diff_b = 0;
  for (std::size_t bs : {2u, 7u, 16u, 40u}) {
    const auto other = predict(model, tok, ds.pairs(), 64, bs);
    for (std::size_t i = 0; i < one.size(); ++i) diff_b = std::max(diff_b, std::abs(one[i] - other[i]));
  }
  c.expect(diff_b <= 1e-5, "(b) batch-size difference " + num(diff_b));

  // (c) padding
  std::vector<TokenizedInput> inputs;
  for (const auto& p : ds) inputs.push_back(tokenize(tok, p, 64));
  const auto tight = pad_batch(inputs, tok.special().pad);
  const auto raw = model.forward(tight);
  double diff_c = 0;
  for (std::size_t extra : {1u, 9u, 30u}) {
    const std::size_t len = std::min<std::size_t>(tight.length + extra, 64);
    const auto out = model.forward(pad_batch(inputs, tok.special().pad, len));
    for (std::size_t i = 0; i < raw.size(); ++i)
      diff_c = std::max(diff_c, std::abs(static_cast<double>(raw[i] - out[i])));
  }
  c.expect(diff_c <= 1e-5, "(c) padding difference " + num(diff_c));

  // (d) checkpoint round trip
  const auto dir = fs::temp_directory_path() / "strel_acceptance_ckpt";
  fs::remove_all(dir);
  save_checkpoint(model, tok, dir, 64);
  const auto ck = load_checkpoint(dir);
  const auto reloaded = predict(ck.model, ck.tokenizer, ds.pairs(), 64, 16);
  double diff_d = 0;
  for (std::size_t i = 0; i < direct.size(); ++i)
    diff_d = std::max(diff_d, std::abs(direct[i] - reloaded[i]));
  c.expect(diff_d <= 1e-6, "(d) checkpoint difference " + num(diff_d));
  fs::remove_all(dir);

  return c.outcome("batch " + num(diff_b) + ", padding " + num(diff_c) + ", checkpoint " +
                   num(diff_d));
}

// ---------------------------------------------------------------- 5

Outcome augmentation() {
  Check c;
  const auto ds = fixtures::synthetic_pairs(100);
  MockParaphraser mock;
  AugmentationPolicy policy;
  policy.copies_per_pair = 1;
  const auto r = augment(ds, mock, policy);
  c.expect(r.dataset.size() == 200, "size " + std::to_string(r.dataset.size()));
  for (std::size_t i = 0; i < ds.size() && i < r.dataset.size(); ++i) {
    c.expect(r.dataset[i] == ds[i], "original " + ds[i].pair_id + " not in prefix position");
  }
  c.expect(r.manifest.size() == r.dataset.size() - ds.size(), "manifest size");
  for (std::size_t i = 0; i < r.manifest.size(); ++i) {
    const auto& m = r.manifest[i];
    const auto& aug = r.dataset[ds.size() + i];
    c.expect(m.pair_id == aug.pair_id, "manifest order at " + std::to_string(i));
    const auto src = std::find_if(ds.begin(), ds.end(),
                                  [&](const LabeledPair& p) { return p.pair_id == m.source_pair_id; });
    c.expect(src != ds.end(), "unknown source " + m.source_pair_id);
    if (src != ds.end()) c.expect(aug.score == src->score, "score changed for " + aug.pair_id);
    c.expect(m.copy_index == 1 && m.paraphraser == "mock" && m.target == policy.target,
             "incomplete manifest entry " + m.pair_id);
  }
  c.expect(parse_manifest(serialize_manifest(r.manifest)) == r.manifest, "manifest round trip");
  return c.outcome();
}

// ---------------------------------------------------------------- 6

Outcome binning() {
  Check c;
  const double scores[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const std::size_t bins[] = {0, 1, 2, 3, 4, 4};
  for (int i = 0; i < 6; ++i) {
    c.expect(metrics::discretize(scores[i]) == bins[i], "discretize(" + num(scores[i]) + ")");
  }
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> len(1, 300);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = len(rng);
    const auto m = metrics::confusion_matrix(
        metrics::PredictionSet(random_scores(rng, n, t % 2 == 0), random_scores(rng, n, false)));
    std::size_t sum = 0;
    for (const auto& row : m)
      for (auto v : row) sum += v;
    c.expect(sum == n, "confusion sum " + std::to_string(sum) + " != " + std::to_string(n));
  }
  return c.outcome();
}

// ---------------------------------------------------------------- 7

PairDataset random_dataset(std::mt19937_64& rng, std::size_t n) {
  static const char* pieces[] = {"plain", "with, comma", "a \"quote\"", "naïve café",
                                 "line\nbreak", "  padded", "العربية", "ümlaut"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pieces) - 1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<LabeledPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    double score = u(rng);
    if (i % 5 == 0) score = std::round(score * 4) / 4;
    pairs.push_back({"R" + std::to_string(i), std::string(pieces[pick(rng)]) + " " + std::to_string(i),
                     pieces[pick(rng)], score});
  }
  return PairDataset("eng", Split::train, std::move(pairs));
}

Outcome stats_and_roundtrip() {
  Check c;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> len(1, 400);
  for (int t = 0; t < 50; ++t) {
    const auto ds = random_dataset(rng, len(rng));
    const auto stats = compute_stats(ds);
    std::size_t sum = 0;
    for (auto v : stats.histogram) sum += v;
    c.expect(sum == stats.count && stats.count == ds.size(), "histogram sum");
    const auto text = serialize_dataset(ds);
    const auto back = parse_dataset(text, "eng", Split::train);
    c.expect(back == ds, "parse(serialize(d)) != d");
    c.expect(serialize_dataset(back) == text, "canonical CSV not byte-identical");
  }
#ifdef STREL_SOURCE_DIR
  const fs::path data = fs::path(STREL_SOURCE_DIR) / "data" / "synthetic";
  for (const char* name : {"train.csv", "dev.csv", "test.csv", "afr_test.csv"}) {
    const auto text = read_text_file(data / name);
    c.expect(serialize_dataset(parse_dataset(text, "eng", Split::unsplit)) == text,
             std::string(name) + " does not round-trip");
  }
#endif
  return c.outcome();
}

// ---------------------------------------------------------------- 8

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

// `<code>_<split>.csv` or `<code>_<split>_with_labels.csv` in the SemRel directory.
std::optional<fs::path> semrel_file(const fs::path& dir, const std::string& code,
                                    const std::string& split) {
  for (const auto& name : {code + "_" + split + ".csv", code + "_" + split + "_with_labels.csv"}) {
    if (fs::exists(dir / name)) return dir / name;
  }
  return std::nullopt;
}

PairDataset load_semrel(const fs::path& path, const std::string& code, Split split) {
  std::istringstream in(read_text_file(path));
  return import_semrel(in, code, split);
}

struct LanguageTarget {
  std::string name;
  std::string code;
  double dev, test, tol;
};

struct Optional {
  std::string id;
  std::string name;
  std::function<Outcome()> run;
  std::vector<const char*> needs;
};

Outcome within(Check& c, const std::string& what, double got, double want, double tol) {
  c.expect(std::abs(got - want) <= tol,
           what + " " + num(got) + " outside " + num(want) + " +/- " + num(tol));
  return c.outcome();
}

std::pair<Model, Tokenizer> fine_tune(const fs::path& pretrained, const PairDataset& train_set,
                                      const PairDataset& dev_set) {
  TrainingConfig cfg;
  auto ck = import_pretrained(pretrained, cfg.seed, cfg.max_tokens);
  train(ck.model, ck.tokenizer, train_set, dev_set, cfg);
  return {std::move(ck.model), std::move(ck.tokenizer)};
}

double spearman_on(const Model& m, const Tokenizer& tok, const PairDataset& ds) {
  return metrics::spearman(
      metrics::PredictionSet(ds.scores(), predict(m, tok, ds.pairs(), 128, 32)));
}

std::vector<Optional> optional_targets() {
  std::vector<Optional> out;
  const std::string arabic = env("STREL_ARABIC_CODE").value_or("arq");
  const std::string spanish = env("STREL_SPANISH_CODE").value_or("esp");

  out.push_back({"8a", "Spanish/Arabic train mean scores", [=] {
                   Check c;
                   const fs::path dir = *env("STREL_SEMREL_DIR");
                   for (const auto& [code, want] : {std::pair{spanish, 0.43}, {arabic, 0.50}}) {
                     const auto f = semrel_file(dir, code, "train");
                     c.expect(f.has_value(), "missing " + code + "_train.csv");
                     if (f) within(c, code + " mean", compute_stats(load_semrel(*f, code, Split::train)).mean_score, want, 0.01);
                   }
                   return c.outcome();
                 },
                 {"STREL_SEMREL_DIR"}});

  for (const auto& t : {LanguageTarget{"English", "eng", 0.83, 0.82, 0.05},
                        LanguageTarget{"Spanish", spanish, 0.71, 0.67, 0.05},
                        LanguageTarget{"Arabic", arabic, 0.32, 0.38, 0.07}}) {
    out.push_back({"8" + t.code, t.name + " dev/test Spearman", [=] {
                     Check c;
                     const fs::path dir = *env("STREL_SEMREL_DIR");
                     const auto tr = semrel_file(dir, t.code, "train");
                     const auto dv = semrel_file(dir, t.code, "dev");
                     const auto te = semrel_file(dir, t.code, "test");
                     if (!tr || !dv || !te) return Outcome{Status::skip, "SemRel files for " + t.code + " not found"};
                     const auto dev = load_semrel(*dv, t.code, Split::dev);
                     const auto test = load_semrel(*te, t.code, Split::test);
                     const fs::path weights =
                         env(("STREL_PRETRAINED_DIR_" + t.code).c_str()).value_or(*env("STREL_PRETRAINED_DIR"));
                     auto [m, tok] = fine_tune(weights, load_semrel(*tr, t.code, Split::train), dev);
                     within(c, "dev", spearman_on(m, tok, dev), t.dev, t.tol);
                     return within(c, "test", spearman_on(m, tok, test), t.test, t.tol);
                   },
                   {"STREL_SEMREL_DIR", "STREL_PRETRAINED_DIR"}});
  }

  out.push_back({"8aug", "English augmentation Pearson gain", [] {
                   Check c;
                   const fs::path dir = *env("STREL_SEMREL_DIR");
                   const auto train_set = load_semrel(*semrel_file(dir, "eng", "train"), "eng", Split::train);
                   const auto dev = load_semrel(*semrel_file(dir, "eng", "dev"), "eng", Split::dev);
                   const fs::path weights = *env("STREL_PRETRAINED_DIR");
                   HttpParaphraser para({*env("STREL_PARAPHRASER_URL")});
                   const auto aug = augment(train_set, para, AugmentationPolicy{});
                   auto pearson_of = [&](const PairDataset& tr) {
                     auto [m, tok] = fine_tune(weights, tr, dev);
                     return metrics::pearson(metrics::PredictionSet(
                         dev.scores(), predict(m, tok, dev.pairs(), 128, 32)));
                   };
                   within(c, "baseline Pearson", pearson_of(train_set), 0.79, 0.03);
                   return within(c, "augmented Pearson", pearson_of(aug.dataset), 0.81, 0.03);
                 },
                 {"STREL_SEMREL_DIR", "STREL_PRETRAINED_DIR", "STREL_PARAPHRASER_URL"}});

  out.push_back({"8afr", "Afrikaans translate-then-score", [] {
                   Check c;
                   const fs::path dir = *env("STREL_SEMREL_DIR");
                   const auto te = semrel_file(dir, "afr", "test");
                   if (!te) return Outcome{Status::skip, "afr test file not found"};
                   const auto train_set = load_semrel(*semrel_file(dir, "eng", "train"), "eng", Split::train);
                   const auto dev = load_semrel(*semrel_file(dir, "eng", "dev"), "eng", Split::dev);
                   auto [m, tok] = fine_tune(*env("STREL_PRETRAINED_DIR"), train_set, dev);
                   HttpTranslationClient client({*env("GOOGLE_TRANSLATE_API_KEY")});
                   TranslationCache cache(fs::temp_directory_path() / "strel_acceptance_afr.cache");
                   const auto r = crosslingual_evaluate(m, tok, load_semrel(*te, "afr", Split::test),
                                                        client, cache, {}, 128, 32);
                   within(c, "Pearson", r.report.pearson, 0.8, 0.05);
                   return within(c, "MSE", r.report.mse, 0.02, 0.01);
                 },
                 {"STREL_SEMREL_DIR", "STREL_PRETRAINED_DIR", "GOOGLE_TRANSLATE_API_KEY"}});
  return out;
}

const char* label(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::skip: return "SKIP";
  }
  return "?";
}

void print(const std::string& id, const std::string& name, const Outcome& o, double secs) {
  std::cout << label(o.status) << " " << id << " " << name;
  if (!o.detail.empty()) std::cout << ": " << o.detail;
  std::cout << " [" << num(secs) << " s]" << std::endl;
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {Status::fail, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::tuple<std::string, std::string, std::function<Outcome()>>> required{
      {"1", "metric oracle equivalence", metric_oracles},
      {"2", "mse exact identities", mse_identities},
      {"3", "overfit smoke and head gradient", overfit_smoke},
      {"4", "identity/batch/padding/checkpoint equivalences", equivalences},
      {"5", "mock paraphrase augmentation", augmentation},
      {"6", "score binning and confusion totals", binning},
      {"7", "histogram totals and canonical CSV round trip", stats_and_roundtrip},
  };
  bool failed = false;
  for (const auto& [id, name, run] : required) {
    const auto start = std::chrono::steady_clock::now();
    const auto o = guarded(run);
    print(id, name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    failed = failed || o.status == Status::fail;
  }
  for (const auto& t : optional_targets()) {
    std::vector<std::string> missing;
    for (const char* v : t.needs)
      if (!env(v)) missing.push_back(v);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    if (!missing.empty()) {
      std::string m = "optional reproduction target, unset:";
      for (const auto& v : missing) m += " " + v;
      o = {Status::skip, m};
    } else {
      o = guarded(t.run);
    }
    print(t.id, t.name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    failed = failed || o.status == Status::fail;
  }
  return failed ? 1 : 0;
}
