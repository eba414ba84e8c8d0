#include "strel/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "strel/error.hpp"
#include "strel/metrics.hpp"

namespace strel {

void TrainingConfig::validate() const {
  if (!(learning_rate >= 0.0 && learning_rate < 1.0)) {
    throw ConfigError("learning_rate must lie in [0, 1)");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_tokens < Tokenizer::kPairSpecialTokens) {
    throw ConfigError("max_tokens must be at least " +
                      std::to_string(Tokenizer::kPairSpecialTokens));
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be non-negative");
  }
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
}

double mse_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("mse_loss: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(labels.size()) +
                          " labels");
  }
  if (labels.empty()) throw ValidationError("mse_loss of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double d = labels[i] - predictions[i];
    sum += d * d;
  }
  return sum / static_cast<double>(labels.size());
}

template <typename T>
AdamW<T>::AdamW(std::vector<ParameterInfo> table, std::size_t parameter_count,
                AdamWConfig config)
    : table_(std::move(table)),
      config_(config),
      m_(parameter_count, T(0)),
      v_(parameter_count, T(0)) {}

template <typename T>
void AdamW<T>::step(std::span<T> parameters, std::span<const T> gradients) {
  if (parameters.size() != m_.size() || gradients.size() != m_.size()) {
    throw TrainingError("optimizer state does not match the parameter buffer");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  kernels::AdamWStep<T> s{};
  s.lr = static_cast<T>(config_.learning_rate);
  s.beta1 = static_cast<T>(config_.beta1);
  s.beta2 = static_cast<T>(config_.beta2);
  s.eps = static_cast<T>(config_.eps);
  s.step_size = static_cast<T>(config_.learning_rate / bc1);
  s.bias_correction2_sqrt = static_cast<T>(std::sqrt(bc2));
  const auto& k = kernels::active<T>();
  for (const auto& p : table_) {
    s.weight_decay = p.decay ? static_cast<T>(config_.weight_decay) : T(0);
    k.adamw(p.size, parameters.data() + p.offset, gradients.data() + p.offset,
            m_.data() + p.offset, v_.data() + p.offset, s);
  }
}

template class AdamW<float>;
template class AdamW<double>;

template <typename T>
double loss_and_gradient(RegressionModel<T>& model, const PaddedBatch& batch,
                         std::span<const double> labels, std::mt19937_64& rng) {
  ForwardState<T> state;
  const auto out = model.forward_train(batch, rng, state);
  std::vector<double> preds(out.begin(), out.end());
  const double loss = mse_loss(preds, labels);
  std::vector<T> d_out(out.size());
  const double scale = 2.0 / static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    d_out[i] = static_cast<T>(scale * (preds[i] - labels[i]));
  }
  model.backward(state, d_out);
  return loss;
}

template double loss_and_gradient(RegressionModel<float>&, const PaddedBatch&,
                                  std::span<const double>, std::mt19937_64&);
template double loss_and_gradient(RegressionModel<double>&, const PaddedBatch&,
                                  std::span<const double>, std::mt19937_64&);

std::size_t select_epoch(std::span<const EpochRecord> epochs) {
  if (epochs.empty()) throw TrainingError("no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    const auto& cand = epochs[i].dev_spearman;
    const auto& cur = epochs[best].dev_spearman;
    if (cand && (!cur || *cand > *cur)) best = i;
  }
  return best + 1;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
void evaluate_dev(const RegressionModel<T>& model, const Tokenizer& tokenizer,
                  const PairDataset& dev_set, const TrainingConfig& config,
                  EpochRecord& rec) {
  const auto preds =
      predict(model, tokenizer, dev_set.pairs(), config.max_tokens, config.batch_size);
  const metrics::PredictionSet ps(dev_set.scores(), preds);
  rec.dev_mse = metrics::mse(ps);
  try {
    rec.dev_spearman = metrics::spearman(ps);
  } catch (const MetricError&) {
    rec.dev_spearman.reset();
  }
}

void require_training_set(const PairDataset& ds, const char* what) {
  if (ds.empty()) throw ValidationError(std::string(what) + " set is empty");
  if (!ds.labeled()) throw ValidationError(std::string(what) + " set is unlabeled");
}

}  // namespace

template <typename T>
TrainingLog train(RegressionModel<T>& model, const Tokenizer& tokenizer,
                  const PairDataset& train_set, const PairDataset& dev_set,
                  const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require_training_set(train_set, "train");
  require_training_set(dev_set, "dev");
  if (config.max_tokens > model.config().max_sequence_length()) {
    throw ConfigError("max_tokens " + std::to_string(config.max_tokens) +
                      " exceeds the model's maximum sequence length " +
                      std::to_string(model.config().max_sequence_length()));
  }
  model.set_dropout(config.dropout_rate, config.dropout_rate);

  std::vector<TokenizedInput> inputs;
  inputs.reserve(train_set.size());
  for (const auto& p : train_set) {
    inputs.push_back(tokenize(tokenizer, p, config.max_tokens));
  }
  const auto labels = train_set.scores();

  std::seed_seq shuffle_seed{config.seed, std::uint64_t{1}};
  std::seed_seq dropout_seed{config.seed, std::uint64_t{2}};
  std::mt19937_64 shuffle_rng(shuffle_seed);
  std::mt19937_64 dropout_rng(dropout_seed);

  AdamWConfig opt_cfg;
  opt_cfg.learning_rate = config.learning_rate;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW<T> optimizer(model.parameter_table(), model.parameters().size(), opt_cfg);

  TrainingLog log;
  const auto start = Clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };

  evaluate_dev(model, tokenizer, dev_set, config, log.baseline);
  log.baseline.wall_seconds = elapsed();
  if (on_epoch) on_epoch(log.baseline);

  std::vector<T> best(model.parameters().begin(), model.parameters().end());
  std::optional<double> best_spearman;
  std::vector<std::size_t> order(inputs.size());
  std::vector<TokenizedInput> chunk;
  std::vector<double> chunk_labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start_i = 0; start_i < order.size(); start_i += config.batch_size) {
      const std::size_t end_i = std::min(order.size(), start_i + config.batch_size);
      chunk.clear();
      chunk_labels.clear();
      for (std::size_t i = start_i; i < end_i; ++i) {
        chunk.push_back(inputs[order[i]]);
        chunk_labels.push_back(labels[order[i]]);
      }
      const auto batch = pad_batch(chunk, model.config().pad_token_id);
      model.zero_grad();
      const double loss = loss_and_gradient(model, batch, chunk_labels, dropout_rng);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(optimizer.steps() + 1));
      }
      loss_sum += loss * static_cast<double>(chunk.size());
      optimizer.step(model.parameters(), model.gradients());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = optimizer.steps();
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    evaluate_dev(model, tokenizer, dev_set, config, rec);
    rec.wall_seconds = elapsed();
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    // Same rule as select_epoch().
    const bool better = epoch == 1 || (rec.dev_spearman && (!best_spearman ||
                                                            *rec.dev_spearman > *best_spearman));
    if (better) {
      std::copy(model.parameters().begin(), model.parameters().end(), best.begin());
      best_spearman = rec.dev_spearman;
    }
  }

  log.selected_epoch = select_epoch(log.epochs);
  std::copy(best.begin(), best.end(), model.parameters().begin());
  model.zero_grad();
  return log;
}

template TrainingLog train(RegressionModel<float>&, const Tokenizer&, const PairDataset&,
                           const PairDataset&, const TrainingConfig&, const EpochCallback&);
template TrainingLog train(RegressionModel<double>&, const Tokenizer&, const PairDataset&,
                           const PairDataset&, const TrainingConfig&, const EpochCallback&);

namespace {

nlohmann::json record_json(const char* kind, const EpochRecord& r, bool wall) {
  nlohmann::json j;
  j["record"] = kind;
  j["epoch"] = r.epoch;
  j["steps"] = r.steps;
  j["train_loss"] = r.train_loss ? nlohmann::json(*r.train_loss) : nlohmann::json();
  j["dev_spearman"] = r.dev_spearman ? nlohmann::json(*r.dev_spearman) : nlohmann::json();
  j["dev_mse"] = r.dev_mse;
  if (wall) j["wall_seconds"] = r.wall_seconds;
  return j;
}

EpochRecord record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.steps = j.at("steps").get<std::size_t>();
  if (!j.at("train_loss").is_null()) r.train_loss = j.at("train_loss").get<double>();
  if (!j.at("dev_spearman").is_null()) r.dev_spearman = j.at("dev_spearman").get<double>();
  r.dev_mse = j.at("dev_mse").get<double>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

}  // namespace

std::string serialize_training_log(const TrainingLog& log, bool include_wall_time) {
  std::string out = record_json("baseline", log.baseline, include_wall_time).dump() + "\n";
  for (const auto& r : log.epochs) {
    out += record_json("epoch", r, include_wall_time).dump() + "\n";
  }
  nlohmann::json sel{{"record", "selection"}, {"selected_epoch", log.selected_epoch}};
  out += sel.dump() + "\n";
  return out;
}

TrainingLog parse_training_log(std::string_view text) {
  TrainingLog log;
  bool have_selection = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                     : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto kind = j.at("record").get<std::string>();
      if (kind == "baseline") {
        log.baseline = record_from_json(j);
      } else if (kind == "epoch") {
        log.epochs.push_back(record_from_json(j));
      } else if (kind == "selection") {
        log.selected_epoch = j.at("selected_epoch").get<std::size_t>();
        have_selection = true;
      } else {
        throw ParseError(line_no, "unknown record type '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_selection) throw ParseError(line_no, "training log has no selection record");
  return log;
}

}  // namespace strel
