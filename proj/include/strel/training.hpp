#pragma once

// Fine-tuning loop: MSE loss, AdamW, per-epoch dev evaluation and selection
// of the epoch with the best dev Spearman correlation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "strel/data.hpp"
#include "strel/encoder.hpp"
#include "strel/kernels.hpp"
#include "strel/tokenizer.hpp"

namespace strel {

// Defaults are the tuned values. Reasonable search ranges: learning_rate
// 1e-5 to 3e-5, dropout 0.1 to 0.3, batch_size 4 to 32, max_tokens 32 to 128.
struct TrainingConfig {
  double learning_rate = 3e-5;
  double dropout_rate = 0.1;
  std::size_t batch_size = 16;
  std::size_t max_tokens = 128;
  double weight_decay = 0.01;
  std::size_t epochs = 4;
  std::uint64_t seed = 42;

  // Throws ConfigError. A learning rate of exactly 0 is accepted (it freezes
  // the weights, which is handy for baselines).
  void validate() const;

  bool operator==(const TrainingConfig&) const = default;
};

// (1/N) sum (y - y_hat)^2. Throws ValidationError for N = 0 or a length
// mismatch.
double mse_loss(std::span<const double> predictions, std::span<const double> labels);

struct AdamWConfig {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay and a constant learning rate. Decay is
// skipped for parameters whose table entry has decay = false.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<ParameterInfo> table, std::size_t parameter_count,
        AdamWConfig config);

  void step(std::span<T> parameters, std::span<const T> gradients);
  std::size_t steps() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return config_; }

 private:
  std::vector<ParameterInfo> table_;
  AdamWConfig config_;
  std::vector<T> m_, v_;
  std::size_t steps_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

// Mean squared error of one batch; gradients are accumulated into the model
// (call zero_grad() first). Dropout follows the model's configured rates.
template <typename T>
double loss_and_gradient(RegressionModel<T>& model, const PaddedBatch& batch,
                         std::span<const double> labels, std::mt19937_64& rng);

struct EpochRecord {
  std::size_t epoch = 0;  // 0: evaluation before any update
  std::size_t steps = 0;  // optimizer steps so far
  std::optional<double> train_loss;
  // Empty when undefined (constant predictions or labels).
  std::optional<double> dev_spearman;
  double dev_mse = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingLog {
  EpochRecord baseline;
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;

  const EpochRecord& selected() const { return epochs.at(selected_epoch - 1); }
};

// Index (1-based) of the epoch with the highest dev Spearman; undefined
// values rank lowest and ties go to the earliest epoch.
std::size_t select_epoch(std::span<const EpochRecord> epochs);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains in place and leaves the model holding the selected epoch's weights.
// Throws ValidationError for empty or unlabeled sets and TrainingError on a
// non-finite loss.
template <typename T>
TrainingLog train(RegressionModel<T>& model, const Tokenizer& tokenizer,
                  const PairDataset& train_set, const PairDataset& dev_set,
                  const TrainingConfig& config, const EpochCallback& on_epoch = {});

// One JSON object per line: the baseline, each epoch, then the selection.
// Wall time is left out when include_wall_time is false, which makes logs of
// identical runs byte-identical.
std::string serialize_training_log(const TrainingLog& log, bool include_wall_time = true);
TrainingLog parse_training_log(std::string_view text);

}  // namespace strel
