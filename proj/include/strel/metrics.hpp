#pragma once

// Regression and correlation metrics for relatedness predictions, plus the
// five-band discretization used for confusion-matrix error analysis.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strel::metrics {

// Paired gold labels and predictions. Throws MetricError on length mismatch
// or non-finite values.
class PredictionSet {
 public:
  PredictionSet(std::vector<double> labels, std::vector<double> predictions);

  std::span<const double> labels() const noexcept { return labels_; }
  std::span<const double> predictions() const noexcept { return predictions_; }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::vector<double> labels_;
  std::vector<double> predictions_;
};

// (1/N) sum (y - y_hat)^2. Throws MetricError when N = 0.
double mse(const PredictionSet& ps);
// (1/N) sum |y - y_hat|. Throws MetricError when N = 0.
double mae(const PredictionSet& ps);
// 1 - SS_res / SS_tot. Throws MetricError for N < 2 or constant labels.
double r_squared(const PredictionSet& ps);
// Throws MetricError for N < 2 or a constant sequence.
double pearson(const PredictionSet& ps);
// Pearson correlation of fractional (tie-averaged) ranks.
double spearman(const PredictionSet& ps);

double pearson(std::span<const double> x, std::span<const double> y);
// 1-based ranks; tied values share the mean of the ranks they occupy.
std::vector<double> fractional_ranks(std::span<const double> values);

inline constexpr std::size_t kBins = 5;
using ConfusionMatrix = std::array<std::array<std::size_t, kBins>, kBins>;

// [0,0.2) [0.2,0.4) [0.4,0.6) [0.6,0.8) [0.8,1.0]. Throws MetricError
// outside [0, 1].
std::size_t discretize(double score);

// Rows: true band, columns: predicted band. Predictions must already be
// clamped to [0, 1].
ConfusionMatrix confusion_matrix(const PredictionSet& ps);

struct EvaluationReport {
  std::size_t n = 0;
  double mse = 0.0;
  double mae = 0.0;
  double r_squared = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
  ConfusionMatrix confusion{};

  bool operator==(const EvaluationReport&) const = default;
};

// All metrics at once; a failing metric's error names it.
EvaluationReport evaluate(const PredictionSet& ps);

// Line-oriented `key value` text; floats in shortest round-trip form.
std::string serialize_report(const EvaluationReport& report);
EvaluationReport parse_report(std::string_view text);

}  // namespace strel::metrics
