#pragma once

// Predictions CSV and plot artifacts: scatter, confusion heatmap, score
// histograms. Every plot is written as a data file next to an SVG so results
// can be checked without comparing images. Output depends only on the input.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strel/data.hpp"
#include "strel/metrics.hpp"

namespace strel::report {

struct PredictionRow {
  std::string pair_id;
  std::optional<double> label;
  double prediction = 0.0;

  bool operator==(const PredictionRow&) const = default;
};

std::vector<PredictionRow> make_rows(const PairDataset& dataset,
                                     std::span<const double> predictions);

// Header `pair_id,label,prediction`; an unlabeled row leaves label empty.
std::string serialize_predictions(std::span<const PredictionRow> rows);
// Columns are found by name, so extra columns are fine. Throws
// ValidationError when a required column is missing.
std::vector<PredictionRow> parse_predictions(std::string_view csv_text);

// Throws ValidationError if any row is unlabeled.
metrics::PredictionSet to_prediction_set(std::span<const PredictionRow> rows);

std::string scatter_csv(std::span<const PredictionRow> rows);
std::string scatter_svg(std::span<const PredictionRow> rows, std::string_view title);

std::string confusion_grid(const metrics::ConfusionMatrix& m);
std::string confusion_svg(const metrics::ConfusionMatrix& m, std::string_view title);

struct Histograms {
  ScoreHistogram labels{};
  ScoreHistogram predictions{};
};
Histograms histograms(std::span<const PredictionRow> rows);
std::string histogram_csv(const Histograms& h);
std::string histogram_svg(const Histograms& h, std::string_view title);

// Writes scatter.csv/.svg, confusion.txt/.svg and histogram.csv/.svg into
// `dir`; returns the paths in that order.
std::vector<std::filesystem::path> write_plots(const std::filesystem::path& dir,
                                               std::span<const PredictionRow> rows,
                                               std::string_view title);

}  // namespace strel::report
