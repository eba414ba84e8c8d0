#include "strel/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "strel/csv.hpp"
#include "strel/error.hpp"

namespace strel::report {
namespace {

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Fixed precision for drawing coordinates.
std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line, const char* column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(line, std::string("bad ") + column + " value '" + s + "'");
  }
  return v;
}

std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, std::string_view s, std::string_view anchor = "middle") {
  return "<text x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" text-anchor=\"" +
         std::string(anchor) + "\">" + escape_xml(s) + "</text>\n";
}

constexpr const char* kBandLabels[metrics::kBins] = {"0.0-0.2", "0.2-0.4", "0.4-0.6",
                                                     "0.6-0.8", "0.8-1.0"};

}  // namespace

std::vector<PredictionRow> make_rows(const PairDataset& dataset,
                                     std::span<const double> predictions) {
  if (predictions.size() != dataset.size()) {
    throw ValidationError("prediction count does not match the dataset");
  }
  std::vector<PredictionRow> rows;
  rows.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    rows.push_back({dataset[i].pair_id, dataset[i].score, predictions[i]});
  }
  return rows;
}

std::string serialize_predictions(std::span<const PredictionRow> rows) {
  std::string out = "pair_id,label,prediction\n";
  for (const auto& r : rows) {
    csv::append_field(out, r.pair_id, false);
    out += ',';
    if (r.label) out += num(*r.label);
    out += ',';
    out += num(r.prediction);
    out += '\n';
  }
  return out;
}

std::vector<PredictionRow> parse_predictions(std::string_view csv_text) {
  csv::Reader reader(csv_text);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ValidationError("predictions file is empty");
  auto column = [&](const char* name) {
    auto it = std::find(fields.begin(), fields.end(), name);
    if (it == fields.end()) {
      throw ValidationError(std::string("predictions file lacks a '") + name + "' column");
    }
    return static_cast<std::size_t>(it - fields.begin());
  };
  const auto id_col = column("pair_id");
  const auto label_col = column("label");
  const auto pred_col = column("prediction");
  const auto width = fields.size();

  std::vector<PredictionRow> rows;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    const auto line = reader.record_line();
    if (fields.size() != width) {
      throw ParseError(line, "expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()));
    }
    PredictionRow r;
    r.pair_id = fields[id_col];
    if (!fields[label_col].empty()) r.label = parse_number(fields[label_col], line, "label");
    r.prediction = parse_number(fields[pred_col], line, "prediction");
    rows.push_back(std::move(r));
  }
  return rows;
}

metrics::PredictionSet to_prediction_set(std::span<const PredictionRow> rows) {
  std::vector<double> labels, preds;
  for (const auto& r : rows) {
    if (!r.label) throw ValidationError("pair " + r.pair_id + " has no label");
    labels.push_back(*r.label);
    preds.push_back(r.prediction);
  }
  return metrics::PredictionSet(std::move(labels), std::move(preds));
}

std::string scatter_csv(std::span<const PredictionRow> rows) {
  std::string out = "label,prediction\n";
  for (const auto& r : rows) {
    if (!r.label) throw ValidationError("pair " + r.pair_id + " has no label");
    out += num(*r.label) + "," + num(r.prediction) + "\n";
  }
  return out;
}

std::string scatter_svg(std::span<const PredictionRow> rows, std::string_view title) {
  constexpr double kLeft = 60, kTop = 40, kSize = 400;
  std::string s = svg_open(500, 500);
  s += text(kLeft + kSize / 2, 24, title);
  s += "<rect x=\"60\" y=\"40\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<line x1=\"60\" y1=\"440\" x2=\"460\" y2=\"40\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    s += text(kLeft + v * kSize, kTop + kSize + 16, num(v));
    s += text(kLeft - 6, kTop + kSize - v * kSize + 4, num(v), "end");
  }
  s += text(kLeft + kSize / 2, 490, "label");
  s += "<text x=\"16\" y=\"240\" text-anchor=\"middle\" transform=\"rotate(-90 16 240)\">"
       "prediction</text>\n";
  for (const auto& r : rows) {
    if (!r.label) throw ValidationError("pair " + r.pair_id + " has no label");
    const double x = kLeft + std::clamp(*r.label, 0.0, 1.0) * kSize;
    const double y = kTop + kSize - std::clamp(r.prediction, 0.0, 1.0) * kSize;
    s += "<circle cx=\"" + coord(x) + "\" cy=\"" + coord(y) +
         "\" r=\"2.5\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
  }
  return s + "</svg>\n";
}

std::string confusion_grid(const metrics::ConfusionMatrix& m) {
  std::size_t width = 7;
  for (const auto& row : m) {
    for (auto v : row) width = std::max(width, std::to_string(v).size());
  }
  auto pad = [&](const std::string& v) { return std::string(width - v.size() + 1, ' ') + v; };
  std::string out = "true\\pred";
  for (const auto* l : kBandLabels) out += pad(l);
  out += '\n';
  for (std::size_t r = 0; r < metrics::kBins; ++r) {
    out += std::string(kBandLabels[r]) + "  ";
    for (auto v : m[r]) out += pad(std::to_string(v));
    out += '\n';
  }
  return out;
}

std::string confusion_svg(const metrics::ConfusionMatrix& m, std::string_view title) {
  constexpr double kLeft = 90, kTop = 50, kCell = 70;
  std::size_t peak = 0;
  for (const auto& row : m) {
    for (auto v : row) peak = std::max(peak, v);
  }
  std::string s = svg_open(480, 480);
  s += text(kLeft + 2.5 * kCell, 24, title);
  for (std::size_t r = 0; r < metrics::kBins; ++r) {
    s += text(kLeft - 8, kTop + (r + 0.5) * kCell + 4, kBandLabels[r], "end");
    s += text(kLeft + (r + 0.5) * kCell, kTop + 5 * kCell + 18, kBandLabels[r]);
    for (std::size_t c = 0; c < metrics::kBins; ++c) {
      const double share = peak ? static_cast<double>(m[r][c]) / static_cast<double>(peak) : 0.0;
      const int shade = static_cast<int>(255.0 - 200.0 * share);
      s += "<rect x=\"" + coord(kLeft + c * kCell) + "\" y=\"" + coord(kTop + r * kCell) +
           "\" width=\"70\" height=\"70\" fill=\"rgb(" + std::to_string(shade) + "," +
           std::to_string(shade) + ",255)\" stroke=\"white\"/>\n";
      s += text(kLeft + (c + 0.5) * kCell, kTop + (r + 0.5) * kCell + 4, std::to_string(m[r][c]));
    }
  }
  s += text(kLeft + 2.5 * kCell, 470, "predicted band");
  s += "<text x=\"14\" y=\"225\" text-anchor=\"middle\" transform=\"rotate(-90 14 225)\">"
       "true band</text>\n";
  return s + "</svg>\n";
}

Histograms histograms(std::span<const PredictionRow> rows) {
  std::vector<double> labels, preds;
  for (const auto& r : rows) {
    if (!r.label) throw ValidationError("pair " + r.pair_id + " has no label");
    labels.push_back(*r.label);
    preds.push_back(std::clamp(r.prediction, 0.0, 1.0));
  }
  return {score_histogram(labels), score_histogram(preds)};
}

std::string histogram_csv(const Histograms& h) {
  std::string out = "bin_lower,bin_upper,label_count,prediction_count\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    out += num(b / 10.0) + "," + num((b + 1) / 10.0) + "," + std::to_string(h.labels[b]) + "," +
           std::to_string(h.predictions[b]) + "\n";
  }
  return out;
}

std::string histogram_svg(const Histograms& h, std::string_view title) {
  constexpr double kLeft = 60, kTop = 40, kWidth = 500, kHeight = 300;
  std::size_t peak = 1;
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    peak = std::max({peak, h.labels[b], h.predictions[b]});
  }
  const double slot = kWidth / kHistogramBins;
  std::string s = svg_open(600, 400);
  s += text(kLeft + kWidth / 2, 24, title);
  s += "<line x1=\"60\" y1=\"340\" x2=\"560\" y2=\"340\" stroke=\"black\"/>\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    const double x = kLeft + b * slot;
    const double hl = kHeight * static_cast<double>(h.labels[b]) / static_cast<double>(peak);
    const double hp = kHeight * static_cast<double>(h.predictions[b]) / static_cast<double>(peak);
    s += "<rect x=\"" + coord(x + 4) + "\" y=\"" + coord(kTop + kHeight - hl) +
         "\" width=\"" + coord(slot / 2 - 4) + "\" height=\"" + coord(hl) +
         "\" fill=\"#1f77b4\"/>\n";
    s += "<rect x=\"" + coord(x + slot / 2) + "\" y=\"" + coord(kTop + kHeight - hp) +
         "\" width=\"" + coord(slot / 2 - 4) + "\" height=\"" + coord(hp) +
         "\" fill=\"#ff7f0e\"/>\n";
    s += text(x, kTop + kHeight + 16, num(b / 10.0));
  }
  s += text(kLeft + kWidth, kTop + kHeight + 16, "1");
  s += "<rect x=\"440\" y=\"50\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>\n";
  s += text(456, 60, "labels", "start");
  s += "<rect x=\"440\" y=\"66\" width=\"10\" height=\"10\" fill=\"#ff7f0e\"/>\n";
  s += text(456, 76, "predictions", "start");
  return s + "</svg>\n";
}

std::vector<std::filesystem::path> write_plots(const std::filesystem::path& dir,
                                               std::span<const PredictionRow> rows,
                                               std::string_view title) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto ps = to_prediction_set(rows);
  std::vector<double> clamped(ps.predictions().begin(), ps.predictions().end());
  for (auto& p : clamped) p = std::clamp(p, 0.0, 1.0);
  const auto confusion = metrics::confusion_matrix(
      metrics::PredictionSet({ps.labels().begin(), ps.labels().end()}, clamped));
  const auto hist = histograms(rows);

  const std::vector<std::pair<std::string, std::string>> files{
      {"scatter.csv", scatter_csv(rows)},
      {"scatter.svg", scatter_svg(rows, title)},
      {"confusion.txt", confusion_grid(confusion)},
      {"confusion.svg", confusion_svg(confusion, title)},
      {"histogram.csv", histogram_csv(hist)},
      {"histogram.svg", histogram_svg(hist, title)}};
  std::vector<std::filesystem::path> written;
  for (const auto& [name, body] : files) {
    write_text_file(dir / name, body);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace strel::report
