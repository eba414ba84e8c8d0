#include "strel/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "strel/error.hpp"

namespace strel::metrics {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void require_nonempty(const PredictionSet& ps) {
  if (ps.size() == 0) throw MetricError("empty prediction set");
}

bool is_constant(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

double mean_of(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

PredictionSet::PredictionSet(std::vector<double> labels,
                             std::vector<double> predictions)
    : labels_(std::move(labels)), predictions_(std::move(predictions)) {
  if (labels_.size() != predictions_.size()) {
    throw MetricError("labels and predictions differ in length (" +
                      std::to_string(labels_.size()) + " vs " +
                      std::to_string(predictions_.size()) + ")");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!std::isfinite(labels_[i]) || !std::isfinite(predictions_[i])) {
      throw MetricError("non-finite value at index " + std::to_string(i));
    }
  }
}

double mse(const PredictionSet& ps) {
  require_nonempty(ps);
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double d = ps.labels()[i] - ps.predictions()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(ps.size());
}

double mae(const PredictionSet& ps) {
  require_nonempty(ps);
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    sum += std::abs(ps.labels()[i] - ps.predictions()[i]);
  }
  return sum / static_cast<double>(ps.size());
}

double r_squared(const PredictionSet& ps) {
  if (ps.size() < 2) throw MetricError("r_squared needs at least 2 points");
  if (is_constant(ps.labels())) {
    throw MetricError("r_squared is undefined for constant labels");
  }
  const double mean = mean_of(ps.labels());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double r = ps.labels()[i] - ps.predictions()[i];
    const double t = ps.labels()[i] - mean;
    ss_res += r * r;
    ss_tot += t * t;
  }
  return 1.0 - ss_res / ss_tot;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw MetricError("pearson: length mismatch");
  if (x.size() < 2) throw MetricError("correlation needs at least 2 points");
  if (is_constant(x) || is_constant(y)) {
    throw MetricError("correlation is undefined for a constant sequence");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw MetricError("correlation is undefined for a constant sequence");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const PredictionSet& ps) {
  return pearson(ps.labels(), ps.predictions());
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j; ties share their mean.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(const PredictionSet& ps) {
  if (ps.size() < 2) throw MetricError("correlation needs at least 2 points");
  const auto rx = fractional_ranks(ps.labels());
  const auto ry = fractional_ranks(ps.predictions());
  return pearson(rx, ry);
}

std::size_t discretize(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw MetricError("score " + format_double(score) +
                      " outside [0, 1] cannot be discretized");
  }
  // Edges are compared directly so that e.g. 0.6 lands in [0.6, 0.8).
  std::size_t bin = 0;
  while (bin + 1 < kBins && score >= static_cast<double>(bin + 1) / 5.0) ++bin;
  return bin;
}

ConfusionMatrix confusion_matrix(const PredictionSet& ps) {
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ++m[discretize(ps.labels()[i])][discretize(ps.predictions()[i])];
  }
  return m;
}

EvaluationReport evaluate(const PredictionSet& ps) {
  auto named = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const MetricError& e) {
      throw MetricError(std::string(name) + ": " + e.what());
    }
  };
  EvaluationReport r;
  r.n = ps.size();
  r.mse = named("mse", [&] { return mse(ps); });
  r.mae = named("mae", [&] { return mae(ps); });
  r.r_squared = named("r_squared", [&] { return r_squared(ps); });
  r.pearson = named("pearson", [&] { return pearson(ps); });
  r.spearman = named("spearman", [&] { return spearman(ps); });
  r.confusion = named("confusion", [&] { return confusion_matrix(ps); });
  return r;
}

std::string serialize_report(const EvaluationReport& report) {
  std::string out = "format strel-eval-report/1\n";
  out += "n " + std::to_string(report.n) + "\n";
  out += "mse " + format_double(report.mse) + "\n";
  out += "mae " + format_double(report.mae) + "\n";
  out += "r_squared " + format_double(report.r_squared) + "\n";
  out += "pearson " + format_double(report.pearson) + "\n";
  out += "spearman " + format_double(report.spearman) + "\n";
  out += "confusion_bins 0.0-0.2 0.2-0.4 0.4-0.6 0.6-0.8 0.8-1.0\n";
  for (std::size_t r = 0; r < kBins; ++r) {
    out += "confusion_row_" + std::to_string(r);
    for (std::size_t c = 0; c < kBins; ++c) {
      out += " " + std::to_string(report.confusion[r][c]);
    }
    out += "\n";
  }
  return out;
}

EvaluationReport parse_report(std::string_view text) {
  std::map<std::string, std::string> fields;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      throw MetricError("malformed report line '" + line + "'");
    }
    fields[line.substr(0, space)] = line.substr(space + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw MetricError("report lacks '" + key + "'");
    return it->second;
  };
  auto number = [&](const std::string& key) {
    const std::string& s = get(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw MetricError("report field '" + key + "' is not a number");
    }
    return v;
  };
  if (get("format") != "strel-eval-report/1") {
    throw MetricError("unsupported report format '" + get("format") + "'");
  }
  EvaluationReport r;
  r.n = static_cast<std::size_t>(number("n"));
  r.mse = number("mse");
  r.mae = number("mae");
  r.r_squared = number("r_squared");
  r.pearson = number("pearson");
  r.spearman = number("spearman");
  for (std::size_t row = 0; row < kBins; ++row) {
    std::istringstream cells(get("confusion_row_" + std::to_string(row)));
    for (std::size_t c = 0; c < kBins; ++c) {
      if (!(cells >> r.confusion[row][c])) {
        throw MetricError("confusion row " + std::to_string(row) + " is malformed");
      }
    }
  }
  return r;
}

}  // namespace strel::metrics
