#include "notecoder/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "notecoder/errors.hpp"

namespace notecoder {

std::vector<float> aggregate_chunks(const std::vector<std::vector<float>>& chunk_scores) {
  if (chunk_scores.empty()) throw DataError("aggregate_chunks: no chunks");
  std::vector<float> out = chunk_scores[0];
  for (size_t c = 1; c < chunk_scores.size(); ++c) {
    if (chunk_scores[c].size() != out.size())
      throw DataError("aggregate_chunks: inconsistent score lengths");
    for (size_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], chunk_scores[c][j]);
  }
  return out;
}

double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("auc_binary size mismatch");
  const int64_t n = static_cast<int64_t>(scores.size());
  int64_t pos = 0;
  for (int l : labels) pos += l ? 1 : 0;
  const int64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw DataError("undefined AUC");

  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int64_t a, int64_t b) { return scores[a] < scores[b]; });

  // midranks over tie groups; rank sum of positives
  double rank_sum_pos = 0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (int64_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  return (rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

double micro_auc(const PredictionSet& preds) {
  std::vector<double> s;
  std::vector<int> y;
  s.reserve(preds.scores.size() * preds.num_labels);
  y.reserve(s.capacity());
  for (size_t i = 0; i < preds.scores.size(); ++i)
    for (int32_t j = 0; j < preds.num_labels; ++j) {
      s.push_back(preds.scores[i][j]);
      y.push_back(preds.targets[i][j] > 0.5f ? 1 : 0);
    }
  return auc_binary(s, y);
}

double macro_auc(const PredictionSet& preds, const LabelSpace& space,
                 std::vector<PerLabelAuc>* per_label,
                 std::vector<std::pair<std::string, std::string>>* excluded) {
  if (space.size() != preds.num_labels) throw DataError("label space size mismatch");
  double sum = 0;
  int64_t included = 0;
  for (int32_t j = 0; j < preds.num_labels; ++j) {
    std::vector<double> s(preds.scores.size());
    std::vector<int> y(preds.scores.size());
    int64_t pos = 0;
    for (size_t i = 0; i < preds.scores.size(); ++i) {
      s[i] = preds.scores[i][j];
      y[i] = preds.targets[i][j] > 0.5f ? 1 : 0;
      pos += y[i];
    }
    const int64_t neg = static_cast<int64_t>(y.size()) - pos;
    if (pos == 0 || neg == 0) {
      if (excluded)
        excluded->emplace_back(space.codes[j], pos == 0 ? "no positives" : "no negatives");
      continue;
    }
    const double a = auc_binary(s, y);
    if (per_label) per_label->push_back({space.codes[j], a, pos});
    sum += a;
    ++included;
  }
  if (included == 0) throw DataError("macro AUC undefined: no label has both classes");
  return sum / static_cast<double>(included);
}

std::vector<int64_t> auc_histogram(const std::vector<PerLabelAuc>& per_label, double bin_width) {
  if (bin_width <= 0 || bin_width > 1) throw DataError("bin width must be in (0,1]");
  const int64_t bins = static_cast<int64_t>(std::ceil(1.0 / bin_width - 1e-12));
  std::vector<int64_t> hist(bins, 0);
  for (const auto& pl : per_label) {
    // right-closed bins (lo, hi]; AUC 0 counts in the first bin
    int64_t b = static_cast<int64_t>(std::ceil(pl.auc / bin_width - 1e-12)) - 1;
    b = std::clamp<int64_t>(b, 0, bins - 1);
    ++hist[b];
  }
  return hist;
}

EvalReport evaluate(const PredictionSet& preds, const LabelSpace& space, double hist_bin_width,
                    double high_auc_threshold) {
  EvalReport r;
  r.hist_bin_width = hist_bin_width;
  r.high_auc_threshold = high_auc_threshold;
  r.micro_auc = micro_auc(preds);
  r.macro_auc = macro_auc(preds, space, &r.per_label, &r.excluded);
  r.histogram = auc_histogram(r.per_label, hist_bin_width);
  for (const auto& pl : r.per_label)
    if (pl.auc >= high_auc_threshold) ++r.high_auc_count;
  return r;
}

double low_frequency_slice(const EvalReport& report, const LabelSpace& space,
                           int64_t max_train_count) {
  double sum = 0;
  int64_t n = 0;
  for (const auto& pl : report.per_label) {
    const int32_t j = space.index_of(pl.code);
    if (j < 0) throw DataError("per-label code missing from space: " + pl.code);
    if (space.train_counts[j] < max_train_count) {
      sum += pl.auc;
      ++n;
    }
  }
  if (n == 0) throw DataError("low-frequency slice is empty");
  return sum / static_cast<double>(n);
}

void write_report_json(std::ostream& os, const EvalReport& r) {
  nlohmann::ordered_json j;
  j["micro_auc"] = r.micro_auc;
  j["macro_auc"] = r.macro_auc;
  j["included_labels"] = r.per_label.size();
  j["high_auc_threshold"] = r.high_auc_threshold;
  j["high_auc_count"] = r.high_auc_count;
  auto& per = j["per_label"] = nlohmann::ordered_json::array();
  for (const auto& pl : r.per_label)
    per.push_back({{"code", pl.code}, {"count", pl.positives}, {"auc", pl.auc}});
  auto& ex = j["excluded"] = nlohmann::ordered_json::array();
  for (const auto& [code, reason] : r.excluded)
    ex.push_back({{"code", code}, {"reason", reason}});
  j["histogram_bin_width"] = r.hist_bin_width;
  j["histogram"] = r.histogram;
  os << j.dump(2) << '\n';
}

void write_per_label_csv(std::ostream& os, const EvalReport& r) {
  os << "code,count,auc\n";
  for (const auto& pl : r.per_label)
    os << pl.code << ',' << pl.positives << ',' << pl.auc << '\n';
}

void write_histogram_csv(std::ostream& os, const EvalReport& r) {
  os << "bin_low,bin_high,count\n";
  for (size_t b = 0; b < r.histogram.size(); ++b) {
    const double lo = static_cast<double>(b) * r.hist_bin_width;
    const double hi = std::min(1.0, static_cast<double>(b + 1) * r.hist_bin_width);
    os << lo << ',' << hi << ',' << r.histogram[b] << '\n';
  }
}

}  // namespace notecoder
