#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "notecoder/labels.hpp"

namespace notecoder {

// Elementwise max across chunk score vectors: the note-level prediction.
std::vector<float> aggregate_chunks(const std::vector<std::vector<float>>& chunk_scores);

// Mann-Whitney rank AUC with midrank tie handling. Requires at least one
// positive and one negative label.
double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels);

// Note-level predictions against binary targets over a label space.
struct PredictionSet {
  std::vector<std::string> note_ids;
  std::vector<std::vector<float>> scores;   // [notes][M]
  std::vector<std::vector<float>> targets;  // [notes][M], entries 0/1
  int32_t num_labels = 0;
};

struct PerLabelAuc {
  std::string code;
  double auc = 0;
  int64_t positives = 0;
};

struct EvalReport {
  double micro_auc = 0;
  double macro_auc = 0;
  std::vector<PerLabelAuc> per_label;                 // included labels only
  std::vector<std::pair<std::string, std::string>> excluded;  // code -> reason
  std::vector<int64_t> histogram;                     // right-closed bins over [0,1]
  double hist_bin_width = 0.02;
  double high_auc_threshold = 0.98;
  int64_t high_auc_count = 0;
};

double micro_auc(const PredictionSet& preds);

// Unweighted mean of per-label AUCs over labels with both classes present;
// single-class labels are excluded and reported.
double macro_auc(const PredictionSet& preds, const LabelSpace& space,
                 std::vector<PerLabelAuc>* per_label = nullptr,
                 std::vector<std::pair<std::string, std::string>>* excluded = nullptr);

EvalReport evaluate(const PredictionSet& preds, const LabelSpace& space,
                    double hist_bin_width = 0.02, double high_auc_threshold = 0.98);

// Macro AUC restricted to labels with train_count < max_train_count.
double low_frequency_slice(const EvalReport& report, const LabelSpace& space,
                           int64_t max_train_count);

// Right-closed bins; bin i covers (i*w, (i+1)*w] with 0 landing in bin 0.
std::vector<int64_t> auc_histogram(const std::vector<PerLabelAuc>& per_label, double bin_width);

void write_report_json(std::ostream& os, const EvalReport& r);
void write_per_label_csv(std::ostream& os, const EvalReport& r);   // code,count,auc
void write_histogram_csv(std::ostream& os, const EvalReport& r);   // bin_low,bin_high,count

}  // namespace notecoder
