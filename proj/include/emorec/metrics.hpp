#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "emorec/corpus.hpp"
#include "emorec/views.hpp"

namespace emorec {

// Unweighted accuracy = macro-average of per-class recall; plain accuracy is
// computed alongside for transparency.
struct EvalResult {
  double ua = 0.0;
  double plain_accuracy = 0.0;
  std::array<std::array<long, kNumClasses>, kNumClasses> confusion{};  // [truth][pred]
  std::array<double, kNumClasses> per_class_recall{};
  std::array<bool, kNumClasses> class_present{};
};

EvalResult unweighted_accuracy(const std::vector<Emotion>& labels,
                               const std::vector<Emotion>& predictions);

struct FoldScores {
  int fold_id = 0;
  EvalResult dev;
  std::optional<EvalResult> test;
};

struct CrossFoldSummary {
  double mean_dev_ua = 0.0;
  std::optional<double> mean_test_ua;
  std::string table_tsv;  // one row per fold plus a mean row
};

CrossFoldSummary cross_fold_summary(const std::vector<FoldScores>& per_fold);

// Per-word gate/attention report for one utterance of a GMU/attention view
// (H-MM-2/3/4). The text lists one row per word; the SVG draws acoustic and
// lexical gate bars over each token with attention shading behind it.
struct AttentionReport {
  std::string text;
  std::string svg;
};

AttentionReport attention_report(const UtteranceRecord& u, const ViewOutput& out,
                                 std::size_t item_index, ViewKind kind);

std::string confusion_text(const EvalResult& result);
std::string confusion_svg(const EvalResult& result);
// Writes <path_base>.txt and <path_base>.svg.
void confusion_render(const EvalResult& result, const std::string& path_base);

}  // namespace emorec
