#include "emorec/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace emorec {

namespace {

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

EvalResult unweighted_accuracy(const std::vector<Emotion>& labels,
                               const std::vector<Emotion>& predictions) {
  if (labels.size() != predictions.size())
    throw ContractError("unweighted_accuracy: " + std::to_string(labels.size()) +
                        " labels vs " + std::to_string(predictions.size()) +
                        " predictions");
  if (labels.empty()) throw ContractError("unweighted_accuracy: no samples");

  EvalResult r;
  long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = static_cast<int>(labels[i]);
    const int p = static_cast<int>(predictions[i]);
    r.confusion[t][p]++;
    if (t == p) ++correct;
  }
  r.plain_accuracy = static_cast<double>(correct) / labels.size();

  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    long row_total = 0;
    for (int p = 0; p < kNumClasses; ++p) row_total += r.confusion[c][p];
    if (row_total == 0) {
      warn(std::string("unweighted_accuracy: class '") +
           to_string(static_cast<Emotion>(c)) +
           "' absent from ground truth; excluded from the average");
      r.class_present[c] = false;
      r.per_class_recall[c] = 0.0;
      continue;
    }
    r.class_present[c] = true;
    r.per_class_recall[c] =
        static_cast<double>(r.confusion[c][c]) / static_cast<double>(row_total);
    recall_sum += r.per_class_recall[c];
    ++present;
  }
  r.ua = recall_sum / present;
  return r;
}

CrossFoldSummary cross_fold_summary(const std::vector<FoldScores>& per_fold) {
  if (per_fold.empty()) throw ContractError("cross_fold_summary: no folds");
  CrossFoldSummary s;
  std::ostringstream table;
  table << "fold\tdev_ua\ttest_ua\n";
  double dev_sum = 0.0, test_sum = 0.0;
  int test_count = 0;
  for (const auto& fold : per_fold) {
    dev_sum += fold.dev.ua;
    table << fold.fold_id << "\t" << fmt(fold.dev.ua, 4) << "\t";
    if (fold.test) {
      test_sum += fold.test->ua;
      ++test_count;
      table << fmt(fold.test->ua, 4);
    } else {
      table << "-";
    }
    table << "\n";
  }
  s.mean_dev_ua = dev_sum / static_cast<double>(per_fold.size());
  table << "mean\t" << fmt(s.mean_dev_ua, 4) << "\t";
  if (test_count == static_cast<int>(per_fold.size())) {
    s.mean_test_ua = test_sum / test_count;
    table << fmt(*s.mean_test_ua, 4);
  } else {
    table << "-";
  }
  table << "\n";
  s.table_tsv = table.str();
  return s;
}

AttentionReport attention_report(const UtteranceRecord& u, const ViewOutput& out,
                                 std::size_t item_index, ViewKind kind) {
  if (kind != ViewKind::h_mm_2 && kind != ViewKind::h_mm_3 && kind != ViewKind::h_mm_4)
    throw ConfigError(std::string("attention report: view ") + to_string(kind) +
                      " produces no word-level attention or gate outputs");
  const bool has_gate = out.gate.defined();
  const bool has_attn = out.attn.defined();
  if (!has_gate && !has_attn)
    throw ConfigError(std::string("attention report: view ") + to_string(kind) +
                      " output carries neither gate nor attention weights");
  if (item_index >= out.word_counts.size())
    throw ContractError("attention report: item index out of range");
  const int words = out.word_counts[item_index];
  if (static_cast<int>(u.tokens.size()) != words)
    throw DataError("attention report: record '" + u.id + "' token count " +
                    std::to_string(u.tokens.size()) + " != view word count " +
                    std::to_string(words));

  AttentionReport rep;
  std::ostringstream text;
  text << "# utterance " << u.id << " label " << to_string(u.label) << " view "
       << to_string(kind) << "\n";
  text << "word\ttoken\tgate_acoustic\tgate_lexical\tattention\n";
  for (int w = 0; w < words; ++w) {
    text << w << "\t" << u.tokens[w] << "\t";
    if (has_gate) {
      const double g = out.gate.at(item_index, w);
      text << fmt(g) << "\t" << fmt(1.0 - g) << "\t";
    } else {
      text << "-\t-\t";
    }
    text << (has_attn ? fmt(out.attn.at(item_index, w)) : "-") << "\n";
  }
  rep.text = text.str();

  // One column per word: attention shading behind the token, acoustic (left)
  // and lexical (right) gate bars above it.
  const int col_w = 90, col_h = 110, bar_h = 60, pad = 8;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << words * col_w
      << "\" height=\"" << col_h << "\">\n";
  for (int w = 0; w < words; ++w) {
    const int x0 = w * col_w;
    if (has_attn) {
      svg << "<rect x=\"" << x0 << "\" y=\"0\" width=\"" << col_w << "\" height=\""
          << col_h << "\" fill=\"#444444\" fill-opacity=\""
          << fmt(out.attn.at(item_index, w), 4) << "\"/>\n";
    }
    if (has_gate) {
      const double g = out.gate.at(item_index, w);
      const int a_h = static_cast<int>(std::lround(g * bar_h));
      const int l_h = bar_h - a_h;
      svg << "<rect x=\"" << x0 + pad << "\" y=\"" << pad + (bar_h - a_h)
          << "\" width=\"30\" height=\"" << a_h << "\" fill=\"#3465a4\"/>\n";
      svg << "<rect x=\"" << x0 + pad + 36 << "\" y=\"" << pad + (bar_h - l_h)
          << "\" width=\"30\" height=\"" << l_h << "\" fill=\"#cc0000\"/>\n";
    }
    svg << "<text x=\"" << x0 + col_w / 2 << "\" y=\"" << col_h - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">" << u.tokens[w]
        << "</text>\n";
  }
  svg << "</svg>\n";
  rep.svg = svg.str();
  return rep;
}

std::string confusion_text(const EvalResult& result) {
  std::ostringstream os;
  os << "truth\\pred";
  for (int p = 0; p < kNumClasses; ++p)
    os << "\t" << to_string(static_cast<Emotion>(p));
  os << "\n";
  for (int t = 0; t < kNumClasses; ++t) {
    os << to_string(static_cast<Emotion>(t));
    for (int p = 0; p < kNumClasses; ++p) os << "\t" << result.confusion[t][p];
    if (!result.class_present[t]) os << "\t# absent from ground truth";
    os << "\n";
  }
  os << "ua\t" << fmt(result.ua) << "\n";
  os << "accuracy\t" << fmt(result.plain_accuracy) << "\n";
  return os.str();
}

std::string confusion_svg(const EvalResult& result) {
  const int cell = 70, left = 110, top = 40;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << left + kNumClasses * cell << "\" height=\"" << top + kNumClasses * cell
      << "\">\n";
  for (int p = 0; p < kNumClasses; ++p)
    svg << "<text x=\"" << left + p * cell + cell / 2
        << "\" y=\"24\" text-anchor=\"middle\" font-size=\"12\">"
        << to_string(static_cast<Emotion>(p)) << "</text>\n";
  for (int t = 0; t < kNumClasses; ++t) {
    long row_total = 0;
    for (int p = 0; p < kNumClasses; ++p) row_total += result.confusion[t][p];
    svg << "<text x=\"8\" y=\"" << top + t * cell + cell / 2 + 4
        << "\" font-size=\"12\">" << to_string(static_cast<Emotion>(t)) << "</text>\n";
    for (int p = 0; p < kNumClasses; ++p) {
      const double share =
          row_total == 0
              ? 0.0
              : static_cast<double>(result.confusion[t][p]) / row_total;
      svg << "<rect x=\"" << left + p * cell << "\" y=\"" << top + t * cell
          << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"#204a87\" fill-opacity=\"" << fmt(share, 4)
          << "\" stroke=\"#999999\"/>\n";
      svg << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\""
          << top + t * cell + cell / 2 + 4
          << "\" text-anchor=\"middle\" font-size=\"12\">" << result.confusion[t][p]
          << (row_total == 0 && p == 0 ? " (absent)" : "") << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void confusion_render(const EvalResult& result, const std::string& path_base) {
  std::ofstream txt(path_base + ".txt");
  if (!txt) throw IoError("cannot write '" + path_base + ".txt'");
  txt << confusion_text(result);
  std::ofstream svg(path_base + ".svg");
  if (!svg) throw IoError("cannot write '" + path_base + ".svg'");
  svg << confusion_svg(result);
}

}  // namespace emorec
