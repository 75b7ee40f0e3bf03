#include "csk/evalx.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace csk::evalx {

namespace {

ClassMetrics finish(std::size_t tp, std::size_t fp, std::size_t fn,
                    std::size_t support) {
  ClassMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.support = support;
  m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

// Macro conventions shared by both reports: unweighted means skip classes
// with zero gold support; the weighted variant uses gold support as weight.
void fill_macros(const std::map<Label, ClassMetrics>& classes, MacroMetrics* macro,
                 MacroMetrics* weighted) {
  std::size_t n = 0;
  double weight_sum = 0.0;
  for (const auto& [label, m] : classes) {
    if (m.support == 0) continue;
    ++n;
    macro->precision += m.precision;
    macro->recall += m.recall;
    macro->f1 += m.f1;
    const auto w = static_cast<double>(m.support);
    weight_sum += w;
    weighted->precision += w * m.precision;
    weighted->recall += w * m.recall;
    weighted->f1 += w * m.f1;
  }
  if (n) {
    macro->precision /= static_cast<double>(n);
    macro->recall /= static_cast<double>(n);
    macro->f1 /= static_cast<double>(n);
  }
  if (weight_sum > 0.0) {
    weighted->precision /= weight_sum;
    weighted->recall /= weight_sum;
    weighted->f1 /= weight_sum;
  }
}

std::string display_name(Label l) {
  std::string w(markup::label_word(l));
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt2(*v) : std::string("n/a");
}

}  // namespace

TokenEvalReport eval_tokens(const TokenLabelSeq& gold, const TokenLabelSeq& pred,
                            bool exclude_other) {
  if (gold.tokens.size() != gold.labels.size() ||
      pred.tokens.size() != pred.labels.size()) {
    throw std::invalid_argument("token/label length mismatch within a sequence");
  }
  if (gold.labels.size() != pred.labels.size()) {
    throw std::invalid_argument(
        "gold and predicted sequences differ in length (" +
        std::to_string(gold.labels.size()) + " vs " +
        std::to_string(pred.labels.size()) +
        "); run alignment repair (align + project_labels) first");
  }

  std::map<Label, std::size_t> tp, fp, fn, support, predicted;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.labels.size(); ++i) {
    const Label g = gold.labels[i];
    const Label p = pred.labels[i];
    ++support[g];
    ++predicted[p];
    if (g == p) {
      ++correct;
      ++tp[g];
    } else {
      ++fn[g];
      ++fp[p];
    }
  }

  TokenEvalReport report;
  report.exclude_other = exclude_other;
  for (Label l : markup::kAllLabels) {
    if (exclude_other && l == Label::Other) continue;
    const std::size_t sup = support.count(l) ? support[l] : 0;
    const std::size_t prd = predicted.count(l) ? predicted[l] : 0;
    if (sup == 0 && prd == 0) continue;
    report.classes[l] = finish(tp.count(l) ? tp[l] : 0, fp.count(l) ? fp[l] : 0,
                               fn.count(l) ? fn[l] : 0, sup);
    report.total_support += sup;
  }
  fill_macros(report.classes, &report.macro, &report.weighted);
  report.accuracy = gold.labels.empty()
                        ? 0.0
                        : static_cast<double>(correct) /
                              static_cast<double>(gold.labels.size());
  return report;
}

PhraseEvalReport eval_phrases(const std::vector<Phrase>& gold,
                              const std::vector<PredictedPhrase>& pred,
                              textsim::Embedder& embedder) {
  PhraseEvalReport report;
  report.total_gold = gold.size();
  report.total_pred = pred.size();

  for (const PredictedPhrase& p : pred) {
    if (!p.label) ++report.unlabeled_predictions;
  }
  report.unlabeled_rate =
      pred.empty() ? 0.0
                   : static_cast<double>(report.unlabeled_predictions) /
                         static_cast<double>(pred.size());

  // Group both sides by sentence, keeping first-appearance order.
  std::vector<std::string> sentence_order;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
      groups;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(gold[i].sentence_id);
    if (inserted) sentence_order.push_back(gold[i].sentence_id);
    it->second.first.push_back(i);
  }
  for (std::size_t j = 0; j < pred.size(); ++j) {
    auto it = groups.find(pred[j].sentence_id);
    if (it == groups.end()) {
      ++report.unmatched_pred;  // prediction for a sentence with no gold
      continue;
    }
    it->second.second.push_back(j);
  }

  std::vector<std::pair<std::size_t, std::size_t>> all_pairs;  // gold idx, pred idx
  for (const std::string& sid : sentence_order) {
    const auto& [gold_idx, pred_idx] = groups[sid];
    std::vector<std::string> texts_a, texts_b;
    std::vector<double> pos_a, pos_b;
    for (std::size_t r = 0; r < gold_idx.size(); ++r) {
      texts_a.push_back(gold[gold_idx[r]].text);
      pos_a.push_back(static_cast<double>(r));
    }
    for (std::size_t r = 0; r < pred_idx.size(); ++r) {
      texts_b.push_back(pred[pred_idx[r]].text);
      pos_b.push_back(static_cast<double>(r));
    }
    const auto pairs = agreement::pair_by_token_jaccard(
        texts_a, pos_a, texts_b, pos_b, agreement::PairingMode::Greedy);
    report.unmatched_gold += gold_idx.size() - pairs.size();
    report.unmatched_pred += pred_idx.size() - pairs.size();
    for (const auto& [i, j] : pairs) {
      all_pairs.emplace_back(gold_idx[i], pred_idx[j]);
    }
  }

  report.matched_pairs = all_pairs.size();
  if (!all_pairs.empty()) {
    double jaccard_sum = 0.0;
    std::vector<std::string> texts;
    texts.reserve(all_pairs.size() * 2);
    for (const auto& [gi, pj] : all_pairs) {
      jaccard_sum += textsim::jaccard_sim(gold[gi].text, pred[pj].text);
      texts.push_back(gold[gi].text);
      texts.push_back(pred[pj].text);
    }
    const std::vector<textsim::Embedding> vectors = embedder.embed(texts);
    double cosine_sum = 0.0;
    for (std::size_t k = 0; k < all_pairs.size(); ++k) {
      cosine_sum += textsim::cosine(vectors[2 * k], vectors[2 * k + 1]);
    }
    const auto n = static_cast<double>(all_pairs.size());
    report.mean_jaccard = jaccard_sum / n;
    report.mean_cosine = cosine_sum / n;
    report.mean_cosine_distance = 1.0 - *report.mean_cosine;

    std::map<Label, std::size_t> tp, fp, fn, support, predicted;
    for (const auto& [gi, pj] : all_pairs) {
      if (!pred[pj].label) continue;  // unlabeled: similarity only
      const Label g = gold[gi].label;
      const Label p = *pred[pj].label;
      ++support[g];
      ++predicted[p];
      if (g == p) {
        ++tp[g];
      } else {
        ++fn[g];
        ++fp[p];
      }
    }
    for (Label l : markup::kAllLabels) {
      const std::size_t sup = support.count(l) ? support[l] : 0;
      const std::size_t prd = predicted.count(l) ? predicted[l] : 0;
      if (sup == 0 && prd == 0) continue;
      report.labels[l] = finish(tp.count(l) ? tp[l] : 0, fp.count(l) ? fp[l] : 0,
                                fn.count(l) ? fn[l] : 0, sup);
    }
    fill_macros(report.labels, &report.macro, &report.weighted);
  }
  return report;
}

double missing_label_rate(const std::vector<PredictedPhrase>& pred) {
  if (pred.empty()) return 0.0;
  std::size_t missing = 0;
  for (const PredictedPhrase& p : pred) {
    if (!p.label) ++missing;
  }
  return static_cast<double>(missing) / static_cast<double>(pred.size());
}

std::string render_table(const TokenEvalReport& report) {
  std::string out;
  out += "       Precision  Recall  F1-score  Support\n";
  for (const auto& [label, m] : report.classes) {
    char line[128];
    std::snprintf(line, sizeof line, "%-7s%-11s%-8s%-10s%zu\n",
                  std::string(markup::label_surface(label)).c_str(),
                  fmt2(m.precision).c_str(), fmt2(m.recall).c_str(),
                  fmt2(m.f1).c_str(), m.support);
    out += line;
  }
  char macro[128];
  std::snprintf(macro, sizeof macro, "%-7s%-11s%-8s%-10s%zu\n", "Macro",
                fmt2(report.macro.precision).c_str(),
                fmt2(report.macro.recall).c_str(), fmt2(report.macro.f1).c_str(),
                report.total_support);
  out += macro;
  char weighted[128];
  std::snprintf(weighted, sizeof weighted, "%-7s%-11s%-8s%s\n", "Wtd",
                fmt2(report.weighted.precision).c_str(),
                fmt2(report.weighted.recall).c_str(),
                fmt2(report.weighted.f1).c_str());
  out += weighted;
  char acc[64];
  std::snprintf(acc, sizeof acc, "Accuracy: %.2f\n", report.accuracy);
  out += acc;
  return out;
}

std::string render_table(const PhraseEvalReport& report,
                         const std::string& run_name) {
  std::string out;
  out += "            Jaccard similarity  Cosine similarity  F1 (labels)\n";
  char row[160];
  std::snprintf(row, sizeof row, "%-12s%-20s%-19s%s\n", run_name.c_str(),
                fmt_opt(report.mean_jaccard).c_str(),
                fmt_opt(report.mean_cosine).c_str(),
                fmt2(report.macro.f1).c_str());
  out += row;
  if (report.mean_cosine_distance) {
    out += "Cosine distance (1 - similarity): " +
           fmt2(*report.mean_cosine_distance) + "\n";
  }

  out += "\nLabel match over pairs\n";
  out += "           Precision  Recall  F1-score\n";
  for (const auto& [label, m] : report.labels) {
    char line[128];
    std::snprintf(line, sizeof line, "%-11s%-11s%-8s%s\n",
                  display_name(label).c_str(), fmt2(m.precision).c_str(),
                  fmt2(m.recall).c_str(), fmt2(m.f1).c_str());
    out += line;
  }
  char macro[128];
  std::snprintf(macro, sizeof macro, "%-11s%-11s%-8s%s\n", "Macro",
                fmt2(report.macro.precision).c_str(),
                fmt2(report.macro.recall).c_str(), fmt2(report.macro.f1).c_str());
  out += macro;

  char tail[256];
  std::snprintf(tail, sizeof tail,
                "\nMatched pairs: %zu\nUnlabeled predictions: %zu/%zu (%.1f%%)\n"
                "Unmatched gold: %zu, unmatched predictions: %zu\n",
                report.matched_pairs, report.unlabeled_predictions,
                report.total_pred, 100.0 * report.unlabeled_rate,
                report.unmatched_gold, report.unmatched_pred);
  out += tail;
  return out;
}

std::string to_csv(const TokenEvalReport& report) {
  std::string out = "class,precision,recall,f1,support\n";
  char line[160];
  for (const auto& [label, m] : report.classes) {
    std::snprintf(line, sizeof line, "%s,%.12g,%.12g,%.12g,%zu\n",
                  std::string(markup::label_surface(label)).c_str(), m.precision,
                  m.recall, m.f1, m.support);
    out += line;
  }
  std::snprintf(line, sizeof line, "macro,%.12g,%.12g,%.12g,%zu\n",
                report.macro.precision, report.macro.recall, report.macro.f1,
                report.total_support);
  out += line;
  std::snprintf(line, sizeof line, "weighted,%.12g,%.12g,%.12g,%zu\n",
                report.weighted.precision, report.weighted.recall,
                report.weighted.f1, report.total_support);
  out += line;
  return out;
}

std::string to_csv(const PhraseEvalReport& report) {
  std::string out = "metric,value\n";
  char line[160];
  auto add = [&](const char* name, const std::optional<double>& v) {
    if (v) {
      std::snprintf(line, sizeof line, "%s,%.12g\n", name, *v);
    } else {
      std::snprintf(line, sizeof line, "%s,\n", name);
    }
    out += line;
  };
  add("mean_jaccard_similarity", report.mean_jaccard);
  add("mean_cosine_similarity", report.mean_cosine);
  add("mean_cosine_distance", report.mean_cosine_distance);
  add("label_macro_f1", report.macro.f1);
  add("unlabeled_rate", report.unlabeled_rate);
  std::snprintf(line, sizeof line, "matched_pairs,%zu\n", report.matched_pairs);
  out += line;
  std::snprintf(line, sizeof line, "unmatched_gold,%zu\n", report.unmatched_gold);
  out += line;
  std::snprintf(line, sizeof line, "unmatched_pred,%zu\n", report.unmatched_pred);
  out += line;
  out += "\nclass,precision,recall,f1,support\n";
  for (const auto& [label, m] : report.labels) {
    std::snprintf(line, sizeof line, "%s,%.12g,%.12g,%.12g,%zu\n",
                  std::string(markup::label_surface(label)).c_str(), m.precision,
                  m.recall, m.f1, m.support);
    out += line;
  }
  return out;
}

}  // namespace csk::evalx
