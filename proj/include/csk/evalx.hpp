#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csk/agreement.hpp"
#include "csk/markup.hpp"
#include "csk/textsim.hpp"
#include "csk/tokenlab.hpp"

// Scoring predictions against gold annotations: positional token-level
// multiclass P/R/F1, phrase-level Jaccard/cosine similarity with label F1
// over matched pairs, and missing-label accounting for models that emit
// phrases without labels.

namespace csk::evalx {

using agreement::ClassMetrics;
using markup::Label;
using markup::Phrase;
using tokenlab::TokenLabelSeq;

struct MacroMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct TokenEvalReport {
  std::map<Label, ClassMetrics> classes;
  MacroMetrics macro;     // unweighted mean over classes with gold support >= 1
  MacroMetrics weighted;  // gold-support-weighted mean over the same classes
  std::size_t total_support = 0;
  double accuracy = 0.0;  // positional, all labels counted
  bool exclude_other = true;
};

// Position-by-position confusion counts; lengths must match (repair with
// tokenlab::align + project_labels first). With exclude_other the O class
// is dropped from the per-class table, the macro means, and total_support;
// positions still count toward other classes' false positives.
TokenEvalReport eval_tokens(const TokenLabelSeq& gold, const TokenLabelSeq& pred,
                            bool exclude_other = true);

// Model-extracted phrase; label may be absent (feeds missing_label_rate).
struct PredictedPhrase {
  std::string text;
  std::optional<Label> label;
  std::string sentence_id;
  std::string raw_source;  // the model text this was parsed from
};

struct PhraseEvalReport {
  std::size_t matched_pairs = 0;
  std::optional<double> mean_jaccard;          // over matched pairs
  std::optional<double> mean_cosine;           // similarity
  std::optional<double> mean_cosine_distance;  // 1 - similarity
  std::map<Label, ClassMetrics> labels;        // over labeled pairs only
  MacroMetrics macro;
  MacroMetrics weighted;
  std::size_t unlabeled_predictions = 0;
  double unlabeled_rate = 0.0;
  std::size_t unmatched_gold = 0;
  std::size_t unmatched_pred = 0;
  std::size_t total_gold = 0;
  std::size_t total_pred = 0;
};

// Pairs gold and predicted phrases per sentence by greedy token-Jaccard
// overlap, then averages similarities over the pairs. Label confusion runs
// over pairs whose prediction carries a label; unlabeled predictions still
// pair (they count into the similarity means and unlabeled_rate).
PhraseEvalReport eval_phrases(const std::vector<Phrase>& gold,
                              const std::vector<PredictedPhrase>& pred,
                              textsim::Embedder& embedder);

// Fraction of predictions with no label; 0 for empty input.
double missing_label_rate(const std::vector<PredictedPhrase>& pred);

std::string render_table(const TokenEvalReport& report);
std::string render_table(const PhraseEvalReport& report,
                         const std::string& run_name = "run");
std::string to_csv(const TokenEvalReport& report);
std::string to_csv(const PhraseEvalReport& report);

}  // namespace csk::evalx
