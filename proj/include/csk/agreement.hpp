#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csk/markup.hpp"

// Inter-annotator agreement over phrase annotations: merge two annotators'
// phrases sentence by sentence, pair overlapping spans, then score the
// pairs with relaxed string distances, exact-match counts, and label
// precision/recall/F1.

namespace csk::agreement {

using markup::Label;
using markup::Phrase;

struct SentenceInfo {
  std::string id;
  std::string text;  // plain sentence text
};

struct MergedRow {
  std::string sentence_id;
  std::string sentence_text;
  std::optional<Phrase> phrase_a;
  std::optional<Phrase> phrase_b;

  bool two_sided() const { return phrase_a && phrase_b; }
  std::optional<Label> label_a() const {
    return phrase_a ? std::optional(phrase_a->label) : std::nullopt;
  }
  std::optional<Label> label_b() const {
    return phrase_b ? std::optional(phrase_b->label) : std::nullopt;
  }
};

enum class PairingMode {
  Greedy,   // highest token-Jaccard first; ties by |start_a - start_b|, then start_a
  Optimal,  // maximum total token-Jaccard over the sentence (assignment problem)
};

// Generic pairing used here and by the phrase-level evaluator. Items are
// (text, position); pairs with zero token-Jaccard similarity never match.
// Returns (index_a, index_b) pairs.
std::vector<std::pair<std::size_t, std::size_t>> pair_by_token_jaccard(
    const std::vector<std::string>& texts_a, const std::vector<double>& pos_a,
    const std::vector<std::string>& texts_b, const std::vector<double>& pos_b,
    PairingMode mode);

// Pairs phrases within each shared sentence; unmatched phrases become
// one-sided rows. Phrases referencing a sentence id missing from
// `sentences` throw.
std::vector<MergedRow> merge_annotations(
    const std::vector<Phrase>& annotator_a, const std::vector<Phrase>& annotator_b,
    const std::vector<SentenceInfo>& sentences,
    PairingMode mode = PairingMode::Greedy);

struct RelaxedEntry {
  double mean_levenshtein = 0.0;      // normalized, per matched pair
  double mean_jaccard_distance = 0.0;
  std::size_t pairs = 0;
};

// Per-label relaxed distances over two-sided rows, grouped by annotator
// A's label.
std::map<Label, RelaxedEntry> relaxed_report(const std::vector<MergedRow>& rows);

// Rows whose phrase texts are byte-equal after trimming whitespace.
std::size_t exact_matches(const std::vector<MergedRow>& rows);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // reference-side count
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct LabelAgreement {
  std::map<Label, ClassMetrics> classes;  // labels with at least one pair
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Multiclass P/R/F1 of label assignment with annotator A as reference:
// TP = both chose L, FP = only B chose L, FN = only A chose L.
LabelAgreement label_agreement(const std::vector<MergedRow>& rows);

// Mean token-Jaccard similarity over two-sided rows
// (== 1 - mean Jaccard distance).
double overall_agreement(const std::vector<MergedRow>& rows);

struct AgreementReport {
  std::map<Label, RelaxedEntry> relaxed;
  std::size_t matched_pairs = 0;
  std::size_t exact_matches = 0;
  LabelAgreement labels;
  double overall_jaccard_similarity = 0.0;
  double overall_mean_levenshtein = 0.0;       // over all pairs
  double overall_mean_jaccard_distance = 0.0;  // over all pairs
  std::size_t one_sided_a = 0;  // coverage of unpaired phrases
  std::size_t one_sided_b = 0;
};

AgreementReport compute_agreement(const std::vector<MergedRow>& rows);

// Aligned-column rendering of the relaxed-match and label-match tables.
std::string render_tables(const AgreementReport& report);

// Merged table as CSV: sentence_id, sentence, phrase_a, label_a, phrase_b,
// label_b.
std::string merged_to_csv(const std::vector<MergedRow>& rows);

}  // namespace csk::agreement
