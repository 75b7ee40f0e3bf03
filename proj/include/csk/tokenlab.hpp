#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csk/markup.hpp"

// Token-level view of annotated sentences: whitespace/punctuation
// tokenization, span labels projected onto tokens (plain IO scheme, no
// B-/I- prefixes), and edit-distance alignment used to repair model
// outputs whose token count drifted from the gold sentence.

namespace csk::tokenlab {

using markup::AnnotatedSentence;
using markup::Label;

struct Token {
  std::string text;
  std::size_t start = 0;  // code-point offsets into the plain text
  std::size_t end = 0;
};

// Splits on whitespace, then peels leading/trailing punctuation
// (.,;:()[] and quotes) into separate tokens. Internal punctuation stays
// put, so "5.8%" and "pre-existing" remain single tokens.
std::vector<std::string> tokenize(std::string_view plain);
std::vector<Token> tokenize_with_offsets(std::string_view plain);

struct TokenLabelSeq {
  std::vector<std::string> tokens;
  std::vector<Label> labels;

  bool operator==(const TokenLabelSeq&) const = default;
};

// Every token overlapping a span gets that span's label (boundary tokens
// resolve toward the span); tokens outside all spans get O. A token
// overlapping two spans takes the one covering more of it.
TokenLabelSeq to_token_labels(const AnnotatedSentence& sentence);

struct AlignPair {
  std::optional<std::size_t> gold;  // nullopt = GAP
  std::optional<std::size_t> pred;

  bool operator==(const AlignPair&) const = default;
};

struct Alignment {
  std::vector<AlignPair> pairs;
  std::size_t cost = 0;  // token-level edit distance
};

// Minimum-edit-distance alignment with unit costs; token equality is
// case-insensitive (ASCII). Ties during traceback prefer
// match > substitute > delete > insert.
Alignment align(const std::vector<std::string>& gold,
                const std::vector<std::string>& pred);

struct RepairStats {
  std::size_t inserted_other = 0;  // gold tokens the prediction missed
  std::size_t dropped_pred = 0;    // predicted tokens with no gold counterpart
  std::size_t substitutions = 0;

  bool operator==(const RepairStats&) const = default;
};

struct RepairResult {
  TokenLabelSeq repaired;
  RepairStats stats;
};

// Projects predicted labels through an alignment onto the gold token
// sequence: matched/substituted positions copy the predicted label, gold
// positions aligned to GAP get O. The result always has exactly
// |gold_tokens| labels.
RepairResult project_labels(const Alignment& alignment, const TokenLabelSeq& pred,
                            const std::vector<std::string>& gold_tokens);

// CoNLL-style interchange: `token<TAB>label` lines, blank line between
// sentences.
void write_conll(std::ostream& out, const std::vector<TokenLabelSeq>& sentences);
std::vector<TokenLabelSeq> read_conll(std::istream& in);

}  // namespace csk::tokenlab
