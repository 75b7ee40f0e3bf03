#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "csk/markup.hpp"

// Sentence-level datasets out of annotated guideline documents:
// segmentation, causal-sentence flags, and deterministic train/test and
// k-fold partitions (seeded Fisher-Yates over splitmix64, identical on
// every platform).

namespace csk::corpus {

// Rule-based sentence segmenter for plain or tagged text. Splits after
// . ! ? followed by whitespace and an uppercase letter or digit, with an
// abbreviation stop-list; never splits inside parentheses or inside an
// open annotation span.
std::vector<std::string> segment_sentences(std::string_view text);

struct CorpusRecord {
  std::string doc_id;
  markup::AnnotatedSentence sentence;
  bool is_causal = false;  // == sentence has at least one phrase
};

struct DocumentInput {
  std::string doc_id;
  std::string text;  // tagged guideline text
};

// Segments and parses every document; sentence ids are "{doc_id}:{index}".
std::vector<CorpusRecord> build_corpus(
    const std::vector<DocumentInput>& docs,
    markup::ParseMode mode = markup::ParseMode::Lenient);

// Same, for a single document, keeping per-sentence diagnostics.
struct DocumentParse {
  markup::AnnotatedDocument doc;
  std::vector<std::vector<markup::Diagnostic>> diagnostics;  // per sentence
};
DocumentParse parse_document(std::string_view doc_id, std::string_view text,
                             markup::ParseMode mode = markup::ParseMode::Lenient);

struct HoldoutMode {
  double test_fraction = 0.2;  // open interval (0, 1)
};
struct KFoldMode {
  int k = 4;  // >= 2
};

struct SplitSpec {
  std::uint64_t seed = 0;
  std::variant<HoldoutMode, KFoldMode> mode = HoldoutMode{};
};

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
using FoldSplit = std::vector<std::vector<std::size_t>>;

struct SplitResult {
  SplitSpec spec;
  std::variant<HoldoutSplit, FoldSplit> partitions;
};

// Partitions record indices [0, count). Holdout: |test| =
// round(fraction * count); KFold: fold sizes differ by at most one.
// Identical (count, spec) always yields identical partitions.
SplitResult split(std::size_t count, const SplitSpec& spec);

// Split that keeps all sentences of a document in the same partition
// (sizes then only approximate the requested balance).
SplitResult split_grouped(const std::vector<CorpusRecord>& records,
                          const SplitSpec& spec);

}  // namespace csk::corpus
