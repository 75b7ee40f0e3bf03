#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Inline tag markup for causal spans: a cause phrase is wrapped in
// <C>...</C>, an effect in <E>...</E>, and so on. Tags are case-sensitive,
// never nest, and carry no attributes. Character offsets throughout this
// module count Unicode scalar values, not bytes.

namespace csk::markup {

enum class Label { Cause, Effect, Condition, Action, Signal, Other };

constexpr Label kAllLabels[] = {Label::Cause,  Label::Effect, Label::Condition,
                                Label::Action, Label::Signal, Label::Other};

// Surface form used in markup and CoNLL files: C, E, CO, A, S, O.
std::string_view label_surface(Label label);
// Lowercase word used in instruction records: cause, effect, ...
std::string_view label_word(Label label);

std::optional<Label> label_from_surface(std::string_view surface);
// Case-insensitive lookup of the word form.
std::optional<Label> label_from_word(std::string_view word);

// One labeled span. Offsets index the plain (tag-stripped) sentence text
// and satisfy 0 <= start < end <= len(plain); text is the verbatim
// substring [start, end).
struct Phrase {
  Label label = Label::Other;
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string sentence_id;

  bool operator==(const Phrase&) const = default;
};

enum class Severity { Error, Warning };

enum class DiagnosticCode {
  UnclosedTag,
  UnopenedClose,
  MismatchedClose,
  NestedTag,
  UnknownTag,
  EmptySpan,
};

// Emitted once per lenient-mode repair; offset points into the raw text.
struct Diagnostic {
  Severity severity = Severity::Error;
  DiagnosticCode code = DiagnosticCode::UnknownTag;
  std::size_t offset = 0;
  std::string message;
};

std::string_view severity_name(Severity severity);
std::string_view diagnostic_code_name(DiagnosticCode code);

struct AnnotatedSentence {
  std::string sentence_id;
  std::string raw;    // with tags
  std::string plain;  // tags stripped, nothing else changed
  std::vector<Phrase> phrases;  // non-overlapping, sorted by start

  bool operator==(const AnnotatedSentence&) const = default;
};

struct AnnotatedDocument {
  std::string doc_id;
  std::vector<AnnotatedSentence> sentences;
};

enum class ParseMode { Strict, Lenient };

// Thrown by strict-mode parsing at the first malformed construct and by
// serialize_sentence on invariant violations.
class ParseError : public std::runtime_error {
 public:
  ParseError(DiagnosticCode code, std::size_t offset, const std::string& message)
      : std::runtime_error(message), code_(code), offset_(offset) {}

  DiagnosticCode code() const { return code_; }
  std::size_t offset() const { return offset_; }

 private:
  DiagnosticCode code_;
  std::size_t offset_;
};

struct ParseResult {
  AnnotatedSentence sentence;
  std::vector<Diagnostic> diagnostics;
};

// Strict mode accepts only well-formed markup (every open tag closed by a
// matching close, no nesting, no unknown tags, no empty spans) and throws
// ParseError otherwise. Lenient mode always returns a sentence: unknown
// tags stay in the text as literal characters, unclosed/unopened/dangling
// tags are dropped, nested spans keep the outermost span. Every repair
// emits exactly one Diagnostic.
ParseResult parse_sentence(std::string_view raw, ParseMode mode,
                           std::string sentence_id = {});

// Inverse of parse_sentence for well-formed sentences:
// parse_sentence(serialize_sentence(s), Strict) == s.
std::string serialize_sentence(const AnnotatedSentence& sentence);

// All phrases of a document, document order preserved.
std::vector<Phrase> extract_phrases(const AnnotatedDocument& doc);

}  // namespace csk::markup
