#include "csk/markup.hpp"

#include <algorithm>
#include <array>

#include "csk/utf8.hpp"

namespace csk::markup {

namespace {

constexpr std::string_view kSurfaces[] = {"C", "E", "CO", "A", "S", "O"};
constexpr std::string_view kWords[] = {"cause",  "effect", "condition",
                                       "action", "signal", "other"};

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

// A tag candidate is '<' '/'? [A-Za-z]+ '>' with no whitespace. Anything
// else starting with '<' is ordinary text.
struct TagToken {
  bool closing = false;
  std::optional<Label> label;  // empty for unknown tag names
  std::string name;
  std::size_t length = 0;  // code points including brackets
};

std::optional<TagToken> scan_tag(const std::u32string& raw, std::size_t pos) {
  if (raw[pos] != U'<') return std::nullopt;
  std::size_t i = pos + 1;
  TagToken tok;
  if (i < raw.size() && raw[i] == U'/') {
    tok.closing = true;
    ++i;
  }
  std::string name;
  while (i < raw.size() && ((raw[i] >= U'A' && raw[i] <= U'Z') ||
                            (raw[i] >= U'a' && raw[i] <= U'z'))) {
    name.push_back(static_cast<char>(raw[i]));
    ++i;
  }
  if (name.empty() || i >= raw.size() || raw[i] != U'>') return std::nullopt;
  tok.name = std::move(name);
  tok.label = label_from_surface(tok.name);
  tok.length = i - pos + 1;
  return tok;
}

std::string tag_text(const TagToken& tok) {
  std::string s = "<";
  if (tok.closing) s += "/";
  s += tok.name;
  s += ">";
  return s;
}

}  // namespace

std::string_view label_surface(Label label) {
  return kSurfaces[static_cast<int>(label)];
}

std::string_view label_word(Label label) { return kWords[static_cast<int>(label)]; }

std::optional<Label> label_from_surface(std::string_view surface) {
  for (Label l : kAllLabels) {
    if (l != Label::Other && label_surface(l) == surface) return l;
  }
  return std::nullopt;
}

std::optional<Label> label_from_word(std::string_view word) {
  std::string lowered(word);
  for (char& c : lowered) c = ascii_lower(c);
  for (Label l : kAllLabels) {
    if (label_word(l) == lowered) return l;
  }
  return std::nullopt;
}

std::string_view severity_name(Severity severity) {
  return severity == Severity::Error ? "error" : "warning";
}

std::string_view diagnostic_code_name(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::UnclosedTag: return "UnclosedTag";
    case DiagnosticCode::UnopenedClose: return "UnopenedClose";
    case DiagnosticCode::MismatchedClose: return "MismatchedClose";
    case DiagnosticCode::NestedTag: return "NestedTag";
    case DiagnosticCode::UnknownTag: return "UnknownTag";
    case DiagnosticCode::EmptySpan: return "EmptySpan";
  }
  return "UnknownTag";
}

ParseResult parse_sentence(std::string_view raw, ParseMode mode,
                           std::string sentence_id) {
  const std::u32string raw32 = utf8::decode(raw);
  ParseResult result;
  result.sentence.sentence_id = sentence_id;
  result.sentence.raw.assign(raw.begin(), raw.end());

  std::u32string plain;
  plain.reserve(raw32.size());

  struct OpenSpan {
    Label label;
    std::size_t raw_offset;
    std::size_t plain_start;
  };
  std::optional<OpenSpan> open;
  // Inner opens dropped by a NestedTag repair; their closes are consumed
  // silently as part of the same repair.
  std::array<int, 6> suppressed{};

  auto fail_or_report = [&](DiagnosticCode code, std::size_t offset,
                            std::string message, Severity severity) {
    if (mode == ParseMode::Strict) throw ParseError(code, offset, message);
    result.diagnostics.push_back({severity, code, offset, std::move(message)});
  };

  std::size_t i = 0;
  while (i < raw32.size()) {
    std::optional<TagToken> tok;
    if (raw32[i] == U'<') tok = scan_tag(raw32, i);
    if (!tok) {
      plain.push_back(raw32[i]);
      ++i;
      continue;
    }
    if (!tok->label) {
      fail_or_report(DiagnosticCode::UnknownTag, i,
                     "unknown tag " + tag_text(*tok) + " kept as literal text",
                     Severity::Warning);
      // Lenient: the tag characters stay in the plain text.
      for (std::size_t k = 0; k < tok->length; ++k) plain.push_back(raw32[i + k]);
      i += tok->length;
      continue;
    }
    const Label label = *tok->label;
    if (!tok->closing) {
      if (open) {
        fail_or_report(DiagnosticCode::NestedTag, i,
                       "nested " + tag_text(*tok) + " inside open <" +
                           std::string(label_surface(open->label)) +
                           "> dropped",
                       Severity::Error);
        ++suppressed[static_cast<int>(label)];
      } else {
        open = OpenSpan{label, i, plain.size()};
      }
    } else {
      if (suppressed[static_cast<int>(label)] > 0) {
        --suppressed[static_cast<int>(label)];  // same repair as its open
      } else if (open && open->label == label) {
        if (plain.size() == open->plain_start) {
          fail_or_report(DiagnosticCode::EmptySpan, open->raw_offset,
                         "empty <" + std::string(label_surface(label)) +
                             "></" + std::string(label_surface(label)) +
                             "> span dropped",
                         Severity::Error);
        } else {
          Phrase phrase;
          phrase.label = label;
          phrase.start = open->plain_start;
          phrase.end = plain.size();
          phrase.text = utf8::encode(std::u32string_view(plain).substr(
              phrase.start, phrase.end - phrase.start));
          phrase.sentence_id = sentence_id;
          result.sentence.phrases.push_back(std::move(phrase));
        }
        open.reset();
      } else if (open) {
        fail_or_report(DiagnosticCode::MismatchedClose, i,
                       "closing " + tag_text(*tok) + " does not match open <" +
                           std::string(label_surface(open->label)) + ">",
                       Severity::Error);
      } else {
        fail_or_report(DiagnosticCode::UnopenedClose, i,
                       "closing " + tag_text(*tok) + " without an open tag",
                       Severity::Error);
      }
    }
    i += tok->length;
  }
  if (open.has_value()) {
    const OpenSpan last = *open;
    fail_or_report(DiagnosticCode::UnclosedTag, last.raw_offset,
                   "unclosed <" + std::string(label_surface(last.label)) +
                       "> dropped",
                   Severity::Error);
  }

  result.sentence.plain = utf8::encode(plain);
  return result;
}

std::string serialize_sentence(const AnnotatedSentence& sentence) {
  const std::u32string plain32 = utf8::decode(sentence.plain);
  std::size_t previous_end = 0;
  for (const Phrase& p : sentence.phrases) {
    if (p.start >= p.end || p.end > plain32.size()) {
      throw std::invalid_argument("phrase offsets [" + std::to_string(p.start) +
                                  ", " + std::to_string(p.end) +
                                  ") out of range for sentence of length " +
                                  std::to_string(plain32.size()));
    }
    if (p.start < previous_end) {
      throw std::invalid_argument(
          "phrases overlap or are unsorted at offset " + std::to_string(p.start));
    }
    if (p.label == Label::Other) {
      throw std::invalid_argument("label O cannot appear in markup");
    }
    const std::string span = utf8::encode(
        std::u32string_view(plain32).substr(p.start, p.end - p.start));
    if (span != p.text) {
      throw std::invalid_argument("phrase text does not match sentence substring [" +
                                  std::to_string(p.start) + ", " +
                                  std::to_string(p.end) + ")");
    }
    previous_end = p.end;
  }

  std::string out;
  out.reserve(sentence.plain.size() + sentence.phrases.size() * 9);
  std::size_t pos = 0;
  for (const Phrase& p : sentence.phrases) {
    out += utf8::encode(std::u32string_view(plain32).substr(pos, p.start - pos));
    out += "<";
    out += label_surface(p.label);
    out += ">";
    out += utf8::encode(std::u32string_view(plain32).substr(p.start, p.end - p.start));
    out += "</";
    out += label_surface(p.label);
    out += ">";
    pos = p.end;
  }
  out += utf8::encode(std::u32string_view(plain32).substr(pos));
  return out;
}

std::vector<Phrase> extract_phrases(const AnnotatedDocument& doc) {
  std::vector<Phrase> phrases;
  for (const AnnotatedSentence& s : doc.sentences) {
    phrases.insert(phrases.end(), s.phrases.begin(), s.phrases.end());
  }
  return phrases;
}

}  // namespace csk::markup
