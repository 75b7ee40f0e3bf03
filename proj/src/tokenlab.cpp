#include "csk/tokenlab.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "csk/utf8.hpp"

namespace csk::tokenlab {

namespace {

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0x00A0;
}

bool is_edge_punct(char32_t c) {
  switch (c) {
    case U'.': case U',': case U';': case U':':
    case U'(': case U')': case U'[': case U']':
    case U'"': case 0x201C: case 0x201D:  // curly double quotes
      return true;
    default:
      return false;
  }
}

char32_t lower_ascii(char32_t c) {
  return (c >= U'A' && c <= U'Z') ? c - U'A' + U'a' : c;
}

bool tokens_equal_nocase(std::string_view a, std::string_view b) {
  const std::u32string ua = utf8::decode(a);
  const std::u32string ub = utf8::decode(b);
  if (ua.size() != ub.size()) return false;
  for (std::size_t i = 0; i < ua.size(); ++i) {
    if (lower_ascii(ua[i]) != lower_ascii(ub[i])) return false;
  }
  return true;
}

}  // namespace

std::vector<Token> tokenize_with_offsets(std::string_view plain) {
  const std::u32string text = utf8::decode(plain);
  std::vector<Token> tokens;
  auto emit = [&](std::size_t start, std::size_t end) {
    Token t;
    t.start = start;
    t.end = end;
    t.text = utf8::encode(std::u32string_view(text).substr(start, end - start));
    tokens.push_back(std::move(t));
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;

    std::size_t core_begin = i;
    std::size_t core_end = end;
    while (core_begin < core_end && is_edge_punct(text[core_begin])) ++core_begin;
    while (core_end > core_begin && is_edge_punct(text[core_end - 1])) --core_end;

    for (std::size_t p = i; p < core_begin; ++p) emit(p, p + 1);
    if (core_begin < core_end) emit(core_begin, core_end);
    for (std::size_t p = core_end; p < end; ++p) emit(p, p + 1);
    i = end;
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view plain) {
  std::vector<std::string> out;
  for (Token& t : tokenize_with_offsets(plain)) out.push_back(std::move(t.text));
  return out;
}

TokenLabelSeq to_token_labels(const AnnotatedSentence& sentence) {
  TokenLabelSeq seq;
  for (const Token& tok : tokenize_with_offsets(sentence.plain)) {
    Label best = Label::Other;
    std::size_t best_overlap = 0;
    for (const markup::Phrase& p : sentence.phrases) {
      const std::size_t lo = std::max(tok.start, p.start);
      const std::size_t hi = std::min(tok.end, p.end);
      const std::size_t overlap = hi > lo ? hi - lo : 0;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = p.label;
      }
    }
    seq.tokens.push_back(tok.text);
    seq.labels.push_back(best);
  }
  return seq;
}

Alignment align(const std::vector<std::string>& gold,
                const std::vector<std::string>& pred) {
  const std::size_t m = gold.size();
  const std::size_t n = pred.size();
  std::vector<std::size_t> dp((m + 1) * (n + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return dp[i * (n + 1) + j];
  };
  for (std::size_t i = 0; i <= m; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= n; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub =
          at(i - 1, j - 1) + (tokens_equal_nocase(gold[i - 1], pred[j - 1]) ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  Alignment result;
  result.cost = at(m, n);
  std::size_t i = m, j = n;
  std::vector<AlignPair> reversed;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && tokens_equal_nocase(gold[i - 1], pred[j - 1]) &&
        at(i - 1, j - 1) == at(i, j)) {
      reversed.push_back({i - 1, j - 1});  // match
      --i, --j;
    } else if (i > 0 && j > 0 && at(i - 1, j - 1) + 1 == at(i, j)) {
      reversed.push_back({i - 1, j - 1});  // substitute
      --i, --j;
    } else if (i > 0 && at(i - 1, j) + 1 == at(i, j)) {
      reversed.push_back({i - 1, std::nullopt});  // delete: gold token unmatched
      --i;
    } else {
      reversed.push_back({std::nullopt, j - 1});  // insert: extra predicted token
      --j;
    }
  }
  result.pairs.assign(reversed.rbegin(), reversed.rend());
  return result;
}

RepairResult project_labels(const Alignment& alignment, const TokenLabelSeq& pred,
                            const std::vector<std::string>& gold_tokens) {
  if (pred.tokens.size() != pred.labels.size()) {
    throw std::invalid_argument("prediction tokens/labels length mismatch");
  }
  // The alignment must cover both sequences exactly once, in order.
  std::size_t next_gold = 0, next_pred = 0;
  for (const AlignPair& pair : alignment.pairs) {
    if (pair.gold) {
      if (*pair.gold != next_gold) {
        throw std::invalid_argument("alignment gold indices not contiguous");
      }
      ++next_gold;
    }
    if (pair.pred) {
      if (*pair.pred != next_pred) {
        throw std::invalid_argument("alignment pred indices not contiguous");
      }
      ++next_pred;
    }
  }
  if (next_gold != gold_tokens.size() || next_pred != pred.tokens.size()) {
    throw std::invalid_argument(
        "alignment does not cover the gold/pred sequences");
  }

  RepairResult result;
  result.repaired.tokens = gold_tokens;
  result.repaired.labels.assign(gold_tokens.size(), Label::Other);
  for (const AlignPair& pair : alignment.pairs) {
    if (pair.gold && pair.pred) {
      result.repaired.labels[*pair.gold] = pred.labels[*pair.pred];
      if (!tokens_equal_nocase(gold_tokens[*pair.gold], pred.tokens[*pair.pred])) {
        ++result.stats.substitutions;
      }
    } else if (pair.gold) {
      ++result.stats.inserted_other;  // missing token added back as O
    } else if (pair.pred) {
      ++result.stats.dropped_pred;
    }
  }
  return result;
}

void write_conll(std::ostream& out, const std::vector<TokenLabelSeq>& sentences) {
  bool first = true;
  for (const TokenLabelSeq& s : sentences) {
    if (!first) out << "\n";
    first = false;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << "\t" << markup::label_surface(s.labels[i]) << "\n";
    }
  }
}

std::vector<TokenLabelSeq> read_conll(std::istream& in) {
  std::vector<TokenLabelSeq> sentences;
  TokenLabelSeq current;
  std::string line;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      sentences.push_back(std::move(current));
      current = {};
    }
  };
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected token<TAB>label");
    }
    const std::string token = line.substr(0, tab);
    const std::string surface = line.substr(tab + 1);
    auto label = markup::label_from_surface(surface);
    if (!label && surface == "O") label = Label::Other;
    if (!label) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": unknown label '" + surface + "'");
    }
    current.tokens.push_back(token);
    current.labels.push_back(*label);
  }
  flush();
  return sentences;
}

}  // namespace csk::tokenlab
