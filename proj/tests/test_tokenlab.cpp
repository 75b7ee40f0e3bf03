#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "csk/tokenlab.hpp"
#include "test_support.hpp"

using namespace csk::tokenlab;
using csk::markup::Label;
using csk::markup::ParseMode;
using csk::markup::parse_sentence;

namespace {

std::vector<std::string> random_tokens(csk::SplitMix64& rng, std::size_t max_len) {
  static const std::vector<std::string> pool = {"a",   "b",  "ab", "A",
                                                "5.8%", "x",  "yz", "Ab"};
  std::vector<std::string> tokens;
  const std::size_t n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) tokens.push_back(pool[rng.below(pool.size())]);
  return tokens;
}

bool eq_nocase(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const char x = (a[i] >= 'A' && a[i] <= 'Z') ? char(a[i] - 'A' + 'a') : a[i];
    const char y = (b[i] >= 'A' && b[i] <= 'Z') ? char(b[i] - 'A' + 'a') : b[i];
    if (x != y) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("tokenize splits trailing punctuation but keeps numerals whole") {
  CHECK(tokenize("increased risk.") ==
        std::vector<std::string>{"increased", "risk", "."});
  CHECK(tokenize("5.8% to 9.2%") == std::vector<std::string>{"5.8%", "to", "9.2%"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("   ") == std::vector<std::string>{});
  CHECK(tokenize("(which can cause injury),") ==
        std::vector<std::string>{"(", "which", "can", "cause", "injury", ")", ","});
  CHECK(tokenize("criteria.4-8 used") ==
        std::vector<std::string>{"criteria.4-8", "used"});
  CHECK(tokenize("pre-existing") == std::vector<std::string>{"pre-existing"});
  CHECK(tokenize("...") == std::vector<std::string>{".", ".", "."});
  CHECK(tokenize(".3,9-11") == std::vector<std::string>{".", "3,9-11"});
}

TEST_CASE("tokenize offsets index the plain text in code points") {
  const auto tokens = tokenize_with_offsets("café (x).");
  REQUIRE(tokens.size() == 5);
  CHECK(tokens[0].text == "café");
  CHECK(tokens[0].start == 0);
  CHECK(tokens[0].end == 4);
  CHECK(tokens[1].text == "(");
  CHECK(tokens[1].start == 5);
  CHECK(tokens[2].text == "x");
  CHECK(tokens[3].text == ")");
  CHECK(tokens[4].text == ".");
  CHECK(tokens[4].end == 9);
}

TEST_CASE("to_token_labels assigns span labels and O elsewhere") {
  const auto s = parse_sentence("<C>X</C> causes <E>Y Z</E>", ParseMode::Strict);
  const TokenLabelSeq seq = to_token_labels(s.sentence);
  CHECK(seq.tokens == std::vector<std::string>{"X", "causes", "Y", "Z"});
  CHECK(seq.labels == std::vector<Label>{Label::Cause, Label::Other, Label::Effect,
                                         Label::Effect});

  const auto untagged = parse_sentence("no spans here", ParseMode::Strict);
  const TokenLabelSeq plain_seq = to_token_labels(untagged.sentence);
  for (Label l : plain_seq.labels) CHECK(l == Label::Other);
}

TEST_CASE("guideline sentence token labels, hand-labeled fixture") {
  const auto s = parse_sentence(
      "<C>Pregnant persons with gestational diabetes</C> are at <E>increased "
      "risk for maternal and fetal complications</E> and may benefit from "
      "<A>early identification and treatment</A>.",
      ParseMode::Strict);
  const TokenLabelSeq seq = to_token_labels(s.sentence);
  REQUIRE(seq.tokens.size() == 23);
  using L = Label;
  const std::vector<Label> expected = {
      L::Cause,  L::Cause,  L::Cause,  L::Cause,  L::Cause,   // 5 cause tokens
      L::Other,  L::Other,                                     // are at
      L::Effect, L::Effect, L::Effect, L::Effect, L::Effect,
      L::Effect, L::Effect,                                    // 7 effect tokens
      L::Other,  L::Other,  L::Other,  L::Other,               // and may benefit from
      L::Action, L::Action, L::Action, L::Action,              // 4 action tokens
      L::Other,                                                // final period
  };
  CHECK(seq.labels == expected);
}

TEST_CASE("token straddling a span boundary takes the span label") {
  csk::markup::AnnotatedSentence s;
  s.plain = "risks and";
  s.phrases.push_back({Label::Cause, "risk", 0, 4, ""});
  const TokenLabelSeq seq = to_token_labels(s);
  CHECK(seq.tokens == std::vector<std::string>{"risks", "and"});
  CHECK(seq.labels == std::vector<Label>{Label::Cause, Label::Other});
}

TEST_CASE("token overlapping two spans takes the better-covered one") {
  csk::markup::AnnotatedSentence s;
  s.plain = "abcdef x";
  s.phrases.push_back({Label::Cause, "ab", 0, 2, ""});
  s.phrases.push_back({Label::Effect, "cdef", 2, 6, ""});
  const TokenLabelSeq seq = to_token_labels(s);
  CHECK(seq.labels[0] == Label::Effect);
}

TEST_CASE("align: identical sequences match at zero cost") {
  const Alignment a = align({"a", "b"}, {"a", "b"});
  CHECK(a.cost == 0);
  REQUIRE(a.pairs.size() == 2);
  CHECK(a.pairs[0] == AlignPair{0, 0});
  CHECK(a.pairs[1] == AlignPair{1, 1});
}

TEST_CASE("align: missing gold token aligns to a gap") {
  const Alignment a = align({"Hemoglobin", "variants", "can"}, {"variants", "can"});
  CHECK(a.cost == 1);
  REQUIRE(a.pairs.size() == 3);
  CHECK(a.pairs[0] == AlignPair{0, std::nullopt});
  CHECK(a.pairs[1] == AlignPair{1, 0});
  CHECK(a.pairs[2] == AlignPair{2, 1});
}

TEST_CASE("align: case differences are free") {
  CHECK(align({"Risk"}, {"risk"}).cost == 0);
  CHECK(align({"CAFÉ"}, {"CAFÉ"}).cost == 0);
}

TEST_CASE("align: split token instance matches the enumeration oracle") {
  const std::vector<std::string> gold = {".3,9-11"};
  const std::vector<std::string> pred = {".", "3,9-11"};
  const std::size_t oracle =
      testsupport::edit_distance_oracle(gold, pred, eq_nocase);
  CHECK(oracle == 2);  // one substitution plus one insertion
  CHECK(align(gold, pred).cost == oracle);
}

TEST_CASE("align: cost equals enumeration oracle on random pairs") {
  csk::SplitMix64 rng(4242);
  for (int iter = 0; iter < 400; ++iter) {
    const auto gold = random_tokens(rng, 7);
    const auto pred = random_tokens(rng, 7);
    const Alignment a = align(gold, pred);
    CHECK(a.cost == testsupport::edit_distance_oracle(gold, pred, eq_nocase));
    CHECK(a.cost == align(pred, gold).cost);  // symmetry

    // Indices strictly increasing and complete on both sides.
    std::size_t expect_g = 0, expect_p = 0;
    std::size_t implied_cost = 0;
    for (const AlignPair& pair : a.pairs) {
      if (pair.gold) CHECK(*pair.gold == expect_g++);
      if (pair.pred) CHECK(*pair.pred == expect_p++);
      if (pair.gold && pair.pred) {
        implied_cost += !eq_nocase(gold[*pair.gold], pred[*pair.pred]);
      } else {
        ++implied_cost;  // gap on either side
      }
    }
    CHECK(expect_g == gold.size());
    CHECK(expect_p == pred.size());
    CHECK(implied_cost == a.cost);  // cost matches the gaps + substitutions
  }
}

TEST_CASE("project_labels: identity alignment copies labels") {
  TokenLabelSeq pred;
  pred.tokens = {"a", "b"};
  pred.labels = {Label::Cause, Label::Effect};
  const auto r = project_labels(align(pred.tokens, pred.tokens), pred, pred.tokens);
  CHECK(r.repaired.labels == pred.labels);
  CHECK(r.stats == RepairStats{});
}

TEST_CASE("project_labels: missing tokens become O, extras are dropped") {
  const std::vector<std::string> gold = {"Hemoglobin", "variants", "can"};
  TokenLabelSeq pred;
  pred.tokens = {"variants", "can"};
  pred.labels = {Label::Cause, Label::Other};
  const auto r = project_labels(align(gold, pred.tokens), pred, gold);
  REQUIRE(r.repaired.labels.size() == 3);
  CHECK(r.repaired.tokens == gold);
  CHECK(r.repaired.labels[0] == Label::Other);
  CHECK(r.repaired.labels[1] == Label::Cause);
  CHECK(r.stats.inserted_other == 1);
  CHECK(r.stats.dropped_pred == 0);

  TokenLabelSeq noisy;
  noisy.tokens = {"extra", "variants", "can"};
  noisy.labels = {Label::Signal, Label::Cause, Label::Other};
  const auto r2 = project_labels(align({"variants", "can"}, noisy.tokens), noisy,
                                 {"variants", "can"});
  CHECK(r2.repaired.labels.size() == 2);
  CHECK(r2.stats.dropped_pred == 1);
}

TEST_CASE("project_labels: inconsistent alignment is rejected") {
  TokenLabelSeq pred;
  pred.tokens = {"a"};
  pred.labels = {Label::Cause};
  Alignment bogus;
  bogus.pairs.push_back({0, 0});
  bogus.pairs.push_back({1, std::nullopt});
  CHECK_THROWS_AS(project_labels(bogus, pred, {"a"}), std::invalid_argument);
  CHECK_THROWS_AS(project_labels(align({"a", "b"}, {"a"}), pred, {"a"}),
                  std::invalid_argument);
}

TEST_CASE("project_labels output length always equals gold length") {
  csk::SplitMix64 rng(9001);
  constexpr Label all[] = {Label::Cause, Label::Effect, Label::Condition,
                           Label::Action, Label::Signal, Label::Other};
  for (int iter = 0; iter < 1000; ++iter) {
    const auto gold = random_tokens(rng, 9);
    TokenLabelSeq pred;
    pred.tokens = random_tokens(rng, 9);
    for (std::size_t i = 0; i < pred.tokens.size(); ++i) {
      pred.labels.push_back(all[rng.below(6)]);
    }
    const auto r = project_labels(align(gold, pred.tokens), pred, gold);
    CHECK(r.repaired.labels.size() == gold.size());
    CHECK(r.repaired.tokens.size() == gold.size());
  }
}

TEST_CASE("span-boundary-aligned sentences reproduce the phrase multiset") {
  // Spans that respect token boundaries (with an unlabeled token between
  // consecutive spans) must survive the trip to token labels and back.
  csk::SplitMix64 rng(31337);
  static const std::vector<std::string> words = {"risk",    "insulin", "therapy",
                                                 "glucose", "early",   "fetal"};
  constexpr Label markable[] = {Label::Cause, Label::Effect, Label::Condition,
                                Label::Action, Label::Signal};
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<std::string> tokens;
    std::string plain;
    std::vector<std::pair<std::size_t, std::size_t>> bounds;  // char offsets
    for (std::size_t w = 0; w < n; ++w) {
      if (w) plain += " ";
      const std::string& word = words[rng.below(words.size())];
      bounds.emplace_back(plain.size(), plain.size() + word.size());
      plain += word;
      tokens.push_back(word);
    }

    csk::markup::AnnotatedSentence sentence;
    sentence.plain = plain;
    std::multiset<Label> span_labels;
    std::size_t next_free = 0;
    while (next_free < n && rng.below(3) != 0) {
      const std::size_t first = next_free + rng.below(n - next_free);
      if (first >= n) break;
      const std::size_t last = first + rng.below(std::min<std::size_t>(3, n - first));
      csk::markup::Phrase p;
      p.label = markable[rng.below(5)];
      p.start = bounds[first].first;
      p.end = bounds[last].second;
      p.text = plain.substr(p.start, p.end - p.start);
      sentence.phrases.push_back(p);
      span_labels.insert(p.label);
      next_free = last + 2;  // leave an unlabeled gap token
    }

    const TokenLabelSeq seq = to_token_labels(sentence);
    // Reconstruct phrases as maximal runs of identical non-O labels.
    std::multiset<Label> reconstructed;
    for (std::size_t i = 0; i < seq.labels.size();) {
      if (seq.labels[i] == Label::Other) {
        ++i;
        continue;
      }
      const Label run = seq.labels[i];
      while (i < seq.labels.size() && seq.labels[i] == run) ++i;
      reconstructed.insert(run);
    }
    CHECK(reconstructed == span_labels);
  }
}

TEST_CASE("CoNLL round trip") {
  const auto s1 =
      parse_sentence("<C>X</C> causes <E>Y Z</E>", ParseMode::Strict).sentence;
  const auto s2 = parse_sentence("plain text.", ParseMode::Strict).sentence;
  const std::vector<TokenLabelSeq> sentences = {to_token_labels(s1),
                                                to_token_labels(s2)};
  std::ostringstream out;
  write_conll(out, sentences);
  CHECK(out.str() ==
        "X\tC\ncauses\tO\nY\tE\nZ\tE\n\nplain\tO\ntext\tO\n.\tO\n");
  std::istringstream in(out.str());
  CHECK(read_conll(in) == sentences);

  std::istringstream bad("token-without-tab\n");
  CHECK_THROWS_AS(read_conll(bad), std::invalid_argument);
  std::istringstream badlabel("tok\tQ\n");
  CHECK_THROWS_AS(read_conll(badlabel), std::invalid_argument);
}
