#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csk/promptkit.hpp"
#include "test_support.hpp"

using namespace csk::promptkit;
using csk::markup::Label;
using csk::markup::ParseMode;
using csk::markup::parse_sentence;

namespace {

AnnotatedSentence sentence_of(const std::string& raw, const std::string& id = "") {
  return parse_sentence(raw, ParseMode::Strict, id).sentence;
}

}  // namespace

TEST_CASE("zero-shot prompt is instruction plus target") {
  PromptSpec spec;
  spec.shots = 0;
  spec.instruction = "Tag the sentence.";
  const std::string prompt = build_prompt(spec, "Diabetes raises risk.");
  CHECK(prompt == "Tag the sentence.\n\nInput: Diabetes raises risk.\nOutput:");
}

TEST_CASE("k-shot prompt renders every sampled example, deterministically") {
  PromptSpec spec;
  spec.shots = 4;
  spec.selection_seed = 9;
  spec.example_pool = {
      sentence_of("<C>a1</C> raises <E>b1</E>."),
      sentence_of("<C>a2</C> raises <E>b2</E>."),
      sentence_of("<CO>if a3</CO>, <A>do b3</A>."),
      sentence_of("<S>may</S> relate."),
  };
  const std::string target = "Target sentence here.";
  const std::string prompt = build_prompt(spec, target);
  for (const auto& example : spec.example_pool) {
    CHECK(prompt.find(example.raw) != std::string::npos);
    CHECK(prompt.find("Input: " + example.plain) != std::string::npos);
  }
  CHECK(prompt.find("Input: Target sentence here.\nOutput:") ==
        prompt.size() - std::string("Input: Target sentence here.\nOutput:").size());

  CHECK(build_prompt(spec, target) == prompt);  // byte-deterministic

  PromptSpec reseeded = spec;
  reseeded.selection_seed = 10;
  reseeded.shots = 2;
  PromptSpec sampled = spec;
  sampled.shots = 2;
  // Different seeds select/order shots differently (with 4 candidates the
  // two-element sample differs for these seeds).
  CHECK(build_prompt(reseeded, target) != build_prompt(sampled, target));
}

TEST_CASE("more shots than pool entries is an error") {
  PromptSpec spec;
  spec.shots = 3;
  spec.example_pool = {sentence_of("<C>a</C> b.")};
  CHECK_THROWS_AS(build_prompt(spec, "t"), std::invalid_argument);
}

TEST_CASE("instruction records render the bracketed phrase-label list") {
  const auto records =
      export_instruct({sentence_of("<C>X</C> causes trouble.")}, "Extract.");
  REQUIRE(records.size() == 1);
  CHECK(records[0].output == "['X-cause']");
  CHECK(render_instruct_line(records[0]) ==
        "###Instruction: Extract. ###Input: X causes trouble. ###Output: "
        "['X-cause']");

  const auto untagged = export_instruct({sentence_of("Nothing here.")}, "I");
  CHECK(untagged[0].output == "[]");

  const auto test_mode =
      export_instruct({sentence_of("<C>X</C> causes trouble.")}, "I",
                      ExportMode::Test);
  CHECK(test_mode[0].output.empty());
}

TEST_CASE("guideline sentence exports cause, effect and action items") {
  const auto records = export_instruct(
      {sentence_of(
          "<C>Pregnant persons with gestational diabetes</C> are at "
          "<E>increased risk for maternal and fetal complications</E> and may "
          "benefit from <A>early identification and treatment</A>.")},
      std::string(kDefaultListInstruction));
  CHECK(records[0].output ==
        "['Pregnant persons with gestational diabetes-cause', 'increased risk "
        "for maternal and fetal complications-effect', 'early identification "
        "and treatment-action']");
}

TEST_CASE("tagged model output parses leniently into predictions") {
  const auto parsed = parse_tagged_output(
      "<C>Gestational diabetes</C> has also been associated with an "
      "<E>increased risk of several long-term health outcomes</E>",
      "s7");
  REQUIRE(parsed.phrases.size() == 2);
  CHECK(parsed.phrases[0].label == Label::Cause);
  CHECK(parsed.phrases[0].text == "Gestational diabetes");
  CHECK(parsed.phrases[0].sentence_id == "s7");
  CHECK(parsed.phrases[1].label == Label::Effect);
  CHECK(parsed.phrases[0].raw_source.find("<C>") != std::string::npos);

  const auto broken =
      parse_tagged_output("<C>kept</C> and <E>dropped because unclosed");
  REQUIRE(broken.phrases.size() == 1);
  CHECK(broken.phrases[0].text == "kept");
  CHECK_FALSE(broken.diagnostics.empty());

  CHECK(parse_tagged_output("no tags at all").phrases.empty());
}

TEST_CASE("instruct-format output parses items and label suffixes") {
  const auto one = parse_instruct_output("['increased risk-effect']");
  REQUIRE(one.phrases.size() == 1);
  CHECK(one.phrases[0].text == "increased risk");
  CHECK(one.phrases[0].label == Label::Effect);

  // The last '-labelword' wins; internal hyphens stay in the text.
  const auto hyphen = parse_instruct_output("['pre-existing diabetes-cause']");
  REQUIRE(hyphen.phrases.size() == 1);
  CHECK(hyphen.phrases[0].text == "pre-existing diabetes");
  CHECK(hyphen.phrases[0].label == Label::Cause);

  // Space before the dash, as real fine-tuning data sometimes renders it.
  const auto spaced =
      parse_instruct_output("['with gestational diabetes -cause']");
  REQUIRE(spaced.phrases.size() == 1);
  CHECK(spaced.phrases[0].text == "with gestational diabetes");
  CHECK(spaced.phrases[0].label == Label::Cause);

  const auto unlabeled = parse_instruct_output("['some phrase']");
  REQUIRE(unlabeled.phrases.size() == 1);
  CHECK_FALSE(unlabeled.phrases[0].label.has_value());
  CHECK(unlabeled.phrases[0].text == "some phrase");

  const auto multi = parse_instruct_output(
      "Sure, here you go: ['a, b-cause', 'c-effect', 'd'] Hope that helps!");
  REQUIRE(multi.phrases.size() == 3);
  CHECK(multi.phrases[0].text == "a, b");
  CHECK(multi.phrases[1].label == Label::Effect);
  CHECK_FALSE(multi.phrases[2].label.has_value());

  CHECK(parse_instruct_output("[]").phrases.empty());
  CHECK(parse_instruct_output("[]").diagnostics.empty());

  const auto none = parse_instruct_output("no list in sight");
  CHECK(none.phrases.empty());
  REQUIRE(none.diagnostics.size() == 1);
}

TEST_CASE("tagged parse never yields empty texts or O labels") {
  csk::SplitMix64 rng(1111);
  const std::vector<std::string> fragments = {"<C>", "</C>", "<E>",  "</E>",
                                              "<A>", "</A>", "word", " ",
                                              "<O>", "</O>", "x"};
  for (int iter = 0; iter < 500; ++iter) {
    std::string soup;
    for (std::size_t k = rng.below(10); k > 0; --k) {
      soup += fragments[rng.below(fragments.size())];
    }
    for (const auto& phrase : parse_tagged_output(soup).phrases) {
      CHECK_FALSE(phrase.text.empty());
      REQUIRE(phrase.label.has_value());
      CHECK(*phrase.label != Label::Other);
    }
  }
}

TEST_CASE("instruct records round-trip word-aligned annotations") {
  csk::SplitMix64 rng(22222);
  static const std::vector<std::string> words = {"risk",  "insulin", "early",
                                                 "fetal", "glucose", "care"};
  constexpr Label markable[] = {Label::Cause, Label::Effect, Label::Condition,
                                Label::Action, Label::Signal};
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t n = 3 + rng.below(8);
    std::string plain;
    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    for (std::size_t w = 0; w < n; ++w) {
      if (w) plain += " ";
      const std::string& word = words[rng.below(words.size())];
      bounds.emplace_back(plain.size(), plain.size() + word.size());
      plain += word;
    }
    AnnotatedSentence s;
    s.plain = plain;
    std::size_t next = 0;
    while (next + 1 < n && rng.below(2) == 0) {
      const std::size_t first = next + rng.below(n - next);
      if (first >= n) break;
      const std::size_t last =
          first + rng.below(std::min<std::size_t>(2, n - first));
      csk::markup::Phrase p;
      p.label = markable[rng.below(5)];
      p.start = bounds[first].first;
      p.end = bounds[last].second;
      p.text = plain.substr(p.start, p.end - p.start);
      s.phrases.push_back(p);
      next = last + 2;
    }

    const auto records = export_instruct({s}, "Extract the spans.");
    const std::string line = render_instruct_line(records[0]);
    const auto out_pos = line.find("###Output: ");
    REQUIRE(out_pos != std::string::npos);
    const auto parsed =
        parse_instruct_output(line.substr(out_pos), s.sentence_id);
    REQUIRE(parsed.phrases.size() == s.phrases.size());
    for (std::size_t i = 0; i < parsed.phrases.size(); ++i) {
      CHECK(parsed.phrases[i].text == s.phrases[i].text);
      REQUIRE(parsed.phrases[i].label.has_value());
      CHECK(*parsed.phrases[i].label == s.phrases[i].label);
    }
  }
}
