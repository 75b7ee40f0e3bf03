#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "csk/corpus.hpp"
#include "csk/json_io.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

using namespace csk::corpus;

namespace {

std::string non_ws_chars(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\f' && c != '\v') {
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("segmenter splits simple sentences") {
  CHECK(segment_sentences("A causes B. C follows D.") ==
        std::vector<std::string>{"A causes B.", "C follows D."});
  CHECK(segment_sentences("Done! Next? Sure.") ==
        std::vector<std::string>{"Done!", "Next?", "Sure."});
  CHECK(segment_sentences("") == std::vector<std::string>{});
  CHECK(segment_sentences("   \n ") == std::vector<std::string>{});
  CHECK(segment_sentences("no terminator at all") ==
        std::vector<std::string>{"no terminator at all"});
}

TEST_CASE("segmenter keeps abbreviations and decimals together") {
  CHECK(segment_sentences("Risk is higher (e.g. 5.8% to 9.2%). Next.") ==
        std::vector<std::string>{"Risk is higher (e.g. 5.8% to 9.2%).", "Next."});
  CHECK(segment_sentences("Dr. Smith recommends screening. Fig. 2 shows results.") ==
        std::vector<std::string>{"Dr. Smith recommends screening.",
                                 "Fig. 2 shows results."});
  CHECK(segment_sentences("Prevalence was 5.8% overall. Treatment helps.") ==
        std::vector<std::string>{"Prevalence was 5.8% overall.",
                                 "Treatment helps."});
  CHECK(segment_sentences("See et al. 2020 for details.") ==
        std::vector<std::string>{"See et al. 2020 for details."});
  // Lowercase continuation is not a boundary.
  CHECK(segment_sentences("He saw. the dog") ==
        std::vector<std::string>{"He saw. the dog"});
}

TEST_CASE("segmenter never breaks inside an open span") {
  CHECK(segment_sentences("<C>A. B</C> causes X.") ==
        std::vector<std::string>{"<C>A. B</C> causes X."});
  CHECK(segment_sentences("A causes B. <C>C</C> follows.") ==
        std::vector<std::string>{"A causes B.", "<C>C</C> follows."});
  CHECK(segment_sentences("<E>Risk rises. A lot</E> more. Then.") ==
        std::vector<std::string>{"<E>Risk rises. A lot</E> more.", "Then."});
}

TEST_CASE("segmentation preserves every non-whitespace character") {
  csk::SplitMix64 rng(1234);
  static const std::vector<std::string> pieces = {
      "Alpha causes beta.",  "Risk (e.g. 5.8%) rises!",
      "<C>A. B</C> leads.",  "Dr. Lee disagrees?",
      "Values hit 9.2%.",    "No terminator here",
      "<E>Effect. Still</E>.",
  };
  for (int iter = 0; iter < 200; ++iter) {
    std::string text;
    const std::size_t n = rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      text += pieces[rng.below(pieces.size())];
      text += (rng.below(2) == 0) ? " " : "\n ";
    }
    std::string joined;
    for (const std::string& s : segment_sentences(text)) joined += s + " ";
    CHECK(non_ws_chars(joined) == non_ws_chars(text));
  }
}

TEST_CASE("build_corpus flags causal sentences") {
  const std::vector<DocumentInput> docs = {
      {"g1", "Plain opener. <C>Diabetes</C> raises <E>risk</E>. Plain closer."},
  };
  const auto records = build_corpus(docs);
  REQUIRE(records.size() == 3);
  CHECK(records[0].sentence.sentence_id == "g1.0");
  CHECK_FALSE(records[0].is_causal);
  CHECK(records[1].is_causal);
  CHECK(records[1].sentence.phrases.size() == 2);
  CHECK_FALSE(records[2].is_causal);

  CHECK(build_corpus({}).empty());

  // Several documents pool in order.
  const auto pooled = build_corpus({{"a", "One. Two."}, {"b", "Three."}});
  REQUIRE(pooled.size() == 3);
  CHECK(pooled[0].doc_id == "a");
  CHECK(pooled[2].doc_id == "b");
  CHECK(pooled[2].sentence.sentence_id == "b.0");
}

TEST_CASE("build_corpus propagates strict errors only when asked") {
  const std::vector<DocumentInput> docs = {{"g", "<C>broken. Next one."}};
  CHECK_NOTHROW(build_corpus(docs));  // lenient default
  CHECK_THROWS_AS(build_corpus(docs, csk::markup::ParseMode::Strict),
                  csk::markup::ParseError);
}

TEST_CASE("holdout split: sizes, disjointness, determinism") {
  SplitSpec spec;
  spec.seed = 7;
  spec.mode = HoldoutMode{0.2};
  const SplitResult result = split(10, spec);
  const auto& parts = std::get<HoldoutSplit>(result.partitions);
  CHECK(parts.test.size() == 2);
  CHECK(parts.train.size() == 8);

  std::vector<std::size_t> all = parts.train;
  all.insert(all.end(), parts.test.begin(), parts.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(10);
  for (std::size_t i = 0; i < 10; ++i) expected[i] = i;
  CHECK(all == expected);

  const SplitResult again = split(10, spec);
  CHECK(std::get<HoldoutSplit>(again.partitions).train == parts.train);
  CHECK(std::get<HoldoutSplit>(again.partitions).test == parts.test);

  SplitSpec other = spec;
  other.seed = 8;
  CHECK(std::get<HoldoutSplit>(split(10, other).partitions).test != parts.test);
}

TEST_CASE("kfold split balances fold sizes") {
  SplitSpec spec;
  spec.seed = 3;
  spec.mode = KFoldMode{4};
  const auto folds = std::get<FoldSplit>(split(10, spec).partitions);
  REQUIRE(folds.size() == 4);
  std::multiset<std::size_t> sizes;
  std::vector<std::size_t> all;
  for (const auto& fold : folds) {
    sizes.insert(fold.size());
    all.insert(all.end(), fold.begin(), fold.end());
  }
  CHECK(sizes == std::multiset<std::size_t>{2, 2, 3, 3});
  std::sort(all.begin(), all.end());
  CHECK(all.size() == 10);
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("split validation errors") {
  SplitSpec spec;
  spec.mode = KFoldMode{11};
  CHECK_THROWS_AS(split(10, spec), std::invalid_argument);
  spec.mode = KFoldMode{1};
  CHECK_THROWS_AS(split(10, spec), std::invalid_argument);
  spec.mode = HoldoutMode{0.01};  // rounds to an empty test set
  CHECK_THROWS_AS(split(10, spec), std::invalid_argument);
  spec.mode = HoldoutMode{0.999};  // rounds to an empty train set
  CHECK_THROWS_AS(split(10, spec), std::invalid_argument);
  spec.mode = HoldoutMode{1.5};
  CHECK_THROWS_AS(split(10, spec), std::invalid_argument);
  spec.mode = HoldoutMode{0.5};
  CHECK_THROWS_AS(split(0, spec), std::invalid_argument);
}

TEST_CASE("splits partition the records for arbitrary sizes") {
  csk::SplitMix64 rng(99);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 2 + rng.below(60);
    SplitSpec spec;
    spec.seed = rng.next();
    std::size_t total = 0;
    std::vector<std::size_t> all;
    if (rng.below(2) == 0) {
      spec.mode = HoldoutMode{0.1 + 0.8 * rng.unit()};
      try {
        const auto parts = std::get<HoldoutSplit>(split(n, spec).partitions);
        all = parts.train;
        all.insert(all.end(), parts.test.begin(), parts.test.end());
        total = parts.train.size() + parts.test.size();
      } catch (const std::invalid_argument&) {
        continue;  // legitimately empty partition for extreme fractions
      }
    } else {
      spec.mode = KFoldMode{2 + static_cast<int>(rng.below(5))};
      if (static_cast<std::size_t>(std::get<KFoldMode>(spec.mode).k) > n) continue;
      const auto folds = std::get<FoldSplit>(split(n, spec).partitions);
      std::size_t smallest = n, largest = 0;
      for (const auto& fold : folds) {
        total += fold.size();
        all.insert(all.end(), fold.begin(), fold.end());
        smallest = std::min(smallest, fold.size());
        largest = std::max(largest, fold.size());
      }
      CHECK(largest - smallest <= 1);
    }
    CHECK(total == n);
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  }
}

TEST_CASE("grouped split keeps documents whole") {
  std::vector<CorpusRecord> records;
  for (int d = 0; d < 6; ++d) {
    for (int s = 0; s < 4; ++s) {
      CorpusRecord rec;
      rec.doc_id = "doc" + std::to_string(d);
      records.push_back(rec);
    }
  }
  SplitSpec spec;
  spec.seed = 11;
  spec.mode = HoldoutMode{0.25};
  const auto parts = std::get<HoldoutSplit>(split_grouped(records, spec).partitions);
  std::map<std::string, int> where;
  for (std::size_t i : parts.train) CHECK(where.emplace(records[i].doc_id, 0).first->second == 0);
  for (std::size_t i : parts.test) {
    auto [it, inserted] = where.emplace(records[i].doc_id, 1);
    CHECK(it->second == 1);  // a doc never appears in both partitions
  }
  CHECK(parts.train.size() + parts.test.size() == records.size());
}

TEST_CASE("corpus JSONL and split manifest round-trip") {
  const auto records = build_corpus(
      {{"g1", "<C>Diabetes</C> raises <E>risk</E>. Untagged tail."}});
  std::ostringstream out;
  csk::jsonio::write_corpus_jsonl(out, records);
  std::istringstream in(out.str());
  const auto loaded = csk::jsonio::read_corpus_jsonl(in);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].doc_id == records[i].doc_id);
    CHECK(loaded[i].is_causal == records[i].is_causal);
    CHECK(loaded[i].sentence == records[i].sentence);
  }

  SplitSpec spec;
  spec.seed = 21;
  spec.mode = KFoldMode{2};
  const SplitResult result = split(5, spec);
  const auto j = csk::jsonio::split_to_json(result);
  const SplitResult back = csk::jsonio::split_from_json(j);
  CHECK(back.spec.seed == 21);
  CHECK(std::get<FoldSplit>(back.partitions) ==
        std::get<FoldSplit>(result.partitions));

  SplitSpec h;
  h.seed = 1;
  h.mode = HoldoutMode{0.4};
  const auto jh = csk::jsonio::split_to_json(split(5, h));
  const SplitResult backh = csk::jsonio::split_from_json(jh);
  CHECK(std::get<HoldoutSplit>(backh.partitions).test.size() == 2);
}
