#include "csk/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "csk/hash.hpp"
#include "csk/utf8.hpp"

namespace csk::corpus {

namespace {

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0x00A0;
}

bool is_upper_or_digit(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
}

bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

const std::array<std::u32string, 10> kAbbreviations = {
    U"e.g.", U"i.e.", U"dr.", U"fig.", U"figs.", U"et al.",
    U"vs.",  U"etc.", U"no.", U"cf."};

// Recognizes a known annotation tag at position i; unknown tag-like text is
// treated as ordinary characters here, matching lenient parsing.
std::size_t known_tag_length(const std::u32string& text, std::size_t i,
                             bool* closing, markup::Label* label) {
  if (text[i] != U'<') return 0;
  std::size_t j = i + 1;
  *closing = false;
  if (j < text.size() && text[j] == U'/') {
    *closing = true;
    ++j;
  }
  std::string name;
  while (j < text.size() && ((text[j] >= U'A' && text[j] <= U'Z') ||
                             (text[j] >= U'a' && text[j] <= U'z'))) {
    name.push_back(static_cast<char>(text[j]));
    ++j;
  }
  if (name.empty() || j >= text.size() || text[j] != U'>') return 0;
  const auto l = markup::label_from_surface(name);
  if (!l) return 0;
  *label = *l;
  return j - i + 1;
}

// The word ending at the terminator (inclusive), lowercased, leading
// punctuation stripped: "(e.g." -> "e.g.".
std::u32string word_before(const std::u32string& text, std::size_t term_pos) {
  std::size_t begin = term_pos;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  std::u32string word = text.substr(begin, term_pos - begin + 1);
  std::size_t strip = 0;
  while (strip < word.size() && (word[strip] == U'(' || word[strip] == U'[' ||
                                 word[strip] == U'"' || word[strip] == 0x201C)) {
    ++strip;
  }
  word.erase(0, strip);
  for (char32_t& c : word) {
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  }
  return word;
}

bool is_abbreviation(const std::u32string& text, std::size_t term_pos) {
  const std::u32string word = word_before(text, term_pos);
  for (const std::u32string& abbr : kAbbreviations) {
    if (word == abbr) return true;
    // Multiword stop-list entries ("et al.") compare against the tail.
    if (abbr.find(U' ') != std::u32string::npos && word.size() < abbr.size()) {
      const std::size_t pos = term_pos + 1 - abbr.size();
      if (term_pos + 1 >= abbr.size() &&
          text.compare(pos, abbr.size(), abbr) == 0) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> segment_sentences(std::string_view text) {
  const std::u32string t = utf8::decode(text);
  std::vector<std::string> sentences;

  int span_depth = 0;
  int paren_depth = 0;
  std::size_t sentence_start = 0;
  bool in_sentence = false;

  auto flush = [&](std::size_t end) {  // [sentence_start, end)
    std::size_t a = sentence_start, b = end;
    while (a < b && is_space(t[a])) ++a;
    while (b > a && is_space(t[b - 1])) --b;
    if (a < b) {
      sentences.push_back(utf8::encode(std::u32string_view(t).substr(a, b - a)));
    }
    in_sentence = false;
  };

  std::size_t i = 0;
  while (i < t.size()) {
    bool closing = false;
    markup::Label label{};
    const std::size_t tag_len = known_tag_length(t, i, &closing, &label);
    if (tag_len > 0) {
      if (!in_sentence) {
        sentence_start = i;
        in_sentence = true;
      }
      span_depth += closing ? -1 : 1;
      if (span_depth < 0) span_depth = 0;
      i += tag_len;
      continue;
    }
    const char32_t c = t[i];
    if (!is_space(c) && !in_sentence) {
      sentence_start = i;
      in_sentence = true;
    }
    if (c == U'(') ++paren_depth;
    if (c == U')' && paren_depth > 0) --paren_depth;

    if (is_terminator(c) && span_depth == 0 && paren_depth == 0) {
      // Consume a run of terminators as one boundary candidate.
      std::size_t last = i;
      while (last + 1 < t.size() && is_terminator(t[last + 1])) ++last;
      if (!(c == U'.' && last == i && is_abbreviation(t, i))) {
        // Boundary only if whitespace follows, then (skipping tags) an
        // uppercase letter or digit starts the next sentence.
        std::size_t j = last + 1;
        if (j < t.size() && is_space(t[j])) {
          while (j < t.size() && is_space(t[j])) ++j;
          std::size_t k = j;
          bool c2;
          markup::Label l2{};
          std::size_t tl;
          while (k < t.size() && (tl = known_tag_length(t, k, &c2, &l2)) > 0) {
            k += tl;
          }
          if (k < t.size() && is_upper_or_digit(t[k])) {
            flush(last + 1);
            i = j;
            continue;
          }
        } else if (j >= t.size()) {
          flush(last + 1);
          i = j;
          continue;
        }
      }
      i = last + 1;
      continue;
    }
    ++i;
  }
  if (in_sentence) flush(t.size());
  return sentences;
}

DocumentParse parse_document(std::string_view doc_id, std::string_view text,
                             markup::ParseMode mode) {
  DocumentParse out;
  out.doc.doc_id = std::string(doc_id);
  std::size_t index = 0;
  for (const std::string& raw : segment_sentences(text)) {
    // '.' keeps the id filesystem-safe for prompt dumps named by sentence id.
    const std::string id = std::string(doc_id) + "." + std::to_string(index++);
    markup::ParseResult r = markup::parse_sentence(raw, mode, id);
    out.doc.sentences.push_back(std::move(r.sentence));
    out.diagnostics.push_back(std::move(r.diagnostics));
  }
  return out;
}

std::vector<CorpusRecord> build_corpus(const std::vector<DocumentInput>& docs,
                                       markup::ParseMode mode) {
  std::vector<CorpusRecord> records;
  for (const DocumentInput& doc : docs) {
    DocumentParse parsed = parse_document(doc.doc_id, doc.text, mode);
    for (markup::AnnotatedSentence& s : parsed.doc.sentences) {
      CorpusRecord rec;
      rec.doc_id = doc.doc_id;
      rec.is_causal = !s.phrases.empty();
      rec.sentence = std::move(s);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  seeded_shuffle(indices, seed);
  return indices;
}

void validate(std::size_t count, const SplitSpec& spec) {
  if (count == 0) throw std::invalid_argument("cannot split an empty corpus");
  if (const auto* h = std::get_if<HoldoutMode>(&spec.mode)) {
    if (!(h->test_fraction > 0.0 && h->test_fraction < 1.0)) {
      throw std::invalid_argument("test fraction must be in (0, 1)");
    }
  } else {
    const int k = std::get<KFoldMode>(spec.mode).k;
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    if (static_cast<std::size_t>(k) > count) {
      throw std::invalid_argument("k exceeds the number of records");
    }
  }
}

}  // namespace

SplitResult split(std::size_t count, const SplitSpec& spec) {
  validate(count, spec);
  SplitResult result;
  result.spec = spec;
  const std::vector<std::size_t> order = shuffled_indices(count, spec.seed);

  if (const auto* h = std::get_if<HoldoutMode>(&spec.mode)) {
    const auto test_n = static_cast<std::size_t>(
        std::llround(h->test_fraction * static_cast<double>(count)));
    if (test_n == 0 || test_n >= count) {
      throw std::invalid_argument("test fraction yields an empty partition");
    }
    HoldoutSplit parts;
    parts.test.assign(order.begin(), order.begin() + test_n);
    parts.train.assign(order.begin() + test_n, order.end());
    result.partitions = std::move(parts);
  } else {
    const auto k = static_cast<std::size_t>(std::get<KFoldMode>(spec.mode).k);
    FoldSplit folds(k);
    const std::size_t base = count / k;
    const std::size_t extra = count % k;  // first `extra` folds get one more
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = base + (f < extra ? 1 : 0);
      folds[f].assign(order.begin() + pos, order.begin() + pos + size);
      pos += size;
    }
    result.partitions = std::move(folds);
  }
  return result;
}

SplitResult split_grouped(const std::vector<CorpusRecord>& records,
                          const SplitSpec& spec) {
  validate(records.size(), spec);

  std::vector<std::string> doc_order;
  std::map<std::string, std::vector<std::size_t>> by_doc;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = by_doc.try_emplace(records[i].doc_id);
    if (inserted) doc_order.push_back(records[i].doc_id);
    it->second.push_back(i);
  }
  seeded_shuffle(doc_order, spec.seed);

  SplitResult result;
  result.spec = spec;
  if (const auto* h = std::get_if<HoldoutMode>(&spec.mode)) {
    const auto target = static_cast<std::size_t>(std::llround(
        h->test_fraction * static_cast<double>(records.size())));
    HoldoutSplit parts;
    std::size_t test_size = 0;
    for (const std::string& doc : doc_order) {
      auto& bucket = (test_size < target) ? parts.test : parts.train;
      for (std::size_t idx : by_doc[doc]) bucket.push_back(idx);
      if (&bucket == &parts.test) test_size += by_doc[doc].size();
    }
    if (parts.test.empty() || parts.train.empty()) {
      throw std::invalid_argument(
          "grouped holdout cannot produce two non-empty partitions");
    }
    result.partitions = std::move(parts);
  } else {
    const auto k = static_cast<std::size_t>(std::get<KFoldMode>(spec.mode).k);
    if (doc_order.size() < k) {
      throw std::invalid_argument("fewer documents than folds");
    }
    FoldSplit folds(k);
    for (const std::string& doc : doc_order) {
      // Next document goes to the currently smallest fold.
      std::size_t smallest = 0;
      for (std::size_t f = 1; f < k; ++f) {
        if (folds[f].size() < folds[smallest].size()) smallest = f;
      }
      for (std::size_t idx : by_doc[doc]) folds[smallest].push_back(idx);
    }
    result.partitions = std::move(folds);
  }
  return result;
}

}  // namespace csk::corpus
