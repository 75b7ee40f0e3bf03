#include "csk/textsim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "csk/hash.hpp"
#include "csk/tokenlab.hpp"
#include "csk/utf8.hpp"

namespace csk::textsim {

namespace {

char32_t lower_ascii(char32_t c) {
  return (c >= U'A' && c <= U'Z') ? c - U'A' + U'a' : c;
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0x00A0;
}

// Lowercase + collapse whitespace runs to a single space, trimmed.
std::u32string normalize(std::string_view text) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : utf8::decode(text)) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(lower_ascii(c));
  }
  return out;
}

std::size_t levenshtein_u32(const std::u32string& a, const std::u32string& b) {
  const std::size_t m = a.size(), n = b.size();
  if (m == 0) return n;
  if (n == 0) return m;
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

bool has_alnum(std::string_view token) {
  for (char32_t c : utf8::decode(token)) {
    if ((c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') ||
        (c >= U'A' && c <= U'Z') || c > 127) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein_u32(utf8::decode(a), utf8::decode(b));
}

double levenshtein_norm(std::string_view a, std::string_view b) {
  const std::u32string na = normalize(a);
  const std::u32string nb = normalize(b);
  const std::size_t longest = std::max(na.size(), nb.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein_u32(na, nb)) /
         static_cast<double>(longest);
}

std::vector<std::string> similarity_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string& tok : tokenlab::tokenize(text)) {
    if (!has_alnum(tok)) continue;
    out.push_back(utf8::encode([&] {
      std::u32string t = utf8::decode(tok);
      for (char32_t& c : t) c = lower_ascii(c);
      return t;
    }()));
  }
  return out;
}

double jaccard_sim(std::string_view a, std::string_view b) {
  const auto ta = similarity_tokens(a);
  const auto tb = similarity_tokens(b);
  const std::set<std::string> sa(ta.begin(), ta.end());
  const std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t intersection = 0;
  for (const std::string& t : sa) intersection += sb.count(t);
  const std::size_t unions = sa.size() + sb.size() - intersection;
  return static_cast<double>(intersection) / static_cast<double>(unions);
}

double jaccard_dist(std::string_view a, std::string_view b) {
  return 1.0 - jaccard_sim(a, b);
}

double Embedding::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

Embedding bow_embed(std::string_view text, std::size_t dim) {
  if (dim < 8) throw std::invalid_argument("embedding dimension must be >= 8");
  Embedding e;
  e.values.assign(dim, 0.0);
  for (const std::string& tok : similarity_tokens(text)) {
    e.values[fnv1a64(tok) % dim] += 1.0;
  }
  const double n = e.norm();
  if (n > 0.0) {
    for (double& v : e.values) v /= n;
  }
  return e;
}

double cosine(const Embedding& u, const Embedding& v) {
  if (u.values.size() != v.values.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" +
                                std::to_string(u.values.size()) + " vs " +
                                std::to_string(v.values.size()) + ")");
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) dot += u.values[i] * v.values[i];
  return dot / (nu * nv);
}

std::vector<Embedding> BowEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(bow_embed(t, dim_));
  return out;
}

}  // namespace csk::textsim
