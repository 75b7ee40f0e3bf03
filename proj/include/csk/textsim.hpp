#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// String- and vector-similarity primitives used by the agreement and
// evaluation modules. All of them are deterministic and documented in the
// README so results can be reproduced bit-exactly elsewhere.

namespace csk::textsim {

// Classical edit distance, unit costs, over Unicode scalar values.
std::size_t levenshtein(std::string_view a, std::string_view b);

// levenshtein(a', b') / max(|a'|, |b'|) where a', b' are lowercased and
// whitespace-collapsed; 0 when both are empty.
double levenshtein_norm(std::string_view a, std::string_view b);

// Word-token sets (lowercased, punctuation-only tokens dropped):
// |A n B| / |A u B|. Both empty -> 1.
double jaccard_sim(std::string_view a, std::string_view b);
double jaccard_dist(std::string_view a, std::string_view b);

// Tokens as used by jaccard_sim and bow_embed.
std::vector<std::string> similarity_tokens(std::string_view text);

struct Embedding {
  std::vector<double> values;

  double norm() const;
  bool operator==(const Embedding&) const = default;
};

// Deterministic bag-of-words embedding: each token is hashed with 64-bit
// FNV-1a into `dim` buckets, term counts accumulated, then L2-normalized.
// The zero vector is returned only for token-free text. dim must be >= 8.
Embedding bow_embed(std::string_view text, std::size_t dim = 512);

// dot(u, v) / (|u| |v|); 0 if either norm is 0. Dimension mismatch throws.
double cosine(const Embedding& u, const Embedding& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
};

class BowEmbedder : public Embedder {
 public:
  explicit BowEmbedder(std::size_t dim = 512) : dim_(dim) {}
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

 private:
  std::size_t dim_;
};

}  // namespace csk::textsim
