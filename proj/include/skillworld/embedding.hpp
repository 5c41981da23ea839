#pragma once

// Hashed bag-of-tokens embeddings. No learned weights: each token expands to a
// fixed pseudo-random vector derived from its hash, and a key embeds as the sum
// over its tokens. Identical keys therefore embed identically on any platform,
// independent of the run seed.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "skillworld/errors.hpp"
#include "skillworld/rng.hpp"

namespace skillworld {

struct Embedding {
  std::vector<double> v;
  double norm = 0.0;
};

inline Embedding embed(std::span<const std::string> tokens, int d_emb) {
  if (d_emb <= 0) throw ShapeError("embed: d_emb must be positive");
  if (tokens.empty()) throw InvalidKey("embed: key has no tokens");
  Embedding e;
  e.v.assign(static_cast<std::size_t>(d_emb), 0.0);
  for (const std::string& tok : tokens) {
    if (tok.empty()) throw InvalidKey("embed: empty token in key");
    RngStream rs = RngStream::derive(hash64(tok), "token-embed");
    for (int i = 0; i < d_emb; ++i) e.v[static_cast<std::size_t>(i)] += rs.uniform(-1.0, 1.0);
  }
  double s2 = 0.0;
  for (double x : e.v) s2 += x * x;
  e.norm = std::sqrt(s2);
  return e;
}

inline double cosine(const Embedding& a, const Embedding& b) {
  if (a.v.size() != b.v.size()) throw ShapeError("cosine: dimension mismatch");
  if (a.norm <= 0.0 || b.norm <= 0.0) throw DegenerateEmbedding("cosine: zero-norm embedding");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) dot += a.v[i] * b.v[i];
  double c = dot / (a.norm * b.norm);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace skillworld
