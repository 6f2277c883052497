#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "advtok/io.hpp"
#include "advtok/types.hpp"

namespace advtok {

/// Seeded class-conditional token model. Tokens are split into per-class
/// pools; the embedding of a pool-c token carries a signal component on axis
/// c plus isotropic noise, so classifiers separate classes by pooled signal
/// while cosine neighborhoods (used for candidates) are noise-driven and mix
/// pools.
struct SynthConfig {
  std::uint64_t seed = 7;
  int vocab_size = 96;
  int dim = 16;
  int classes = 2;
  int train_examples = 400;
  int test_examples = 200;
  int min_length = 6;
  int max_length = 10;
  double purity = 0.8;   // probability a token comes from the label's pool
  double signal = 1.2;   // class-axis component magnitude
  double noise = 1.0;    // isotropic noise scale
  int candidates = 4;    // cosine nearest neighbors per position (excluding self)
};

struct SynthData {
  Matrix embeddings;  // vocab_size x dim
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> test;
  std::vector<CandidateRecord> train_candidates;
  std::vector<CandidateRecord> test_candidates;
  std::unordered_map<TokenId, double> fluency_costs;  // unigram surprisal (train)
};

SynthData generate_synthetic(const SynthConfig& config);

/// Top-m cosine neighbors of each token (self excluded, ties to the lowest
/// id); every position of a sequence gets the neighbors of its own token.
std::vector<std::vector<TokenId>> cosine_candidates(const Matrix& embeddings,
                                                    const std::vector<TokenId>& tokens,
                                                    int m);

}  // namespace advtok
