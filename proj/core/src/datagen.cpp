#include "advtok/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advtok/rng.hpp"
#include "advtok/victim.hpp"

namespace advtok {

namespace {

double gaussian(CounterRng& rng) {
  // Box-Muller from the deterministic counter stream.
  const double u1 = std::max(rng.next_unit(), 1e-300);
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<DatasetRecord> draw_split(const SynthConfig& config, int count,
                                      std::uint64_t split_tag) {
  std::vector<DatasetRecord> records;
  records.reserve(static_cast<std::size_t>(count));
  const int pool_size = config.vocab_size / config.classes;
  for (int n = 0; n < count; ++n) {
    CounterRng rng(StreamKey{config.seed, static_cast<std::uint64_t>(n), split_tag, 0,
                             StreamPhase::kData});
    DatasetRecord rec;
    rec.id = n;
    const int label = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(config.classes));
    rec.label = label;
    const int length =
        config.min_length +
        static_cast<int>(rng.next_u64() %
                         static_cast<std::uint64_t>(config.max_length - config.min_length + 1));
    rec.tokens.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
      int pool = label;
      if (!rng.bernoulli(config.purity)) {
        // Uniform over the other pools.
        const int shift = 1 + static_cast<int>(rng.next_u64() %
                                               static_cast<std::uint64_t>(config.classes - 1));
        pool = (label + shift) % config.classes;
      }
      const int within = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(pool_size));
      rec.tokens.push_back(static_cast<TokenId>(pool * pool_size + within));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CandidateRecord> candidates_for(const Matrix& embeddings,
                                            const std::vector<DatasetRecord>& records,
                                            int m) {
  std::vector<CandidateRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    out.push_back(CandidateRecord{rec.id, cosine_candidates(embeddings, rec.tokens, m)});
  }
  return out;
}

}  // namespace

std::vector<std::vector<TokenId>> cosine_candidates(const Matrix& embeddings,
                                                    const std::vector<TokenId>& tokens,
                                                    int m) {
  const int vocab = static_cast<int>(embeddings.rows());
  Matrix normalized = embeddings;
  for (int v = 0; v < vocab; ++v) {
    const double norm = normalized.row(v).norm();
    if (norm > 0.0) normalized.row(v) /= norm;
  }

  std::vector<std::vector<TokenId>> per_position;
  per_position.reserve(tokens.size());
  std::vector<int> order(static_cast<std::size_t>(vocab));
  for (TokenId token : tokens) {
    const Vector sims = normalized * normalized.row(token).transpose();
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return sims[a] > sims[b];
    });
    std::vector<TokenId> neighbors;
    neighbors.reserve(static_cast<std::size_t>(m));
    for (int v : order) {
      if (v == token) continue;
      neighbors.push_back(static_cast<TokenId>(v));
      if (static_cast<int>(neighbors.size()) == m) break;
    }
    per_position.push_back(std::move(neighbors));
  }
  return per_position;
}

SynthData generate_synthetic(const SynthConfig& config) {
  if (config.classes < 2 || config.vocab_size < 2 * config.classes ||
      config.dim < config.classes + 1 || config.min_length < 1 ||
      config.max_length < config.min_length || config.candidates < 0) {
    throw std::invalid_argument("generate_synthetic: invalid configuration");
  }
  if (config.vocab_size % config.classes != 0) {
    throw std::invalid_argument("generate_synthetic: vocab_size must be divisible by classes");
  }

  SynthData data;
  data.embeddings = Matrix::Zero(config.vocab_size, config.dim);
  const int pool_size = config.vocab_size / config.classes;
  for (int v = 0; v < config.vocab_size; ++v) {
    CounterRng rng(StreamKey{config.seed, static_cast<std::uint64_t>(v), 0, 0,
                             StreamPhase::kWeights});
    const int pool = v / pool_size;
    data.embeddings(v, pool) = config.signal + 0.2 * config.noise * gaussian(rng);
    for (int j = config.classes; j < config.dim; ++j) {
      data.embeddings(v, j) = config.noise * gaussian(rng);
    }
  }

  data.train = draw_split(config, config.train_examples, 1);
  data.test = draw_split(config, config.test_examples, 2);
  data.train_candidates = candidates_for(data.embeddings, data.train, config.candidates);
  data.test_candidates = candidates_for(data.embeddings, data.test, config.candidates);

  std::vector<TokenSequence> corpus;
  corpus.reserve(data.train.size());
  for (const auto& rec : data.train) {
    corpus.push_back(TokenSequence{rec.tokens, rec.label});
  }
  data.fluency_costs = TableFluencyScorer::unigram_surprisal(corpus).costs();
  return data;
}

}  // namespace advtok
