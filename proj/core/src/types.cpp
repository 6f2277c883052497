#include "advtok/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace advtok {

Vocabulary::Vocabulary(Matrix embeddings) : embeddings_(std::move(embeddings)) {
  if (embeddings_.rows() < 1 || embeddings_.cols() < 1) {
    throw std::invalid_argument("vocabulary requires a non-empty embedding table");
  }
  if (!embeddings_.allFinite()) {
    throw std::invalid_argument("vocabulary embeddings must be finite");
  }
}

Eigen::RowVectorXd Vocabulary::embedding(TokenId id) const {
  if (!valid(id)) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return embeddings_.row(id);
}

Matrix Vocabulary::embed(const std::vector<TokenId>& tokens) const {
  Matrix out(static_cast<Eigen::Index>(tokens.size()), dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = embedding(tokens[i]);
  }
  return out;
}

CandidateSet CandidateSet::sanitized(const TokenSequence& seq,
                                     std::vector<std::vector<TokenId>> raw,
                                     const Vocabulary& vocab) {
  if (static_cast<int>(raw.size()) != seq.length()) {
    throw std::invalid_argument("candidate list length does not match sequence length");
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::vector<TokenId> kept;
    kept.reserve(raw[i].size());
    std::unordered_set<TokenId> seen;
    for (TokenId cand : raw[i]) {
      if (!vocab.valid(cand)) {
        throw std::out_of_range("candidate token id " + std::to_string(cand) +
                                " outside vocabulary");
      }
      if (cand == seq.tokens[i]) continue;  // no-op substitution
      if (seen.insert(cand).second) kept.push_back(cand);
    }
    raw[i] = std::move(kept);
  }
  return CandidateSet(std::move(raw));
}

int CandidateSet::perturbable_count() const {
  int n = 0;
  for (const auto& c : per_position_) {
    if (!c.empty()) ++n;
  }
  return n;
}

bool state_feasible(const RelaxedState& state, const CandidateSet& cands) {
  const int length = static_cast<int>(state.site_probs.size());
  if (length != cands.positions()) return false;
  if (static_cast<int>(state.replace_probs.size()) != length) return false;
  if (state.budget < 1) return false;

  double total = 0.0;
  for (int i = 0; i < length; ++i) {
    const double z = state.site_probs[i];
    if (!std::isfinite(z) || z < -kFeasEps || z > 1.0 + kFeasEps) return false;
    if (!cands.perturbable(i) && z != 0.0) return false;
    total += z;
  }
  if (total > static_cast<double>(state.budget) + kFeasEps) return false;

  for (int i = 0; i < length; ++i) {
    const Vector& u = state.replace_probs[static_cast<std::size_t>(i)];
    if (static_cast<int>(u.size()) != cands.count_at(i)) return false;
    if (cands.count_at(i) == 0) continue;
    double sum = 0.0;
    for (int j = 0; j < u.size(); ++j) {
      if (!std::isfinite(u[j]) || u[j] < -kFeasEps || u[j] > 1.0 + kFeasEps) return false;
      sum += u[j];
    }
    if (std::abs(sum - 1.0) > kFeasEps) return false;
  }
  return true;
}

int DiscretePerturbation::sites_changed() const {
  int n = 0;
  for (std::uint8_t bit : site_mask) n += bit ? 1 : 0;
  return n;
}

DiscretePerturbation apply_perturbation(const TokenSequence& seq,
                                        const CandidateSet& cands,
                                        const std::vector<std::uint8_t>& sites,
                                        const std::vector<int>& choice) {
  const auto length = static_cast<std::size_t>(seq.length());
  if (sites.size() != length || choice.size() != length ||
      cands.positions() != seq.length()) {
    throw std::invalid_argument("perturbation shape mismatch");
  }

  DiscretePerturbation out;
  out.site_mask = sites;
  out.replace_choice.assign(length, -1);
  out.adv_tokens = seq.tokens;

  for (std::size_t i = 0; i < length; ++i) {
    if (!sites[i]) continue;
    const int pos = static_cast<int>(i);
    if (!cands.perturbable(pos)) {
      throw std::invalid_argument("site " + std::to_string(i) +
                                  " selected but has no candidates");
    }
    const int j = choice[i];
    if (j < 0 || j >= cands.count_at(pos)) {
      throw std::out_of_range("candidate choice " + std::to_string(j) +
                              " out of range at position " + std::to_string(i));
    }
    out.replace_choice[i] = j;
    out.adv_tokens[i] = cands.at(pos)[static_cast<std::size_t>(j)];
  }
  return out;
}

Matrix mixture_embedding(const Vocabulary& vocab, const TokenSequence& seq,
                         const CandidateSet& cands, const Vector& site_weights,
                         const std::vector<Vector>& replace_weights) {
  const int length = seq.length();
  if (static_cast<int>(site_weights.size()) != length ||
      static_cast<int>(replace_weights.size()) != length ||
      cands.positions() != length) {
    throw std::invalid_argument("mixture shape mismatch");
  }

  Matrix rows(length, vocab.dim());
  for (int i = 0; i < length; ++i) {
    const double z = site_weights[i];
    const Eigen::RowVectorXd original = vocab.embedding(seq.tokens[static_cast<std::size_t>(i)]);
    if (cands.count_at(i) == 0) {
      if (z != 0.0) {
        throw std::invalid_argument("nonzero site weight at unperturbable position " +
                                    std::to_string(i));
      }
      rows.row(i) = original;
      continue;
    }
    const Vector& u = replace_weights[static_cast<std::size_t>(i)];
    if (static_cast<int>(u.size()) != cands.count_at(i)) {
      throw std::invalid_argument("replacement weight length mismatch at position " +
                                  std::to_string(i));
    }
    Eigen::RowVectorXd blend = Eigen::RowVectorXd::Zero(vocab.dim());
    for (int j = 0; j < u.size(); ++j) {
      blend += u[j] * vocab.embedding(cands.at(i)[static_cast<std::size_t>(j)]);
    }
    rows.row(i) = (1.0 - z) * original + z * blend;
  }
  return rows;
}

Matrix mixture_embedding(const Vocabulary& vocab, const TokenSequence& seq,
                         const CandidateSet& cands,
                         const DiscretePerturbation& sample) {
  const int length = seq.length();
  Vector z(length);
  std::vector<Vector> u(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    z[i] = sample.site_mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    Vector one_hot = Vector::Zero(cands.count_at(i));
    if (sample.site_mask[static_cast<std::size_t>(i)]) {
      one_hot[sample.replace_choice[static_cast<std::size_t>(i)]] = 1.0;
    } else if (cands.count_at(i) > 0) {
      one_hot[0] = 1.0;  // inert where z_i = 0
    }
    u[static_cast<std::size_t>(i)] = std::move(one_hot);
  }
  return mixture_embedding(vocab, seq, cands, z, u);
}

}  // namespace advtok
