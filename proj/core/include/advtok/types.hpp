#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

namespace advtok {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using TokenId = std::int32_t;

/// Feasibility slack for the relaxed constraint sets (bisection projections
/// are iterative, so constraint residuals are only satisfied to tolerance).
inline constexpr double kFeasEps = 1e-9;

/// Token inventory plus its shared embedding table (one row per token id).
class Vocabulary {
 public:
  explicit Vocabulary(Matrix embeddings);

  int size() const { return static_cast<int>(embeddings_.rows()); }
  int dim() const { return static_cast<int>(embeddings_.cols()); }
  const Matrix& embeddings() const { return embeddings_; }

  bool valid(TokenId id) const { return id >= 0 && id < size(); }
  Eigen::RowVectorXd embedding(TokenId id) const;

  /// Row i = embedding of tokens[i].
  Matrix embed(const std::vector<TokenId>& tokens) const;

 private:
  Matrix embeddings_;
};

/// An input sentence as vocabulary indices, with an optional class label.
struct TokenSequence {
  std::vector<TokenId> tokens;
  std::optional<int> label;

  int length() const { return static_cast<int>(tokens.size()); }
};

/// Per-position substitution inventory. Positions with no candidates are
/// unperturbable and stay frozen throughout an attack.
class CandidateSet {
 public:
  CandidateSet() = default;
  explicit CandidateSet(std::vector<std::vector<TokenId>> per_position)
      : per_position_(std::move(per_position)) {}

  /// Validates ids against the vocabulary and strips candidates equal to the
  /// original token at their position (plus duplicates). Called at load time.
  static CandidateSet sanitized(const TokenSequence& seq,
                                std::vector<std::vector<TokenId>> raw,
                                const Vocabulary& vocab);

  int positions() const { return static_cast<int>(per_position_.size()); }
  int count_at(int i) const {
    return static_cast<int>(per_position_[static_cast<std::size_t>(i)].size());
  }
  const std::vector<TokenId>& at(int i) const {
    return per_position_[static_cast<std::size_t>(i)];
  }
  bool perturbable(int i) const { return count_at(i) > 0; }
  int perturbable_count() const;

 private:
  std::vector<std::vector<TokenId>> per_position_;
};

/// Continuous attack variables: site-selection probabilities z in [0,1]^L
/// with sum(z) <= budget, and per-position replacement distributions u_i on
/// the probability simplex. Owned by a single attack run.
struct RelaxedState {
  Vector site_probs;                  // length L
  std::vector<Vector> replace_probs;  // entry i has length m_i
  int budget = 1;                     // k
};

/// Checks the C1/C2 constraints (within kFeasEps) plus frozen-position pins.
bool state_feasible(const RelaxedState& state, const CandidateSet& cands);

/// A sampled Boolean realization of the attack variables and the token
/// sequence it induces.
struct DiscretePerturbation {
  std::vector<std::uint8_t> site_mask;  // z, length L
  std::vector<int> replace_choice;      // candidate index where z=1, else -1
  std::vector<TokenId> adv_tokens;

  int sites_changed() const;
};

/// Applies the substitution rule: adv_i = tokens_i where z_i = 0, and the
/// chosen candidate where z_i = 1. Rejects selections at unperturbable
/// positions and out-of-range candidate choices.
DiscretePerturbation apply_perturbation(const TokenSequence& seq,
                                        const CandidateSet& cands,
                                        const std::vector<std::uint8_t>& sites,
                                        const std::vector<int>& choice);

/// Differentiable parametrization of the perturbed input:
///   row_i = (1 - z_i) * e(x_i) + z_i * sum_j u_ij * e(s_ij).
/// At Boolean (z, u) this equals the embedding of the discrete perturbed
/// sequence row for row, exactly.
Matrix mixture_embedding(const Vocabulary& vocab, const TokenSequence& seq,
                         const CandidateSet& cands, const Vector& site_weights,
                         const std::vector<Vector>& replace_weights);

/// Boolean convenience overload.
Matrix mixture_embedding(const Vocabulary& vocab, const TokenSequence& seq,
                         const CandidateSet& cands,
                         const DiscretePerturbation& sample);

}  // namespace advtok
