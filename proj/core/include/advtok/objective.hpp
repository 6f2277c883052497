#pragma once

#include <vector>

#include "advtok/sampling.hpp"
#include "advtok/types.hpp"
#include "advtok/victim.hpp"

namespace advtok {

struct ObjectiveConfig {
  double fluency_weight = 0.1;  // lambda multiplying the fluency regularizer
  double margin_floor = 0.0;    // the constant inside the attack loss's max
};

/// Gradient of the combined objective w.r.t. the relaxed variables.
struct GradientPair {
  Vector sites;                 // length L
  std::vector<Vector> replace;  // entry i has length m_i
};

/// Logit margin of the attacked class: Z_t0 - max_{i != t0} Z_i (unclamped).
double cw_margin(const Vector& logits, int original_class);

/// Margin attack loss max{Z_t0 - max_{i != t0} Z_i, 0}. Zero iff the
/// prediction already disagrees with original_class (ties count as success).
double cw_loss(const Vector& logits, int original_class);

/// Index of the largest competing logit (lowest index on exact ties).
int cw_competitor(const Vector& logits, int original_class);

/// Per-instance fluency costs, precomputed from a scorer. Deltas are clamped
/// to a large finite magnitude so forbidden (+inf cost) candidates cannot
/// poison gradient arithmetic.
class FluencyTable {
 public:
  FluencyTable(const FluencyScorer& scorer, const TokenSequence& seq,
               const CandidateSet& cands);

  /// cost(s_ij) - cost(x_i), clamped to +-kForbiddenCost.
  double delta(int position, int candidate) const {
    return deltas_[static_cast<std::size_t>(position)][static_cast<std::size_t>(candidate)];
  }
  int positions() const { return static_cast<int>(deltas_.size()); }

  static constexpr double kForbiddenCost = 1e9;

 private:
  std::vector<std::vector<double>> deltas_;
};

/// Fluency regularizer sum_i z_i sum_j u_ij (cost(s_ij) - cost(x_i)),
/// evaluated at relaxed or Boolean weights.
double fluency_reg(const Vector& site_weights,
                   const std::vector<Vector>& replace_weights,
                   const FluencyTable& table);

/// Same regularizer evaluated on a discrete sample.
double fluency_total(const DiscretePerturbation& sample, const FluencyTable& table);

/// Exact gradient of the regularizer at the relaxed state (it is multilinear):
/// d/dz_i = sum_j u_ij delta_ij, d/du_ij = z_i delta_ij.
GradientPair fluency_grad(const RelaxedState& state, const FluencyTable& table);

/// Chain-rule gradient of the attack loss through the mixture parametrization
/// at one Boolean sample:
///   d/dz_i = (e(s_i,choice_i) - e(x_i)) . g_i,
///   d/du_ij = z_i e(s_ij) . g_i,
/// where g is the embedding gradient backpropagated from the margin loss.
/// Samples on the flat branch (margin <= floor) contribute zero.
struct SampleGradient {
  GradientPair grad;
  double attack_loss = 0.0;
};
SampleGradient sample_gradient(const TokenSequence& seq, const CandidateSet& cands,
                               const Vocabulary& vocab, const VictimModel& model,
                               const std::vector<std::uint8_t>& sites,
                               const std::vector<int>& full_choice, int original_class,
                               double margin_floor = 0.0);

/// Monte-Carlo averaged gradient over R sampled discretizations plus the
/// exact fluency gradient at the relaxed state.
struct GradientEstimate {
  GradientPair grad;
  double mean_attack_loss = 0.0;
  int forward_passes = 0;
};
GradientEstimate estimate_gradient(const RelaxedState& state, const TokenSequence& seq,
                                   const CandidateSet& cands, const Vocabulary& vocab,
                                   const VictimModel& model, const FluencyTable& fluency,
                                   int original_class, const SamplerConfig& sampler,
                                   const ObjectiveConfig& objective,
                                   const BatchContext& context = {});

}  // namespace advtok
