#pragma once

#include <cstdint>
#include <string>

#include "advtok/objective.hpp"
#include "advtok/projection.hpp"
#include "advtok/sampling.hpp"
#include "advtok/types.hpp"
#include "advtok/victim.hpp"

namespace advtok {

struct AttackConfig {
  int iters = 20;                // PGD steps T
  double lr_sites = 0.8;         // eta_z
  double lr_replace = 0.8;       // eta_u
  bool normalize_grads = true;   // rescale each gradient block to unit norm
  int post_samples = 20;         // discretizations drawn after optimization
  int max_restarts = 10;         // fresh initializations after a full failure
  double budget_fraction = 0.25; // k = max(1, floor(fraction * L))
  int probe_every = 5;           // mid-loop discretization probe cadence
  SamplerConfig sampler{};
  ObjectiveConfig objective{};
  BisectionParams projection{};
};

/// k = max(1, floor(fraction * length)).
int budget_for_length(double fraction, int length);

struct AttackResult {
  bool success = false;
  /// The clean model already disagrees with the label; the harness excludes
  /// such examples from the ASR denominator.
  bool clean_misclassified = false;
  DiscretePerturbation perturbation;  // emitted sample, or best candidate on failure
  int queries = 0;                    // victim forward passes
  int restarts_used = 0;
  double fluency_delta = 0.0;         // regularizer value of the emitted sample
  double final_margin = 0.0;          // attack loss of the emitted sample
  std::string failure_reason;
};

/// Feasible starting point: site probabilities min(1, k / #perturbable) on
/// perturbable positions, uniform replacement distributions. A positive
/// noise_amplitude adds uniform noise and re-projects (restart diversity).
RelaxedState init_state(const TokenSequence& seq, const CandidateSet& cands, int budget,
                        CounterRng& rng, double noise_amplitude = 0.0,
                        const BisectionParams& projection = {});

/// Projected gradient descent attack with sampled discretization, fluency-
/// ranked emission, and random restarts.
AttackResult pgd_attack(const TokenSequence& seq, const CandidateSet& cands,
                        const Vocabulary& vocab, const VictimModel& model,
                        const FluencyScorer& scorer, const AttackConfig& config,
                        std::uint64_t example_id = 0);

/// Word-importance-ranked greedy baseline: ranks positions by the margin drop
/// when their embedding row is zeroed, then commits the best strictly
/// improving candidate per position until success or budget exhaustion.
AttackResult greedy_attack(const TokenSequence& seq, const CandidateSet& cands,
                           const Vocabulary& vocab, const VictimModel& model,
                           const FluencyScorer& scorer, int budget);

/// Exhaustive ground truth: enumerates every site subset of size <= budget
/// and every candidate assignment. Emits the minimal-fluency success, or the
/// margin-minimizing perturbation on failure.
AttackResult oracle_attack(const TokenSequence& seq, const CandidateSet& cands,
                           const Vocabulary& vocab, const VictimModel& model,
                           const FluencyScorer& scorer, int budget);

/// Number of perturbations oracle_attack enumerates (the empty set included).
std::uint64_t oracle_enumeration_count(const CandidateSet& cands, int budget);

}  // namespace advtok
