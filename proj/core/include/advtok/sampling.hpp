#pragma once

#include <cstdint>
#include <vector>

#include "advtok/rng.hpp"
#include "advtok/types.hpp"

namespace advtok {

/// Raw: emit the independent Bernoulli draw as-is (can exceed the budget;
/// unbiased, used for gradient estimation). TopkEnforce: when the draw has
/// more than k ones, keep the k with largest site probability (ties to the
/// lowest index); used for emitted adversarial examples.
enum class BudgetMode { kRaw, kTopkEnforce };

struct SamplerConfig {
  int num_samples = 20;  // sampling rounds R
  std::uint64_t seed = 0;
  BudgetMode budget_mode = BudgetMode::kRaw;
};

/// Identifies which attack run / PGD step a batch belongs to, so that draws
/// form a deterministic counter-based stream keyed on
/// (seed, example, iteration, r).
struct BatchContext {
  std::uint64_t example = 0;
  std::uint64_t iteration = 0;
};

/// Independent Bernoulli site draw: bit i is 1 with probability site_probs[i].
std::vector<std::uint8_t> sample_sites(const Vector& site_probs, int budget,
                                       BudgetMode mode, CounterRng& rng);

/// One categorical draw per selected site from its replacement distribution;
/// unselected sites get -1. Rejects degenerate all-zero distributions.
std::vector<int> sample_replacements(const std::vector<Vector>& replace_probs,
                                     const std::vector<std::uint8_t>& sites,
                                     CounterRng& rng);

/// R independent discretizations of the relaxed state. Bit-for-bit
/// reproducible given identical (state, config, context).
std::vector<DiscretePerturbation> sample_batch(const TokenSequence& seq,
                                               const CandidateSet& cands,
                                               const RelaxedState& state,
                                               const SamplerConfig& config,
                                               const BatchContext& context = {});

}  // namespace advtok
