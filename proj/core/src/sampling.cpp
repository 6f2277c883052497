#include "advtok/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>

namespace advtok {

std::vector<std::uint8_t> sample_sites(const Vector& site_probs, int budget,
                                       BudgetMode mode, CounterRng& rng) {
  const auto length = static_cast<std::size_t>(site_probs.size());
  std::vector<std::uint8_t> mask(length, 0);
  int ones = 0;
  for (std::size_t i = 0; i < length; ++i) {
    if (rng.bernoulli(site_probs[static_cast<Eigen::Index>(i)])) {
      mask[i] = 1;
      ++ones;
    }
  }
  if (mode == BudgetMode::kTopkEnforce && ones > budget) {
    // Keep the budget-many selected sites with largest probability,
    // breaking ties toward the lowest index.
    std::vector<std::size_t> selected;
    selected.reserve(static_cast<std::size_t>(ones));
    for (std::size_t i = 0; i < length; ++i) {
      if (mask[i]) selected.push_back(i);
    }
    std::stable_sort(selected.begin(), selected.end(),
                     [&](std::size_t a, std::size_t b) {
                       return site_probs[static_cast<Eigen::Index>(a)] >
                              site_probs[static_cast<Eigen::Index>(b)];
                     });
    for (std::size_t rank = static_cast<std::size_t>(budget); rank < selected.size();
         ++rank) {
      mask[selected[rank]] = 0;
    }
  }
  return mask;
}

std::vector<int> sample_replacements(const std::vector<Vector>& replace_probs,
                                     const std::vector<std::uint8_t>& sites,
                                     CounterRng& rng) {
  if (replace_probs.size() != sites.size()) {
    throw std::invalid_argument("sample_replacements: shape mismatch");
  }
  std::vector<int> choice(sites.size(), -1);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!sites[i]) continue;
    const Vector& u = replace_probs[i];
    if (u.size() == 0) {
      throw std::invalid_argument("sample_replacements: selected site " +
                                  std::to_string(i) + " has no candidates");
    }
    choice[i] = static_cast<int>(
        rng.categorical(std::span<const double>(u.data(), static_cast<std::size_t>(u.size()))));
  }
  return choice;
}

std::vector<DiscretePerturbation> sample_batch(const TokenSequence& seq,
                                               const CandidateSet& cands,
                                               const RelaxedState& state,
                                               const SamplerConfig& config,
                                               const BatchContext& context) {
  if (config.num_samples < 1) {
    throw std::invalid_argument("sample_batch: num_samples must be >= 1");
  }
  std::vector<DiscretePerturbation> batch;
  batch.reserve(static_cast<std::size_t>(config.num_samples));
  for (int r = 0; r < config.num_samples; ++r) {
    CounterRng site_rng(StreamKey{config.seed, context.example, context.iteration,
                                  static_cast<std::uint64_t>(r), StreamPhase::kSites});
    CounterRng repl_rng(StreamKey{config.seed, context.example, context.iteration,
                                  static_cast<std::uint64_t>(r),
                                  StreamPhase::kReplacements});
    auto sites = sample_sites(state.site_probs, state.budget, config.budget_mode, site_rng);
    auto choice = sample_replacements(state.replace_probs, sites, repl_rng);
    batch.push_back(apply_perturbation(seq, cands, sites, choice));
  }
  return batch;
}

}  // namespace advtok
