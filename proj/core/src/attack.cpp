#include "advtok/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace advtok {

namespace {

constexpr std::uint64_t kProbeBand = 0x80000000ULL;

DiscretePerturbation zero_site_perturbation(const TokenSequence& seq) {
  DiscretePerturbation p;
  p.site_mask.assign(static_cast<std::size_t>(seq.length()), 0);
  p.replace_choice.assign(static_cast<std::size_t>(seq.length()), -1);
  p.adv_tokens = seq.tokens;
  return p;
}

struct Candidate {
  DiscretePerturbation perturbation;
  double margin = std::numeric_limits<double>::infinity();
  double fluency = 0.0;
};

void normalize_block(Vector& v) {
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
}

void normalize_replace(std::vector<Vector>& gs) {
  double sq = 0.0;
  for (const auto& g : gs) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > 0.0) {
    for (auto& g : gs) g /= norm;
  }
}

}  // namespace

int budget_for_length(double fraction, int length) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("budget fraction must lie in (0, 1]");
  }
  return std::max(1, static_cast<int>(std::floor(fraction * static_cast<double>(length))));
}

RelaxedState init_state(const TokenSequence& seq, const CandidateSet& cands, int budget,
                        CounterRng& rng, double noise_amplitude,
                        const BisectionParams& projection) {
  const int length = seq.length();
  const int perturbable = cands.perturbable_count();
  if (perturbable == 0) {
    throw std::invalid_argument("init_state: no perturbable positions");
  }
  const double base =
      std::min(1.0, static_cast<double>(budget) / static_cast<double>(perturbable));

  RelaxedState state;
  state.budget = budget;
  state.site_probs = Vector::Zero(length);
  state.replace_probs.resize(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    const int m = cands.count_at(i);
    if (m == 0) {
      state.replace_probs[static_cast<std::size_t>(i)] = Vector();
      continue;
    }
    double z = base;
    Vector u = Vector::Constant(m, 1.0 / static_cast<double>(m));
    if (noise_amplitude > 0.0) {
      z += rng.next_range(-noise_amplitude, noise_amplitude);
      for (int j = 0; j < m; ++j) {
        u[j] += rng.next_range(-noise_amplitude, noise_amplitude);
      }
      u = project_c2(u, projection);
    }
    state.site_probs[i] = z;
    state.replace_probs[static_cast<std::size_t>(i)] = std::move(u);
  }
  if (noise_amplitude > 0.0) {
    Vector projected = project_c1(state.site_probs, budget, projection);
    // Frozen positions stay pinned at zero.
    for (int i = 0; i < length; ++i) {
      state.site_probs[i] = cands.perturbable(i) ? projected[i] : 0.0;
    }
  }
  return state;
}

AttackResult pgd_attack(const TokenSequence& seq, const CandidateSet& cands,
                        const Vocabulary& vocab, const VictimModel& model,
                        const FluencyScorer& scorer, const AttackConfig& config,
                        std::uint64_t example_id) {
  if (config.iters < 1 || config.post_samples < 1 || config.max_restarts < 0) {
    throw std::invalid_argument("pgd_attack: invalid configuration");
  }
  const int length = seq.length();
  const int budget = budget_for_length(config.budget_fraction, length);

  AttackResult result;
  const Vector clean_logits = model.forward(vocab.embed(seq.tokens));
  result.queries = 1;

  int pred = 0;
  clean_logits.maxCoeff(&pred);
  const int original_class = seq.label.value_or(pred);
  if (seq.label.has_value() && pred != *seq.label) {
    result.success = true;
    result.clean_misclassified = true;
    result.perturbation = zero_site_perturbation(seq);
    result.final_margin = cw_loss(clean_logits, original_class);
    return result;
  }

  if (cands.perturbable_count() == 0) {
    result.perturbation = zero_site_perturbation(seq);
    result.final_margin = cw_loss(clean_logits, original_class);
    result.failure_reason = "no perturbable positions";
    return result;
  }

  const FluencyTable fluency(scorer, seq, cands);
  const double clean_margin = cw_margin(clean_logits, original_class);

  Candidate best_failure{zero_site_perturbation(seq), clean_margin, 0.0};
  SamplerConfig post_sampler = config.sampler;
  post_sampler.budget_mode = BudgetMode::kTopkEnforce;
  post_sampler.num_samples = config.post_samples;

  auto evaluate = [&](const DiscretePerturbation& sample) {
    const Vector logits = model.forward(vocab.embed(sample.adv_tokens));
    ++result.queries;
    return cw_margin(logits, original_class);
  };

  const int attempts = config.max_restarts + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    CounterRng init_rng(StreamKey{config.sampler.seed, example_id,
                                  static_cast<std::uint64_t>(attempt), 0,
                                  StreamPhase::kInit});
    RelaxedState state =
        init_state(seq, cands, budget, init_rng, attempt == 0 ? 0.0 : 0.5,
                   config.projection);

    bool probe_hit = false;
    for (int t = 1; t <= config.iters && !probe_hit; ++t) {
      const BatchContext step_ctx{example_id,
                                  (static_cast<std::uint64_t>(attempt) << 32) |
                                      static_cast<std::uint64_t>(t)};
      const GradientEstimate est =
          estimate_gradient(state, seq, cands, vocab, model, fluency, original_class,
                            config.sampler, config.objective, step_ctx);
      result.queries += est.forward_passes;

      Vector g_sites = est.grad.sites;
      std::vector<Vector> g_replace = est.grad.replace;
      if (config.normalize_grads) {
        normalize_block(g_sites);
        normalize_replace(g_replace);
      }

      Vector stepped = state.site_probs - config.lr_sites * g_sites;
      Vector projected = project_c1(stepped, budget, config.projection);
      for (int i = 0; i < length; ++i) {
        state.site_probs[i] = cands.perturbable(i) ? projected[i] : 0.0;
      }
      for (int i = 0; i < length; ++i) {
        if (cands.count_at(i) == 0) continue;
        auto& u = state.replace_probs[static_cast<std::size_t>(i)];
        u = project_c2(u - config.lr_replace * g_replace[static_cast<std::size_t>(i)],
                       config.projection);
      }

      // Cheap success probe; only worthwhile when there is no fluency term
      // left to optimize after the attack loss deactivates.
      if (config.objective.fluency_weight == 0.0 && config.probe_every > 0 &&
          t % config.probe_every == 0) {
        SamplerConfig probe_sampler = post_sampler;
        probe_sampler.num_samples = 1;
        const BatchContext probe_ctx{example_id,
                                     (static_cast<std::uint64_t>(attempt) << 32) |
                                         kProbeBand | static_cast<std::uint64_t>(t)};
        const auto probe = sample_batch(seq, cands, state, probe_sampler, probe_ctx);
        const double margin = evaluate(probe.front());
        if (margin <= 0.0) probe_hit = true;
      }
    }

    const BatchContext post_ctx{example_id,
                                (static_cast<std::uint64_t>(attempt) << 32) | kProbeBand |
                                    static_cast<std::uint64_t>(config.iters + 1)};
    const auto batch = sample_batch(seq, cands, state, post_sampler, post_ctx);

    bool have_success = false;
    Candidate best_success;
    for (const auto& sample : batch) {
      const double margin = evaluate(sample);
      const double flu = fluency_total(sample, fluency);
      if (margin <= 0.0) {
        if (!have_success || flu < best_success.fluency) {
          have_success = true;
          best_success = Candidate{sample, margin, flu};
        }
      } else if (margin < best_failure.margin) {
        best_failure = Candidate{sample, margin, flu};
      }
    }

    if (have_success) {
      result.success = true;
      result.restarts_used = attempt;
      result.perturbation = best_success.perturbation;
      result.fluency_delta = best_success.fluency;
      result.final_margin = std::max(best_success.margin, 0.0);
      return result;
    }
  }

  result.success = false;
  result.restarts_used = config.max_restarts;
  result.perturbation = best_failure.perturbation;
  result.fluency_delta = best_failure.fluency;
  result.final_margin = std::max(best_failure.margin, 0.0);
  result.failure_reason = "all restarts exhausted";
  return result;
}

AttackResult greedy_attack(const TokenSequence& seq, const CandidateSet& cands,
                           const Vocabulary& vocab, const VictimModel& model,
                           const FluencyScorer& scorer, int budget) {
  if (budget < 1) throw std::invalid_argument("greedy_attack: budget must be >= 1");
  const int length = seq.length();

  AttackResult result;
  const Matrix clean_emb = vocab.embed(seq.tokens);
  const Vector clean_logits = model.forward(clean_emb);
  result.queries = 1;

  int pred = 0;
  clean_logits.maxCoeff(&pred);
  const int original_class = seq.label.value_or(pred);
  if (seq.label.has_value() && pred != *seq.label) {
    result.success = true;
    result.clean_misclassified = true;
    result.perturbation = zero_site_perturbation(seq);
    result.final_margin = cw_loss(clean_logits, original_class);
    return result;
  }

  const FluencyTable fluency(scorer, seq, cands);
  const double clean_margin = cw_margin(clean_logits, original_class);

  // Word importance: margin drop when the position's embedding row is zeroed.
  std::vector<int> order;
  std::vector<double> importance(static_cast<std::size_t>(length), 0.0);
  for (int i = 0; i < length; ++i) {
    if (!cands.perturbable(i)) continue;
    Matrix probe = clean_emb;
    probe.row(i).setZero();
    const double zeroed = cw_margin(model.forward(probe), original_class);
    ++result.queries;
    importance[static_cast<std::size_t>(i)] = clean_margin - zeroed;
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return importance[static_cast<std::size_t>(a)] > importance[static_cast<std::size_t>(b)];
  });

  std::vector<TokenId> current = seq.tokens;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(length), 0);
  std::vector<int> choice(static_cast<std::size_t>(length), -1);
  double margin = clean_margin;
  int changes = 0;

  for (int i : order) {
    if (changes >= budget || margin <= 0.0) break;
    int best_j = -1;
    double best_margin = margin;
    for (int j = 0; j < cands.count_at(i); ++j) {
      std::vector<TokenId> probe = current;
      probe[static_cast<std::size_t>(i)] = cands.at(i)[static_cast<std::size_t>(j)];
      const double candidate_margin =
          cw_margin(model.forward(vocab.embed(probe)), original_class);
      ++result.queries;
      if (candidate_margin < best_margin) {
        best_margin = candidate_margin;
        best_j = j;
      }
    }
    if (best_j < 0) continue;  // nothing strictly improving here
    current[static_cast<std::size_t>(i)] = cands.at(i)[static_cast<std::size_t>(best_j)];
    mask[static_cast<std::size_t>(i)] = 1;
    choice[static_cast<std::size_t>(i)] = best_j;
    margin = best_margin;
    ++changes;
  }

  result.perturbation = apply_perturbation(seq, cands, mask, choice);
  result.success = margin <= 0.0;
  result.fluency_delta = fluency_total(result.perturbation, fluency);
  result.final_margin = std::max(margin, 0.0);
  if (!result.success) result.failure_reason = "budget exhausted";
  return result;
}

std::uint64_t oracle_enumeration_count(const CandidateSet& cands, int budget) {
  // Coefficients of prod_i (1 + m_i x) truncated at degree k; their sum is
  // the number of (subset, assignment) pairs with |subset| <= k.
  const int cap = std::min(budget, cands.positions());
  std::vector<double> coeff(static_cast<std::size_t>(cap) + 1, 0.0);
  coeff[0] = 1.0;
  for (int i = 0; i < cands.positions(); ++i) {
    const double m = static_cast<double>(cands.count_at(i));
    if (m == 0.0) continue;
    for (int deg = cap; deg >= 1; --deg) {
      coeff[static_cast<std::size_t>(deg)] += m * coeff[static_cast<std::size_t>(deg) - 1];
    }
  }
  double total = 0.0;
  for (double c : coeff) total += c;
  if (total > 1e18) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(total);
}

AttackResult oracle_attack(const TokenSequence& seq, const CandidateSet& cands,
                           const Vocabulary& vocab, const VictimModel& model,
                           const FluencyScorer& scorer, int budget) {
  if (budget < 1) throw std::invalid_argument("oracle_attack: budget must be >= 1");
  constexpr std::uint64_t kEnumerationCap = 1000000;
  if (oracle_enumeration_count(cands, budget) > kEnumerationCap) {
    throw std::invalid_argument("oracle_attack: instance too large to enumerate");
  }

  const int length = seq.length();
  AttackResult result;
  const Vector clean_logits = model.forward(vocab.embed(seq.tokens));
  result.queries = 1;

  int pred = 0;
  clean_logits.maxCoeff(&pred);
  const int original_class = seq.label.value_or(pred);
  if (seq.label.has_value() && pred != *seq.label) {
    result.success = true;
    result.clean_misclassified = true;
    result.perturbation = zero_site_perturbation(seq);
    result.final_margin = cw_loss(clean_logits, original_class);
    return result;
  }

  const FluencyTable fluency(scorer, seq, cands);
  const double clean_margin = cw_margin(clean_logits, original_class);

  bool have_success = clean_margin <= 0.0;  // the empty perturbation
  Candidate best_success{zero_site_perturbation(seq), clean_margin, 0.0};
  Candidate best_failure{zero_site_perturbation(seq), clean_margin, 0.0};

  std::vector<int> perturbable;
  for (int i = 0; i < length; ++i) {
    if (cands.perturbable(i)) perturbable.push_back(i);
  }

  std::vector<int> subset;   // indices into perturbable
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(length), 0);
  std::vector<int> choice(static_cast<std::size_t>(length), -1);

  auto evaluate_assignments = [&]() {
    // Mixed-radix counter over candidate choices for the current subset.
    std::vector<int> digits(subset.size(), 0);
    while (true) {
      for (std::size_t s = 0; s < subset.size(); ++s) {
        const int pos = perturbable[static_cast<std::size_t>(subset[s])];
        choice[static_cast<std::size_t>(pos)] = digits[s];
      }
      const auto sample = apply_perturbation(seq, cands, mask, choice);
      const double margin =
          cw_margin(model.forward(vocab.embed(sample.adv_tokens)), original_class);
      ++result.queries;
      const double flu = fluency_total(sample, fluency);
      if (margin <= 0.0) {
        if (!have_success || flu < best_success.fluency) {
          have_success = true;
          best_success = Candidate{sample, margin, flu};
        }
      } else if (margin < best_failure.margin) {
        best_failure = Candidate{sample, margin, flu};
      }

      std::size_t carry = 0;
      while (carry < digits.size()) {
        const int pos = perturbable[static_cast<std::size_t>(subset[carry])];
        if (++digits[carry] < cands.count_at(pos)) break;
        digits[carry] = 0;
        ++carry;
      }
      if (carry == digits.size()) break;
    }
  };

  const int max_size = std::min<int>(budget, static_cast<int>(perturbable.size()));
  auto enumerate_subsets = [&](auto&& self, int start, int remaining) -> void {
    if (!subset.empty()) {
      for (int s : subset) {
        mask[static_cast<std::size_t>(perturbable[static_cast<std::size_t>(s)])] = 1;
      }
      evaluate_assignments();
      for (int s : subset) {
        const int pos = perturbable[static_cast<std::size_t>(s)];
        mask[static_cast<std::size_t>(pos)] = 0;
        choice[static_cast<std::size_t>(pos)] = -1;
      }
    }
    if (remaining == 0) return;
    for (int next = start; next < static_cast<int>(perturbable.size()); ++next) {
      subset.push_back(next);
      self(self, next + 1, remaining - 1);
      subset.pop_back();
    }
  };
  enumerate_subsets(enumerate_subsets, 0, max_size);

  if (have_success) {
    result.success = true;
    result.perturbation = best_success.perturbation;
    result.fluency_delta = best_success.fluency;
    result.final_margin = std::max(best_success.margin, 0.0);
  } else {
    result.success = false;
    result.perturbation = best_failure.perturbation;
    result.fluency_delta = best_failure.fluency;
    result.final_margin = std::max(best_failure.margin, 0.0);
    result.failure_reason = "no successful perturbation exists";
  }
  return result;
}

}  // namespace advtok
