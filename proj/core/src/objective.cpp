#include "advtok/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace advtok {

namespace {

void check_classes(const Vector& logits, int original_class) {
  if (logits.size() < 2) {
    throw std::invalid_argument("attack loss requires at least two classes");
  }
  if (original_class < 0 || original_class >= logits.size()) {
    throw std::out_of_range("original class index out of range");
  }
}

}  // namespace

double cw_margin(const Vector& logits, int original_class) {
  check_classes(logits, original_class);
  double best_other = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < logits.size(); ++i) {
    if (i == original_class) continue;
    best_other = std::max(best_other, logits[i]);
  }
  return logits[original_class] - best_other;
}

double cw_loss(const Vector& logits, int original_class) {
  return std::max(cw_margin(logits, original_class), 0.0);
}

int cw_competitor(const Vector& logits, int original_class) {
  check_classes(logits, original_class);
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < logits.size(); ++i) {
    if (i == original_class) continue;
    if (logits[i] > best_value) {
      best_value = logits[i];
      best = i;
    }
  }
  return best;
}

FluencyTable::FluencyTable(const FluencyScorer& scorer, const TokenSequence& seq,
                           const CandidateSet& cands) {
  const int length = seq.length();
  if (cands.positions() != length) {
    throw std::invalid_argument("FluencyTable: candidate/sequence length mismatch");
  }
  deltas_.resize(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    const double base = scorer.score(seq, i, seq.tokens[static_cast<std::size_t>(i)]);
    auto& row = deltas_[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(cands.count_at(i)));
    for (int j = 0; j < cands.count_at(i); ++j) {
      double d = scorer.score(seq, i, cands.at(i)[static_cast<std::size_t>(j)]) - base;
      if (std::isnan(d)) {
        d = 0.0;  // forbidden vs forbidden
      } else {
        d = std::clamp(d, -kForbiddenCost, kForbiddenCost);
      }
      row[static_cast<std::size_t>(j)] = d;
    }
  }
}

double fluency_reg(const Vector& site_weights,
                   const std::vector<Vector>& replace_weights,
                   const FluencyTable& table) {
  if (static_cast<int>(site_weights.size()) != table.positions() ||
      replace_weights.size() != static_cast<std::size_t>(table.positions())) {
    throw std::invalid_argument("fluency_reg: shape mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < table.positions(); ++i) {
    const Vector& u = replace_weights[static_cast<std::size_t>(i)];
    double inner = 0.0;
    for (int j = 0; j < u.size(); ++j) {
      inner += u[j] * table.delta(i, j);
    }
    total += site_weights[i] * inner;
  }
  return total;
}

double fluency_total(const DiscretePerturbation& sample, const FluencyTable& table) {
  double total = 0.0;
  for (std::size_t i = 0; i < sample.site_mask.size(); ++i) {
    if (!sample.site_mask[i]) continue;
    total += table.delta(static_cast<int>(i), sample.replace_choice[i]);
  }
  return total;
}

GradientPair fluency_grad(const RelaxedState& state, const FluencyTable& table) {
  const int length = static_cast<int>(state.site_probs.size());
  GradientPair out;
  out.sites = Vector::Zero(length);
  out.replace.resize(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    const Vector& u = state.replace_probs[static_cast<std::size_t>(i)];
    Vector g = Vector::Zero(u.size());
    double site_g = 0.0;
    for (int j = 0; j < u.size(); ++j) {
      const double d = table.delta(i, j);
      site_g += u[j] * d;
      g[j] = state.site_probs[i] * d;
    }
    out.sites[i] = site_g;
    out.replace[static_cast<std::size_t>(i)] = std::move(g);
  }
  return out;
}

SampleGradient sample_gradient(const TokenSequence& seq, const CandidateSet& cands,
                               const Vocabulary& vocab, const VictimModel& model,
                               const std::vector<std::uint8_t>& sites,
                               const std::vector<int>& full_choice, int original_class,
                               double margin_floor) {
  const int length = seq.length();
  SampleGradient out;
  out.grad.sites = Vector::Zero(length);
  out.grad.replace.resize(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    out.grad.replace[static_cast<std::size_t>(i)] = Vector::Zero(cands.count_at(i));
  }

  const DiscretePerturbation sample = apply_perturbation(seq, cands, sites, full_choice);
  const Matrix embeddings = vocab.embed(sample.adv_tokens);
  const Vector logits = model.forward(embeddings);
  const double margin = cw_margin(logits, original_class);
  out.attack_loss = std::max(margin, margin_floor);
  if (margin <= margin_floor) {
    return out;  // flat branch of the max
  }

  Vector logit_grad = Vector::Zero(logits.size());
  logit_grad[original_class] = 1.0;
  logit_grad[cw_competitor(logits, original_class)] = -1.0;
  const Matrix emb_grad = model.backward(embeddings, logit_grad);

  for (int i = 0; i < length; ++i) {
    const int m = cands.count_at(i);
    if (m == 0) continue;
    const auto row = emb_grad.row(i);
    const int chosen = full_choice[static_cast<std::size_t>(i)];
    if (chosen < 0 || chosen >= m) {
      throw std::invalid_argument("sample_gradient: full choice missing at position " +
                                  std::to_string(i));
    }
    const Eigen::RowVectorXd original = vocab.embedding(seq.tokens[static_cast<std::size_t>(i)]);
    out.grad.sites[i] =
        (vocab.embedding(cands.at(i)[static_cast<std::size_t>(chosen)]) - original)
            .dot(row);
    if (sites[static_cast<std::size_t>(i)]) {
      Vector& g = out.grad.replace[static_cast<std::size_t>(i)];
      for (int j = 0; j < m; ++j) {
        g[j] = vocab.embedding(cands.at(i)[static_cast<std::size_t>(j)]).dot(row);
      }
    }
  }
  return out;
}

GradientEstimate estimate_gradient(const RelaxedState& state, const TokenSequence& seq,
                                   const CandidateSet& cands, const Vocabulary& vocab,
                                   const VictimModel& model, const FluencyTable& fluency,
                                   int original_class, const SamplerConfig& sampler,
                                   const ObjectiveConfig& objective,
                                   const BatchContext& context) {
  if (sampler.num_samples < 1) {
    throw std::invalid_argument("estimate_gradient: need at least one sample");
  }
  if (!state_feasible(state, cands)) {
    throw std::invalid_argument("estimate_gradient: infeasible relaxed state");
  }

  const int length = seq.length();
  GradientEstimate out;
  out.grad.sites = Vector::Zero(length);
  out.grad.replace.resize(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    out.grad.replace[static_cast<std::size_t>(i)] = Vector::Zero(cands.count_at(i));
  }

  // Replacement draws cover every perturbable position (not only selected
  // sites): the site gradient needs a candidate row even where z sampled 0.
  std::vector<std::uint8_t> all_perturbable(static_cast<std::size_t>(length), 0);
  for (int i = 0; i < length; ++i) {
    all_perturbable[static_cast<std::size_t>(i)] = cands.perturbable(i) ? 1 : 0;
  }

  const int rounds = sampler.num_samples;
  for (int r = 0; r < rounds; ++r) {
    CounterRng site_rng(StreamKey{sampler.seed, context.example, context.iteration,
                                  static_cast<std::uint64_t>(r), StreamPhase::kSites});
    CounterRng repl_rng(StreamKey{sampler.seed, context.example, context.iteration,
                                  static_cast<std::uint64_t>(r),
                                  StreamPhase::kReplacements});
    const auto sites =
        sample_sites(state.site_probs, state.budget, sampler.budget_mode, site_rng);
    const auto choice = sample_replacements(state.replace_probs, all_perturbable, repl_rng);

    const SampleGradient sample = sample_gradient(seq, cands, vocab, model, sites, choice,
                                                  original_class, objective.margin_floor);
    out.grad.sites += sample.grad.sites;
    for (int i = 0; i < length; ++i) {
      out.grad.replace[static_cast<std::size_t>(i)] +=
          sample.grad.replace[static_cast<std::size_t>(i)];
    }
    out.mean_attack_loss += sample.attack_loss;
    ++out.forward_passes;
  }

  const double inv = 1.0 / static_cast<double>(rounds);
  out.grad.sites *= inv;
  out.mean_attack_loss *= inv;
  for (auto& g : out.grad.replace) g *= inv;

  if (objective.fluency_weight > 0.0) {
    const GradientPair reg = fluency_grad(state, fluency);
    out.grad.sites += objective.fluency_weight * reg.sites;
    for (int i = 0; i < length; ++i) {
      out.grad.replace[static_cast<std::size_t>(i)] +=
          objective.fluency_weight * reg.replace[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

}  // namespace advtok
