#include "advtok/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "advtok/errors.hpp"
#include "advtok/rng.hpp"
#include "parallel.hpp"

namespace advtok {

namespace {

constexpr double kLogFloor = 1e-12;

Vector softmax(const Vector& logits) {
  const Vector shifted = logits.array() - logits.maxCoeff();
  Vector e = shifted.array().exp();
  return e / e.sum();
}

double cross_entropy(const Vector& probs, int label) {
  return -std::log(std::max(probs[label], kLogFloor));
}

int argmax(const Vector& v) {
  int idx = 0;
  v.maxCoeff(&idx);
  return idx;
}

/// Attack randomness for training is keyed on (epoch, example id) so that
/// batching and worker scheduling never change it.
std::uint64_t attack_key(int epoch, std::int64_t id) {
  return (static_cast<std::uint64_t>(epoch) << 40) ^ static_cast<std::uint64_t>(id);
}

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                         ": non-finite loss " + std::to_string(loss));
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(StreamKey{seed, 0, static_cast<std::uint64_t>(epoch), 0,
                           StreamPhase::kShuffle});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

struct EpochStats {
  double loss_sum = 0.0;
  int batches = 0;
};

EpochMetrics finish_epoch(int epoch, const EpochStats& stats, const TrainableModel& model,
                          const Vocabulary& vocab, const Dataset& eval,
                          const FluencyScorer& scorer, const TrainConfig& config) {
  EpochMetrics m;
  m.epoch = epoch;
  m.train_loss = stats.batches > 0 ? stats.loss_sum / stats.batches : 0.0;
  m.clean_accuracy = clean_accuracy(model, vocab, eval);
  m.robust_accuracy =
      robust_accuracy(model, vocab, eval, scorer, config.eval_attack, config.workers);
  return m;
}

}  // namespace

double clean_accuracy(const VictimModel& model, const Vocabulary& vocab,
                      const Dataset& data) {
  if (data.empty()) return 0.0;
  int correct = 0;
  for (const auto& inst : data) {
    if (!inst.seq.label.has_value()) {
      throw std::invalid_argument("clean_accuracy: unlabeled example " +
                                  std::to_string(inst.id));
    }
    const Vector logits = model.forward(vocab.embed(inst.seq.tokens));
    if (argmax(logits) == *inst.seq.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double robust_accuracy(const VictimModel& model, const Vocabulary& vocab,
                       const Dataset& data, const FluencyScorer& scorer,
                       const AttackConfig& attack, int workers) {
  if (data.empty()) return 0.0;
  std::vector<std::uint8_t> robust(data.size(), 0);
  detail::parallel_for(data.size(), workers, [&](std::size_t i) {
    const auto& inst = data[i];
    const AttackResult res =
        pgd_attack(inst.seq, inst.cands, vocab, model, scorer, attack,
                   static_cast<std::uint64_t>(inst.id));
    robust[i] = (!res.clean_misclassified && !res.success) ? 1 : 0;
  });
  int count = 0;
  for (auto r : robust) count += r;
  return static_cast<double>(count) / static_cast<double>(data.size());
}

TrainResult train_clean(TrainableModel& model, const Vocabulary& vocab,
                        const Dataset& train, const Dataset& eval,
                        const FluencyScorer& scorer, const TrainConfig& config) {
  if (config.epochs < 0 || config.batch_size < 1 || config.learning_rate <= 0.0) {
    throw std::invalid_argument("train_clean: invalid configuration");
  }
  TrainResult result;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled_indices(train.size(), config.seed, epoch);
    EpochStats stats;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      Vector grad = Vector::Zero(model.params().size());
      double loss = 0.0;
      for (std::size_t at = start; at < end; ++at) {
        const auto& inst = train[order[at]];
        const Matrix emb = vocab.embed(inst.seq.tokens);
        const Vector probs = softmax(model.forward(emb));
        const int label = inst.seq.label.value();
        loss += cross_entropy(probs, label);
        Vector logit_grad = probs;
        logit_grad[label] -= 1.0;
        grad += model.param_grad(emb, logit_grad);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      loss *= scale;
      check_finite(loss, epoch);
      model.set_params(model.params() - config.learning_rate * scale * grad);
      stats.loss_sum += loss;
      ++stats.batches;
    }
    result.history.push_back(
        finish_epoch(epoch, stats, model, vocab, eval, scorer, config));
  }
  return result;
}

TrainResult adv_train(TrainableModel& model, const Vocabulary& vocab,
                      const Dataset& train, const Dataset& eval,
                      const FluencyScorer& scorer, const TrainConfig& config) {
  if (config.epochs < 0 || config.batch_size < 1 || config.learning_rate <= 0.0 ||
      config.trades_beta < 0.0) {
    throw std::invalid_argument("adv_train: invalid configuration");
  }
  // TRADES with beta = 0 has no adversarial term at all; take the clean path
  // so the parameter trajectory matches plain CE training exactly.
  if (config.mode == TrainMode::kTrades && config.trades_beta == 0.0) {
    return train_clean(model, vocab, train, eval, scorer, config);
  }

  TrainResult result;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled_indices(train.size(), config.seed, epoch);
    EpochStats stats;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const std::size_t count = end - start;

      // Inner maximization against a frozen snapshot of the batch-start model.
      const auto snapshot = model.clone();
      std::vector<std::vector<TokenId>> adv_tokens(count);
      detail::parallel_for(count, config.workers, [&](std::size_t b) {
        const auto& inst = train[order[start + b]];
        AttackConfig inner = config.inner_attack;
        inner.sampler.seed ^= attack_key(epoch, inst.id);
        const AttackResult res = pgd_attack(inst.seq, inst.cands, vocab, *snapshot,
                                            scorer, inner,
                                            static_cast<std::uint64_t>(inst.id));
        adv_tokens[b] = res.perturbation.adv_tokens;
      });

      Vector grad = Vector::Zero(model.params().size());
      double loss = 0.0;
      for (std::size_t b = 0; b < count; ++b) {
        const auto& inst = train[order[start + b]];
        const int label = inst.seq.label.value();
        const Matrix adv_emb = vocab.embed(adv_tokens[b]);

        if (config.mode == TrainMode::kStandardAt) {
          const Vector probs = softmax(model.forward(adv_emb));
          loss += cross_entropy(probs, label);
          Vector logit_grad = probs;
          logit_grad[label] -= 1.0;
          grad += model.param_grad(adv_emb, logit_grad);
          if (config.clean_mix > 0.0) {
            const Matrix emb = vocab.embed(inst.seq.tokens);
            const Vector clean_probs = softmax(model.forward(emb));
            loss += config.clean_mix * cross_entropy(clean_probs, label);
            Vector clean_grad = clean_probs;
            clean_grad[label] -= 1.0;
            grad += config.clean_mix * model.param_grad(emb, clean_grad);
          }
        } else {
          const Matrix emb = vocab.embed(inst.seq.tokens);
          const Vector p = softmax(model.forward(emb));
          const Vector q = softmax(model.forward(adv_emb));
          Vector log_gap(p.size());
          double kl = 0.0;
          for (int c = 0; c < p.size(); ++c) {
            log_gap[c] = std::log(std::max(p[c], kLogFloor)) -
                         std::log(std::max(q[c], kLogFloor));
            kl += p[c] * log_gap[c];
          }
          loss += cross_entropy(p, label) + config.trades_beta * kl;

          Vector clean_grad = p;  // CE part
          clean_grad[label] -= 1.0;
          // d KL / d z_clean = (diag(p) - p p') (log p - log q)
          const double mean_gap = p.dot(log_gap);
          clean_grad += config.trades_beta *
                        (p.array() * (log_gap.array() - mean_gap)).matrix();
          grad += model.param_grad(emb, clean_grad);
          // d KL / d z_adv = q - p
          grad += model.param_grad(adv_emb, (config.trades_beta * (q - p)).eval());
        }
      }

      const double scale = 1.0 / static_cast<double>(count);
      loss *= scale;
      check_finite(loss, epoch);
      model.set_params(model.params() - config.learning_rate * scale * grad);
      stats.loss_sum += loss;
      ++stats.batches;
    }
    result.history.push_back(
        finish_epoch(epoch, stats, model, vocab, eval, scorer, config));
  }
  return result;
}

void save_metrics_log(const std::string& path, const TrainResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open metrics log for writing: " + path);
  for (const auto& m : result.history) {
    nlohmann::ordered_json rec;
    rec["epoch"] = m.epoch;
    rec["train_loss"] = m.train_loss;
    rec["clean_accuracy"] = m.clean_accuracy;
    rec["robust_accuracy"] = m.robust_accuracy;
    out << rec.dump() << "\n";
  }
}

}  // namespace advtok
