#pragma once

#include <string>
#include <vector>

#include "advtok/attack.hpp"
#include "advtok/io.hpp"
#include "advtok/victim.hpp"

namespace advtok {

enum class TrainMode { kStandardAt, kTrades };

struct TrainConfig {
  int epochs = 2;
  int batch_size = 32;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kStandardAt;
  double trades_beta = 1.0;
  /// Weight on the clean cross-entropy mixed into standard AT (0 trains on
  /// adversarial examples only).
  double clean_mix = 0.0;
  int workers = 1;
  /// Train-time attack strength: 5 PGD steps, a single restart.
  AttackConfig inner_attack{.iters = 5, .max_restarts = 1};
  /// Evaluation attack strength: 20 steps, 10 restarts.
  AttackConfig eval_attack{};
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
};

double clean_accuracy(const VictimModel& model, const Vocabulary& vocab,
                      const Dataset& data);

/// Accuracy under attack: an example counts as robust iff the clean model
/// classifies it correctly and the attack fails to flip it.
double robust_accuracy(const VictimModel& model, const Vocabulary& vocab,
                       const Dataset& data, const FluencyScorer& scorer,
                       const AttackConfig& attack, int workers = 1);

/// Plain mini-batch gradient descent on the clean cross-entropy. Per-epoch
/// metrics use the eval set; robust accuracy uses config.eval_attack.
TrainResult train_clean(TrainableModel& model, const Vocabulary& vocab,
                        const Dataset& train, const Dataset& eval,
                        const FluencyScorer& scorer, const TrainConfig& config);

/// Min-max adversarial training. standard_at minimizes cross-entropy on
/// attacked tokens (inner maximizer = the PGD attack against the batch-start
/// model snapshot); trades minimizes CE(clean) + beta * KL(clean || adv).
/// trades with beta = 0 reduces exactly to clean training.
TrainResult adv_train(TrainableModel& model, const Vocabulary& vocab,
                      const Dataset& train, const Dataset& eval,
                      const FluencyScorer& scorer, const TrainConfig& config);

void save_metrics_log(const std::string& path, const TrainResult& result);

}  // namespace advtok
