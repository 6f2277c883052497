#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "advtok/types.hpp"

namespace advtok {

/// Differentiable classifier over token embeddings. forward maps an L x d
/// embedding matrix to C logits; backward pulls a logit-space gradient back
/// to an L x d embedding gradient. Both are deterministic.
class VictimModel {
 public:
  virtual ~VictimModel() = default;

  virtual int class_count() const = 0;
  virtual Vector forward(const Matrix& embeddings) const = 0;
  virtual Matrix backward(const Matrix& embeddings,
                          const Vector& logit_grad) const = 0;
};

/// Per-(position, token) language-model-style cost; lower is more fluent.
class FluencyScorer {
 public:
  virtual ~FluencyScorer() = default;
  virtual double score(const TokenSequence& seq, int position, TokenId token) const = 0;
};

/// A victim whose parameters are exposed as one flat vector, for training.
class TrainableModel : public VictimModel {
 public:
  virtual Vector params() const = 0;
  virtual void set_params(const Vector& params) = 0;
  /// Gradient of logit_grad . logits w.r.t. the flat parameter vector.
  virtual Vector param_grad(const Matrix& embeddings,
                            const Vector& logit_grad) const = 0;
  virtual std::unique_ptr<TrainableModel> clone() const = 0;
  virtual std::string kind() const = 0;
};

/// Mean-pooled affine classifier: logits = pool' W + b.
class LinearBagModel final : public TrainableModel {
 public:
  LinearBagModel(Matrix weight, Vector bias);  // weight is d x C
  static LinearBagModel random(int dim, int classes, std::uint64_t seed);

  int class_count() const override { return static_cast<int>(bias_.size()); }
  Vector forward(const Matrix& embeddings) const override;
  Matrix backward(const Matrix& embeddings, const Vector& logit_grad) const override;

  Vector params() const override;
  void set_params(const Vector& params) override;
  Vector param_grad(const Matrix& embeddings, const Vector& logit_grad) const override;
  std::unique_ptr<TrainableModel> clone() const override;
  std::string kind() const override { return "linear"; }

  const Matrix& weight() const { return weight_; }
  const Vector& bias() const { return bias_; }

 private:
  Matrix weight_;
  Vector bias_;
};

/// Mean pooling, one tanh hidden layer d -> h, affine head h -> C.
class MlpModel final : public TrainableModel {
 public:
  MlpModel(Matrix w1, Vector b1, Matrix w2, Vector b2);  // w1: d x h, w2: h x C
  static MlpModel random(int dim, int hidden, int classes, std::uint64_t seed);

  int class_count() const override { return static_cast<int>(b2_.size()); }
  Vector forward(const Matrix& embeddings) const override;
  Matrix backward(const Matrix& embeddings, const Vector& logit_grad) const override;

  Vector params() const override;
  void set_params(const Vector& params) override;
  Vector param_grad(const Matrix& embeddings, const Vector& logit_grad) const override;
  std::unique_ptr<TrainableModel> clone() const override;
  std::string kind() const override { return "mlp"; }

  int hidden_size() const { return static_cast<int>(b1_.size()); }

 private:
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int entries_checked = 0;
  bool pass = false;
};

/// Central finite differences of a fixed scalar loss (a seeded linear
/// functional of the logits) against the model's backward output.
GradCheckReport grad_check(const VictimModel& model, const Matrix& embeddings,
                           double tolerance, double step = 1e-5);

/// Lookup scorer over a token -> cost table. Missing tokens cost +infinity,
/// which effectively forbids them as substitutions.
class TableFluencyScorer final : public FluencyScorer {
 public:
  explicit TableFluencyScorer(std::unordered_map<TokenId, double> costs)
      : costs_(std::move(costs)) {}

  double score(const TokenSequence& seq, int position, TokenId token) const override;

  /// Unigram surprisal -log(count(v) / total) over a corpus.
  static TableFluencyScorer unigram_surprisal(const std::vector<TokenSequence>& corpus);

  const std::unordered_map<TokenId, double>& costs() const { return costs_; }

 private:
  std::unordered_map<TokenId, double> costs_;
};

/// White-box bundle persisted to a checkpoint file: the model shares the
/// vocabulary's embedding table with the attack.
struct Checkpoint {
  Vocabulary vocab;
  std::unique_ptr<TrainableModel> model;
};

void save_checkpoint(const std::string& path, const Vocabulary& vocab,
                     const TrainableModel& model);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace advtok
