#include "advtok/victim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "advtok/errors.hpp"
#include "advtok/rng.hpp"

namespace advtok {

namespace {

Vector mean_pool(const Matrix& embeddings) {
  return embeddings.colwise().mean();
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double scale,
                     CounterRng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = scale * (2.0 * rng.next_unit() - 1.0);
    }
  }
  return m;
}

}  // namespace

LinearBagModel::LinearBagModel(Matrix weight, Vector bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (weight_.cols() != bias_.size() || bias_.size() < 2) {
    throw std::invalid_argument("LinearBagModel: weight is d x C with C >= 2");
  }
}

LinearBagModel LinearBagModel::random(int dim, int classes, std::uint64_t seed) {
  CounterRng rng(StreamKey{seed, 0, 0, 0, StreamPhase::kWeights});
  return LinearBagModel(random_matrix(dim, classes, 0.5, rng),
                        random_matrix(classes, 1, 0.1, rng).col(0));
}

Vector LinearBagModel::forward(const Matrix& embeddings) const {
  return weight_.transpose() * mean_pool(embeddings) + bias_;
}

Matrix LinearBagModel::backward(const Matrix& embeddings,
                                const Vector& logit_grad) const {
  // d(pool)/d(row_i) = 1/L, so every row shares the same gradient.
  const double inv_len = 1.0 / static_cast<double>(embeddings.rows());
  Vector row = weight_ * logit_grad * inv_len;
  Matrix grad(embeddings.rows(), embeddings.cols());
  grad.rowwise() = row.transpose();
  return grad;
}

Vector LinearBagModel::params() const {
  Vector out(weight_.size() + bias_.size());
  out.head(weight_.size()) = Eigen::Map<const Vector>(weight_.data(), weight_.size());
  out.tail(bias_.size()) = bias_;
  return out;
}

void LinearBagModel::set_params(const Vector& params) {
  if (params.size() != weight_.size() + bias_.size()) {
    throw std::invalid_argument("LinearBagModel: parameter size mismatch");
  }
  Eigen::Map<Vector>(weight_.data(), weight_.size()) = params.head(weight_.size());
  bias_ = params.tail(bias_.size());
}

Vector LinearBagModel::param_grad(const Matrix& embeddings,
                                  const Vector& logit_grad) const {
  const Vector pool = mean_pool(embeddings);
  Matrix w_grad = pool * logit_grad.transpose();  // d x C
  Vector out(weight_.size() + bias_.size());
  out.head(weight_.size()) = Eigen::Map<const Vector>(w_grad.data(), w_grad.size());
  out.tail(bias_.size()) = logit_grad;
  return out;
}

std::unique_ptr<TrainableModel> LinearBagModel::clone() const {
  return std::make_unique<LinearBagModel>(*this);
}

MlpModel::MlpModel(Matrix w1, Vector b1, Matrix w2, Vector b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
  if (w1_.cols() != b1_.size() || w2_.rows() != b1_.size() ||
      w2_.cols() != b2_.size() || b2_.size() < 2) {
    throw std::invalid_argument("MlpModel: inconsistent layer shapes");
  }
}

MlpModel MlpModel::random(int dim, int hidden, int classes, std::uint64_t seed) {
  CounterRng rng(StreamKey{seed, 0, 0, 0, StreamPhase::kWeights});
  const double s1 = 1.0 / std::sqrt(static_cast<double>(dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  return MlpModel(random_matrix(dim, hidden, s1, rng), Vector::Zero(hidden),
                  random_matrix(hidden, classes, s2, rng), Vector::Zero(classes));
}

Vector MlpModel::forward(const Matrix& embeddings) const {
  const Vector pool = mean_pool(embeddings);
  const Vector hidden = (w1_.transpose() * pool + b1_).array().tanh();
  return w2_.transpose() * hidden + b2_;
}

Matrix MlpModel::backward(const Matrix& embeddings, const Vector& logit_grad) const {
  const Vector pool = mean_pool(embeddings);
  const Vector pre = w1_.transpose() * pool + b1_;
  const Vector hidden = pre.array().tanh();
  const Vector hidden_grad = w2_ * logit_grad;
  const Vector pre_grad =
      hidden_grad.array() * (1.0 - hidden.array().square());
  const double inv_len = 1.0 / static_cast<double>(embeddings.rows());
  Vector row = w1_ * pre_grad * inv_len;
  Matrix grad(embeddings.rows(), embeddings.cols());
  grad.rowwise() = row.transpose();
  return grad;
}

Vector MlpModel::params() const {
  Vector out(w1_.size() + b1_.size() + w2_.size() + b2_.size());
  Eigen::Index at = 0;
  out.segment(at, w1_.size()) = Eigen::Map<const Vector>(w1_.data(), w1_.size());
  at += w1_.size();
  out.segment(at, b1_.size()) = b1_;
  at += b1_.size();
  out.segment(at, w2_.size()) = Eigen::Map<const Vector>(w2_.data(), w2_.size());
  at += w2_.size();
  out.segment(at, b2_.size()) = b2_;
  return out;
}

void MlpModel::set_params(const Vector& params) {
  if (params.size() != w1_.size() + b1_.size() + w2_.size() + b2_.size()) {
    throw std::invalid_argument("MlpModel: parameter size mismatch");
  }
  Eigen::Index at = 0;
  Eigen::Map<Vector>(w1_.data(), w1_.size()) = params.segment(at, w1_.size());
  at += w1_.size();
  b1_ = params.segment(at, b1_.size());
  at += b1_.size();
  Eigen::Map<Vector>(w2_.data(), w2_.size()) = params.segment(at, w2_.size());
  at += w2_.size();
  b2_ = params.segment(at, b2_.size());
}

Vector MlpModel::param_grad(const Matrix& embeddings, const Vector& logit_grad) const {
  const Vector pool = mean_pool(embeddings);
  const Vector pre = w1_.transpose() * pool + b1_;
  const Vector hidden = pre.array().tanh();
  const Vector hidden_grad = w2_ * logit_grad;
  const Vector pre_grad = hidden_grad.array() * (1.0 - hidden.array().square());

  Matrix w1_grad = pool * pre_grad.transpose();    // d x h
  Matrix w2_grad = hidden * logit_grad.transpose();  // h x C

  Vector out(w1_.size() + b1_.size() + w2_.size() + b2_.size());
  Eigen::Index at = 0;
  out.segment(at, w1_.size()) = Eigen::Map<const Vector>(w1_grad.data(), w1_grad.size());
  at += w1_.size();
  out.segment(at, b1_.size()) = pre_grad;
  at += b1_.size();
  out.segment(at, w2_.size()) = Eigen::Map<const Vector>(w2_grad.data(), w2_grad.size());
  at += w2_.size();
  out.segment(at, b2_.size()) = logit_grad;
  return out;
}

std::unique_ptr<TrainableModel> MlpModel::clone() const {
  return std::make_unique<MlpModel>(*this);
}

GradCheckReport grad_check(const VictimModel& model, const Matrix& embeddings,
                           double tolerance, double step) {
  if (embeddings.size() > 10000) {
    throw std::invalid_argument("grad_check: embedding matrix too large");
  }
  // Fixed scalar loss: a seeded linear functional of the logits, so backward
  // must reproduce its full Jacobian-vector product.
  CounterRng rng(StreamKey{12345, 0, 0, 0, StreamPhase::kWeights});
  Vector coeff(model.class_count());
  for (int c = 0; c < model.class_count(); ++c) {
    coeff[c] = 2.0 * rng.next_unit() - 1.0;
  }

  const Matrix analytic = model.backward(embeddings, coeff);
  GradCheckReport report;
  Matrix probe = embeddings;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) {
      const double saved = probe(i, j);
      probe(i, j) = saved + step;
      const double up = coeff.dot(model.forward(probe));
      probe(i, j) = saved - step;
      const double down = coeff.dot(model.forward(probe));
      probe(i, j) = saved;

      const double fd = (up - down) / (2.0 * step);
      const double an = analytic(i, j);
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(fd - an) / scale);
      ++report.entries_checked;
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

double TableFluencyScorer::score(const TokenSequence& seq, int position,
                                 TokenId token) const {
  (void)seq;
  (void)position;
  auto it = costs_.find(token);
  if (it == costs_.end()) return std::numeric_limits<double>::infinity();
  return it->second;
}

TableFluencyScorer TableFluencyScorer::unigram_surprisal(
    const std::vector<TokenSequence>& corpus) {
  std::unordered_map<TokenId, std::int64_t> counts;
  std::int64_t total = 0;
  for (const auto& seq : corpus) {
    for (TokenId t : seq.tokens) {
      ++counts[t];
      ++total;
    }
  }
  std::unordered_map<TokenId, double> costs;
  costs.reserve(counts.size());
  for (const auto& [token, count] : counts) {
    costs[token] = -std::log(static_cast<double>(count) / static_cast<double>(total));
  }
  return TableFluencyScorer(std::move(costs));
}

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& m) {
  // Row-major flat list plus explicit shape.
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      flat.push_back(m(i, j));
    }
  }
  out["data"] = flat;
  return out;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw DataError("checkpoint matrix shape/data mismatch");
  }
  Matrix m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      m(i, j2) = flat[at++];
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const json& j) {
  const auto flat = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

constexpr const char* kCheckpointFormat = "advtok-model";
constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Vocabulary& vocab,
                     const TrainableModel& model) {
  json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["kind"] = model.kind();
  doc["vocab"] = matrix_to_json(vocab.embeddings());
  if (model.kind() == "linear") {
    const auto& linear = dynamic_cast<const LinearBagModel&>(model);
    doc["weight"] = matrix_to_json(linear.weight());
    doc["bias"] = vector_to_json(linear.bias());
  } else if (model.kind() == "mlp") {
    const auto& mlp = dynamic_cast<const MlpModel&>(model);
    doc["hidden"] = mlp.hidden_size();
    doc["classes"] = mlp.class_count();
    doc["params"] = vector_to_json(mlp.params());
  } else {
    throw std::invalid_argument("save_checkpoint: unknown model kind " + model.kind());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << doc.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path, 1, std::string("invalid checkpoint JSON: ") + e.what());
  }
  if (doc.value("format", "") != kCheckpointFormat) {
    throw DataError(path, 1, "not an advtok model checkpoint");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw DataError(path, 1, "unsupported checkpoint version");
  }

  Vocabulary vocab(matrix_from_json(doc.at("vocab")));
  const std::string kind = doc.at("kind").get<std::string>();
  std::unique_ptr<TrainableModel> model;
  if (kind == "linear") {
    model = std::make_unique<LinearBagModel>(matrix_from_json(doc.at("weight")),
                                             vector_from_json(doc.at("bias")));
  } else if (kind == "mlp") {
    const int hidden = doc.at("hidden").get<int>();
    const int classes = doc.at("classes").get<int>();
    MlpModel mlp(Matrix::Zero(vocab.dim(), hidden), Vector::Zero(hidden),
                 Matrix::Zero(hidden, classes), Vector::Zero(classes));
    mlp.set_params(vector_from_json(doc.at("params")));
    model = std::make_unique<MlpModel>(std::move(mlp));
  } else {
    throw DataError(path, 1, "unknown model kind: " + kind);
  }
  return Checkpoint{std::move(vocab), std::move(model)};
}

}  // namespace advtok
