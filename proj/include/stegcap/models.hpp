#pragma once

/**
 * @file models.hpp
 * @brief From-scratch classifiers whose weights serve as cover media.
 *
 *  - multinomial logistic regression, full-batch gradient descent, L2;
 *  - ten one-vs-rest linear SVMs, hinge-loss subgradient descent, L2;
 *  - MLP with logistic hidden layers and a softmax output, trained with Adam.
 *
 * Trainers standardize features internally and fold the affine transform back
 * into the first layer, so a trained model consumes raw features. Rows are
 * sorted into a canonical order before training, which makes the result
 * independent of the input row order.
 *
 * Parameters are held as binary32 so that export to / import from a
 * WeightStore is lossless; scoring is done in double.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stegcap/corpus.hpp"
#include "stegcap/error.hpp"
#include "stegcap/random.hpp"
#include "stegcap/weight_store.hpp"

namespace stegcap {

enum class ModelKind { LogisticRegression, LinearSvm, Mlp };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LogisticRegression: return "lr";
    case ModelKind::LinearSvm: return "svm";
    case ModelKind::Mlp: return "mlp";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "lr") return ModelKind::LogisticRegression;
  if (s == "svm") return ModelKind::LinearSvm;
  if (s == "mlp") return ModelKind::Mlp;
  throw Error(ErrorCode::ParseError, "unknown model kind '" + s + "' (lr, svm, mlp)");
}

struct Hyperparameters {
  ModelKind kind = ModelKind::LogisticRegression;
  double learning_rate = 0.5;
  int epochs = 300;
  double l2 = 1e-4;
  std::vector<int> hidden_sizes = {128, 10};
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 42;

  static Hyperparameters defaults(ModelKind kind) {
    Hyperparameters hp;
    hp.kind = kind;
    switch (kind) {
      case ModelKind::LogisticRegression:
        hp.learning_rate = 0.5;
        hp.epochs = 300;
        hp.l2 = 0.1;
        break;
      case ModelKind::LinearSvm:
        hp.learning_rate = 0.05;
        hp.epochs = 300;
        hp.l2 = 0.1;
        break;
      case ModelKind::Mlp:
        // Early stopping does the regularizing; a large L2 collapses the 10-unit logistic layer.
        hp.learning_rate = 0.01;
        hp.epochs = 100;
        hp.l2 = 1e-4;
        break;
    }
    return hp;
  }

  void validate() const {
    if (!(learning_rate > 0.0) || epochs <= 0 || !(l2 >= 0.0) || batch_size < 0) {
      throw Error(ErrorCode::InvalidHyperparameters, "learning_rate, epochs must be positive; l2, batch >= 0");
    }
    if (kind == ModelKind::Mlp) {
      if (hidden_sizes.empty()) throw Error(ErrorCode::InvalidHyperparameters, "MLP needs hidden_sizes");
      for (int h : hidden_sizes) {
        if (h <= 0) throw Error(ErrorCode::InvalidHyperparameters, "hidden sizes must be positive");
      }
    }
  }

  std::string describe() const {
    std::string s = to_string(kind) + " lr=" + std::to_string(learning_rate) + " epochs=" + std::to_string(epochs) +
                    " l2=" + std::to_string(l2);
    if (kind == ModelKind::Mlp) {
      s += " hidden=(";
      for (std::size_t i = 0; i < hidden_sizes.size(); ++i) s += (i ? "," : "") + std::to_string(hidden_sizes[i]);
      s += ")";
    }
    if (batch_size > 0) s += " batch=" + std::to_string(batch_size);
    s += " seed=" + std::to_string(seed);
    return s;
  }
};

/// sklearn-style inverse regularization C mapped onto a mean-loss L2 strength.
inline double l2_from_c(double c, std::size_t n_train) { return 1.0 / (c * static_cast<double>(n_train)); }

// ---------------------------------------------------------------------------
// Objectives in double precision (also used directly by gradient checks)

/// Dense layers in "math" orientation: activations (N x in) * W (in x out) + b.
struct DenseParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  std::size_t layer_count() const { return weights.size(); }

  DenseParams zeros_like() const {
    DenseParams z;
    for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : biases) z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return z;
  }

  Eigen::VectorXd flatten() const {
    Eigen::Index n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    Eigen::VectorXd v(n);
    Eigen::Index k = 0;
    for (const auto& w : weights) {
      v.segment(k, w.size()) = w.reshaped();
      k += w.size();
    }
    for (const auto& b : biases) {
      v.segment(k, b.size()) = b;
      k += b.size();
    }
    return v;
  }

  void unflatten(const Eigen::VectorXd& v) {
    Eigen::Index k = 0;
    for (auto& w : weights) {
      w.reshaped() = v.segment(k, w.size());
      k += w.size();
    }
    for (auto& b : biases) {
      b = v.segment(k, b.size());
      k += b.size();
    }
  }

  bool all_finite() const {
    for (const auto& w : weights) {
      if (!w.allFinite()) return false;
    }
    for (const auto& b : biases) {
      if (!b.allFinite()) return false;
    }
    return true;
  }
};

namespace detail {

inline Eigen::MatrixXd one_hot(const std::vector<int>& labels, int classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return y;
}

/// Row-wise softmax, shifted by the row max.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p = z.colwise() - z.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

/// Mean cross-entropy of row-wise softmax(z) against one-hot y.
inline double cross_entropy(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y) {
  const Eigen::VectorXd m = z.rowwise().maxCoeff();
  const Eigen::VectorXd lse = m.array() + (z.colwise() - m).array().exp().rowwise().sum().log();
  const Eigen::VectorXd zy = (z.array() * y.array()).rowwise().sum();
  return (lse - zy).mean();
}

inline Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace detail

/// Softmax cross-entropy + (l2/2)||W||^2 for a single linear layer.
inline double lr_objective(const DenseParams& p, const Eigen::MatrixXd& x, const std::vector<int>& labels, double l2,
                           DenseParams* grad = nullptr) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::MatrixXd y = detail::one_hot(labels, static_cast<int>(p.weights[0].cols()));
  const Eigen::MatrixXd z = (x * p.weights[0]).rowwise() + p.biases[0].transpose();
  const double loss = detail::cross_entropy(z, y) + 0.5 * l2 * p.weights[0].squaredNorm();
  if (grad) {
    const Eigen::MatrixXd d = (detail::softmax_rows(z) - y) / n;
    grad->weights = {x.transpose() * d + l2 * p.weights[0]};
    grad->biases = {d.colwise().sum().transpose()};
  }
  return loss;
}

/// Sum over classes of one-vs-rest mean hinge loss + (l2/2)||W||^2.
/// The gradient is a subgradient; it is exact wherever no margin equals 1.
inline double svm_objective(const DenseParams& p, const Eigen::MatrixXd& x, const std::vector<int>& labels, double l2,
                            DenseParams* grad = nullptr) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::MatrixXd sign = 2.0 * detail::one_hot(labels, static_cast<int>(p.weights[0].cols())).array() - 1.0;
  const Eigen::MatrixXd z = (x * p.weights[0]).rowwise() + p.biases[0].transpose();
  const Eigen::MatrixXd margin = sign.array() * z.array();
  const Eigen::MatrixXd slack = (1.0 - margin.array()).max(0.0);
  const double loss = slack.sum() / n + 0.5 * l2 * p.weights[0].squaredNorm();
  if (grad) {
    const Eigen::MatrixXd d = ((margin.array() < 1.0).cast<double>() * -sign.array()).matrix() / n;
    grad->weights = {x.transpose() * d + l2 * p.weights[0]};
    grad->biases = {d.colwise().sum().transpose()};
  }
  return loss;
}

/// Logistic hidden layers, softmax output, mean cross-entropy + (l2/2) sum ||W_l||^2.
inline double mlp_objective(const DenseParams& p, const Eigen::MatrixXd& x, const std::vector<int>& labels, double l2,
                            DenseParams* grad = nullptr) {
  const std::size_t layers = p.layer_count();
  const auto n = static_cast<double>(x.rows());
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(layers);
  acts.push_back(x);
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < layers; ++l) {
    z = (acts.back() * p.weights[l]).rowwise() + p.biases[l].transpose();
    if (l + 1 < layers) acts.push_back(detail::logistic(z));
  }
  const Eigen::MatrixXd y = detail::one_hot(labels, static_cast<int>(p.weights.back().cols()));
  double loss = detail::cross_entropy(z, y);
  for (const auto& w : p.weights) loss += 0.5 * l2 * w.squaredNorm();
  if (grad) {
    grad->weights.assign(layers, {});
    grad->biases.assign(layers, {});
    Eigen::MatrixXd delta = (detail::softmax_rows(z) - y) / n;
    for (std::size_t l = layers; l-- > 0;) {
      grad->weights[l] = acts[l].transpose() * delta + l2 * p.weights[l];
      grad->biases[l] = delta.colwise().sum().transpose();
      if (l > 0) {
        const Eigen::MatrixXd& a = acts[l];
        delta = ((delta * p.weights[l].transpose()).array() * a.array() * (1.0 - a.array())).matrix();
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Trained models

struct DenseLayer {
  Eigen::MatrixXf weight;  // in x out
  Eigen::VectorXf bias;    // out
};

struct EvalReport {
  double accuracy = 0.0;
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> confusion{};  // [true][predicted]

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& row : confusion) s += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    return s;
  }
};

/// Argmax where NaN never wins; an all-NaN row maps to class 0.
inline int nan_safe_argmax(const Eigen::Ref<const Eigen::RowVectorXd>& scores) {
  int best = -1;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const double s = scores[j];
    if (std::isnan(s)) continue;
    if (best < 0 || s > scores[best]) best = static_cast<int>(j);
  }
  return best < 0 ? 0 : best;
}

class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(ModelKind kind, std::vector<DenseLayer> layers) : kind_(kind), layers_(std::move(layers)) {}

  ModelKind kind() const { return kind_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  Eigen::Index feature_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }

  /// Pre-activation scores of the final layer (N x 10).
  Eigen::MatrixXd scores(const Eigen::MatrixXd& x) const {
    if (x.cols() != feature_dim()) {
      throw Error(ErrorCode::DimMismatch, "model expects " + std::to_string(feature_dim()) + " features, got " +
                                              std::to_string(x.cols()));
    }
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = (a * layers_[l].weight.cast<double>()).rowwise() + layers_[l].bias.cast<double>().transpose();
      a = (l + 1 < layers_.size()) ? detail::logistic(z) : std::move(z);
    }
    return a;
  }

  /// Class probabilities (softmax of scores); meaningful for LR and MLP.
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x) const { return detail::softmax_rows(scores(x)); }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd s = scores(x);
    std::vector<int> out(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) out[static_cast<std::size_t>(i)] = nan_safe_argmax(s.row(i));
    return out;
  }

  /// Weight count excluding biases.
  std::uint64_t weight_count() const {
    std::uint64_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::uint64_t>(l.weight.size());
    return n;
  }

 private:
  ModelKind kind_ = ModelKind::LogisticRegression;
  std::vector<DenseLayer> layers_;
};

inline EvalReport evaluate(const TrainedModel& model, const Dataset& test) {
  test.validate();
  if (test.size() == 0) throw Error(ErrorCode::EmptyInput, "empty test set");
  const auto pred = model.predict(test.features);
  EvalReport r;
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(test.labels[i])][static_cast<std::size_t>(pred[i])];
    if (pred[i] == test.labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return r;
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

/// Lexicographic (label, features) order; ties keep input order but tied rows are identical.
inline std::vector<std::size_t> canonical_order(const Dataset& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (d.labels[a] != d.labels[b]) return d.labels[a] < d.labels[b];
    const auto ra = d.features.row(static_cast<Eigen::Index>(a));
    const auto rb = d.features.row(static_cast<Eigen::Index>(b));
    for (Eigen::Index j = 0; j < ra.size(); ++j) {
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    }
    return false;
  });
  return idx;
}

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  explicit Standardizer(const Eigen::MatrixXd& x) {
    mean = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mean;
    scale = (c.array().square().colwise().sum() / std::max<double>(1.0, static_cast<double>(x.rows()))).sqrt();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (!(scale[j] > 1e-12)) scale[j] = 1.0;
    }
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }

  /// Rewrites a first layer trained on standardized inputs to accept raw inputs.
  void fold(Eigen::MatrixXd& w, Eigen::VectorXd& b) const {
    w = w.array().colwise() / scale.transpose().array();
    b -= (mean * w).transpose();
  }
};

inline bool finite(double v) { return std::isfinite(v); }

class Adam {
 public:
  Adam(const DenseParams& like, double lr) : lr_(lr), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(DenseParams& p, const DenseParams& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = kBeta1 * m + (1.0 - kBeta1) * grad;
      v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      update(p.weights[l], g.weights[l], m_.weights[l], v_.weights[l]);
      update(p.biases[l], g.biases[l], m_.biases[l], v_.biases[l]);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  DenseParams m_, v_;
};

using Objective = double (*)(const DenseParams&, const Eigen::MatrixXd&, const std::vector<int>&, double,
                             DenseParams*);

inline TrainedModel fit(const Dataset& train, const Hyperparameters& hp, DenseParams params, Objective objective,
                        bool use_adam) {
  const auto order = canonical_order(train);
  const Dataset data = train.subset(order);
  const Standardizer standardizer(data.features);
  const Eigen::MatrixXd x = standardizer.apply(data.features);
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t batch = (hp.batch_size > 0 && static_cast<std::size_t>(hp.batch_size) < n)
                                ? static_cast<std::size_t>(hp.batch_size)
                                : n;

  std::optional<Adam> adam;
  if (use_adam) adam.emplace(params, hp.learning_rate);
  Rng shuffle_rng(mix_seed(hp.seed, 0xba7c4));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  DenseParams grad;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    if (batch < n) shuffle_rng.shuffle(perm);
    for (std::size_t start = 0; start < n; start += batch) {
      double loss = 0.0;
      if (batch == n) {
        loss = objective(params, x, data.labels, hp.l2, &grad);
      } else {
        const std::size_t len = std::min(batch, n - start);
        Eigen::MatrixXd xb(static_cast<Eigen::Index>(len), x.cols());
        std::vector<int> yb(len);
        for (std::size_t k = 0; k < len; ++k) {
          xb.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(perm[start + k]));
          yb[k] = data.labels[perm[start + k]];
        }
        loss = objective(params, xb, yb, hp.l2, &grad);
      }
      if (!finite(loss) || !grad.all_finite()) {
        throw Error(ErrorCode::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch) +
                                                  " (learning rate " + std::to_string(hp.learning_rate) + ")");
      }
      if (adam) {
        adam->step(params, grad);
      } else {
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
          params.weights[l] -= hp.learning_rate * grad.weights[l];
          params.biases[l] -= hp.learning_rate * grad.biases[l];
        }
      }
      if (!params.all_finite()) {
        throw Error(ErrorCode::NonFiniteLoss, "parameters became non-finite at epoch " + std::to_string(epoch));
      }
    }
  }

  standardizer.fold(params.weights[0], params.biases[0]);
  if (!params.all_finite()) throw Error(ErrorCode::NonFiniteLoss, "non-finite parameters after training");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    layers.push_back({params.weights[l].cast<float>(), params.biases[l].cast<float>()});
  }
  return TrainedModel(hp.kind, std::move(layers));
}

inline void check_trainable(const Dataset& train, const Hyperparameters& hp, ModelKind expected) {
  hp.validate();
  if (hp.kind != expected) throw Error(ErrorCode::InvalidHyperparameters, "hyperparameters are for another model");
  train.validate();
  if (train.size() == 0) throw Error(ErrorCode::EmptyInput, "empty training set");
  if (!train.features.allFinite()) throw Error(ErrorCode::NonFiniteLoss, "training features are not finite");
}

}  // namespace detail

inline TrainedModel train_lr(const Dataset& train, const Hyperparameters& hp) {
  detail::check_trainable(train, hp, ModelKind::LogisticRegression);
  DenseParams p;
  p.weights.push_back(Eigen::MatrixXd::Zero(train.features.cols(), kNumClasses));
  p.biases.push_back(Eigen::VectorXd::Zero(kNumClasses));
  return detail::fit(train, hp, std::move(p), &lr_objective, false);
}

inline TrainedModel train_svm_linear(const Dataset& train, const Hyperparameters& hp) {
  detail::check_trainable(train, hp, ModelKind::LinearSvm);
  DenseParams p;
  p.weights.push_back(Eigen::MatrixXd::Zero(train.features.cols(), kNumClasses));
  p.biases.push_back(Eigen::VectorXd::Zero(kNumClasses));
  return detail::fit(train, hp, std::move(p), &svm_objective, false);
}

/// Glorot-uniform weights, zero biases.
inline DenseParams init_mlp_params(Eigen::Index inputs, const std::vector<int>& hidden, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1417));
  DenseParams p;
  Eigen::Index in = inputs;
  std::vector<Eigen::Index> sizes(hidden.begin(), hidden.end());
  sizes.push_back(kNumClasses);
  for (Eigen::Index out : sizes) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Eigen::MatrixXd w(in, out);
    for (Eigen::Index c = 0; c < out; ++c) {
      for (Eigen::Index r = 0; r < in; ++r) w(r, c) = rng.uniform(-limit, limit);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
    in = out;
  }
  return p;
}

inline TrainedModel train_mlp(const Dataset& train, const Hyperparameters& hp) {
  detail::check_trainable(train, hp, ModelKind::Mlp);
  return detail::fit(train, hp, init_mlp_params(train.features.cols(), hp.hidden_sizes, hp.seed), &mlp_objective,
                     true);
}

inline TrainedModel train(const Dataset& data, const Hyperparameters& hp) {
  switch (hp.kind) {
    case ModelKind::LogisticRegression: return train_lr(data, hp);
    case ModelKind::LinearSvm: return train_svm_linear(data, hp);
    case ModelKind::Mlp: return train_mlp(data, hp);
  }
  throw Error(ErrorCode::InvalidHyperparameters, "unknown model kind");
}

// ---------------------------------------------------------------------------
// Grid search

struct GridCell {
  Hyperparameters hp;
  std::optional<double> accuracy;  // empty when training failed
  std::string error;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  Hyperparameters best;
  std::vector<GridCell> cells;
};

/// Exhaustive search; highest validation accuracy wins, earlier cells win ties.
inline GridSearchResult grid_search(const Dataset& train, const Dataset& val, const std::vector<Hyperparameters>& grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidHyperparameters, "empty grid");
  GridSearchResult result;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    GridCell cell{grid[i], std::nullopt, {}};
    try {
      cell.accuracy = evaluate(stegcap::train(train, grid[i]), val).accuracy;
      if (!best || *cell.accuracy > *result.cells[*best].accuracy) best = i;
    } catch (const Error& e) {
      cell.error = e.what();
    }
    result.cells.push_back(std::move(cell));
  }
  if (!best) throw Error(ErrorCode::NonFiniteLoss, "every grid cell failed to train");
  result.best_index = *best;
  result.best = grid[*best];
  return result;
}

/// 5 regularization strengths x 6 iteration budgets, mirroring the reference LR search.
inline std::vector<Hyperparameters> lr_reference_grid(const Hyperparameters& base, std::size_t n_train) {
  std::vector<Hyperparameters> grid;
  for (double c : {0.2, 0.3, 0.5, 0.7, 0.8}) {
    for (int iters : {50, 80, 100, 120, 200, 500}) {
      Hyperparameters hp = base;
      hp.kind = ModelKind::LogisticRegression;
      hp.l2 = l2_from_c(c, n_train);
      hp.epochs = iters;
      grid.push_back(hp);
    }
  }
  return grid;
}

inline std::vector<Hyperparameters> svm_reference_grid(const Hyperparameters& base, std::size_t n_train) {
  std::vector<Hyperparameters> grid;
  for (double c : {0.1, 1.0, 10.0}) {
    Hyperparameters hp = base;
    hp.kind = ModelKind::LinearSvm;
    hp.l2 = l2_from_c(c, n_train);
    grid.push_back(hp);
  }
  return grid;
}

/// First hidden width x L2 strength x seed; the second hidden layer stays at 10.
inline std::vector<Hyperparameters> mlp_reference_grid(const Hyperparameters& base) {
  std::vector<Hyperparameters> grid;
  for (int width : {64, 96, 128}) {
    for (double alpha : {0.0001, 0.05}) {
      for (std::uint64_t seed : {30, 40, 50}) {
        Hyperparameters hp = base;
        hp.kind = ModelKind::Mlp;
        hp.hidden_sizes = {width, 10};
        hp.l2 = alpha;
        hp.seed = seed;
        grid.push_back(hp);
      }
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// WeightStore bridge
//
// LR / SVM: "<kind>.weight" [10, D] (class-major), "<kind>.bias" [10]; both Output.
// MLP: "mlp.hidden<i>.weight" [in, out] and ".bias" (Hidden), then
//      "mlp.output.weight" [in, 10] and "mlp.output.bias" (Output).

namespace detail {

inline TensorRecord make_tensor(std::string name, Role role, std::vector<std::uint32_t> dims, std::vector<float> data) {
  return {std::move(name), role, std::move(dims), std::move(data)};
}

inline std::vector<float> row_major(const Eigen::MatrixXf& m) {
  std::vector<float> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

inline Eigen::MatrixXf from_row_major(const std::vector<float>& data, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data.data(), rows,
                                                                                                 cols);
}

inline const TensorRecord& require(const WeightStore& store, const std::string& name, Role role) {
  const std::size_t idx = store.find(name);
  if (idx == WeightStore::npos) throw Error(ErrorCode::ShapeMismatch, "missing tensor '" + name + "'");
  const auto& t = store[idx];
  if (t.role != role) {
    throw Error(ErrorCode::RoleMismatch, "tensor '" + name + "' has role " + std::string(to_string(t.role)) +
                                             ", expected " + std::string(to_string(role)));
  }
  return t;
}

inline void require_dims(const TensorRecord& t, std::vector<std::uint32_t> dims) {
  if (t.dims != dims) throw Error(ErrorCode::ShapeMismatch, "tensor '" + t.name + "' has unexpected shape");
}

}  // namespace detail

inline WeightStore export_weights(const TrainedModel& model) {
  WeightStore store;
  const auto& layers = model.layers();
  if (model.kind() != ModelKind::Mlp) {
    const std::string prefix = to_string(model.kind());
    const auto& l = layers.at(0);
    const Eigen::MatrixXf w = l.weight.transpose();
    store.add(detail::make_tensor(prefix + ".weight", Role::Output,
                                  {static_cast<std::uint32_t>(w.rows()), static_cast<std::uint32_t>(w.cols())},
                                  detail::row_major(w)));
    store.add(detail::make_tensor(prefix + ".bias", Role::Output, {static_cast<std::uint32_t>(l.bias.size())},
                                  std::vector<float>(l.bias.data(), l.bias.data() + l.bias.size())));
    return store;
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool last = i + 1 == layers.size();
    const std::string prefix = last ? "mlp.output" : "mlp.hidden" + std::to_string(i);
    const Role role = last ? Role::Output : Role::Hidden;
    const auto& l = layers[i];
    store.add(detail::make_tensor(
        prefix + ".weight", role,
        {static_cast<std::uint32_t>(l.weight.rows()), static_cast<std::uint32_t>(l.weight.cols())},
        detail::row_major(l.weight)));
    store.add(detail::make_tensor(prefix + ".bias", role, {static_cast<std::uint32_t>(l.bias.size())},
                                  std::vector<float>(l.bias.data(), l.bias.data() + l.bias.size())));
  }
  return store;
}

inline std::optional<ModelKind> infer_model_kind(const WeightStore& store) {
  if (store.find("lr.weight") != WeightStore::npos) return ModelKind::LogisticRegression;
  if (store.find("svm.weight") != WeightStore::npos) return ModelKind::LinearSvm;
  if (store.find("mlp.output.weight") != WeightStore::npos) return ModelKind::Mlp;
  return std::nullopt;
}

inline TrainedModel import_weights(ModelKind kind, const WeightStore& store) {
  if (kind != ModelKind::Mlp) {
    const std::string prefix = to_string(kind);
    const auto& w = detail::require(store, prefix + ".weight", Role::Output);
    if (w.dims.size() != 2 || w.dims[0] != kNumClasses) {
      throw Error(ErrorCode::ShapeMismatch, "'" + w.name + "' must be [10, D]");
    }
    const auto& b = detail::require(store, prefix + ".bias", Role::Output);
    detail::require_dims(b, {kNumClasses});
    DenseLayer layer;
    layer.weight = detail::from_row_major(w.data, kNumClasses, w.dims[1]).transpose();
    layer.bias = Eigen::Map<const Eigen::VectorXf>(b.data.data(), kNumClasses);
    return TrainedModel(kind, {std::move(layer)});
  }
  std::vector<DenseLayer> layers;
  std::optional<std::uint32_t> prev_out;
  auto load = [&](const std::string& prefix, Role role) {
    const auto& w = detail::require(store, prefix + ".weight", role);
    if (w.dims.size() != 2 || (prev_out && w.dims[0] != *prev_out)) {
      throw Error(ErrorCode::ShapeMismatch, "'" + w.name + "' does not chain with the previous layer");
    }
    const auto& b = detail::require(store, prefix + ".bias", role);
    detail::require_dims(b, {w.dims[1]});
    DenseLayer layer;
    layer.weight = detail::from_row_major(w.data, w.dims[0], w.dims[1]);
    layer.bias = Eigen::Map<const Eigen::VectorXf>(b.data.data(), w.dims[1]);
    prev_out = w.dims[1];
    layers.push_back(std::move(layer));
  };
  for (std::size_t i = 0; store.find("mlp.hidden" + std::to_string(i) + ".weight") != WeightStore::npos; ++i) {
    load("mlp.hidden" + std::to_string(i), Role::Hidden);
  }
  if (layers.empty()) throw Error(ErrorCode::ShapeMismatch, "MLP store has no hidden layers");
  load("mlp.output", Role::Output);
  if (*prev_out != kNumClasses) throw Error(ErrorCode::ShapeMismatch, "MLP output layer must have 10 units");
  return TrainedModel(kind, std::move(layers));
}

}  // namespace stegcap
