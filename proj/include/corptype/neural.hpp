// Copyright 2026 The corptype Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Multi-label MLP shared by the global and context scorers: one tanh hidden
// layer feeding an independent logistic unit per type,
//
//   p_t(x) = sigmoid(head_t . tanh(W x + b) + c_t),
//
// trained on summed per-type binary cross-entropy with minibatch AdaGrad and
// early stopping on a dev set.

#ifndef CORPTYPE_NEURAL_HPP
#define CORPTYPE_NEURAL_HPP

#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "corptype/common.hpp"

namespace corptype {

struct MlpShape {
  std::size_t inputs = 0;  // n
  std::size_t hidden = 0;  // h
  std::size_t types = 0;   // |T|

  std::size_t num_params() const { return hidden * inputs + hidden + types * hidden + types; }
  bool operator==(const MlpShape&) const = default;
};

// Parameters live in one flat vector so the optimizer and the gradient can
// treat them uniformly. Layout: W (h x n, column-major), b (h), heads
// (|T| x h, column-major), head biases (|T|). A gradient is also an Mlp.
class Mlp {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  Mlp() = default;
  explicit Mlp(MlpShape shape)
      : shape_(shape), params_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.num_params()))) {
    if (shape.inputs == 0 || shape.hidden == 0 || shape.types == 0) {
      throw ValidationError("MLP dimensions must be positive");
    }
  }

  // Uniform(-r, r), r = sqrt(6 / (fan_in + fan_out)); biases zero.
  static Mlp initialized(MlpShape shape, Rng& rng) {
    Mlp m(shape);
    auto fill = [&](auto block, double fan_in, double fan_out) {
      const double r = std::sqrt(6.0 / (fan_in + fan_out));
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = (2.0 * rng.uniform() - 1.0) * r;
      }
    };
    fill(m.w_input(), static_cast<double>(shape.inputs), static_cast<double>(shape.hidden));
    fill(m.heads(), static_cast<double>(shape.hidden), static_cast<double>(shape.types));
    return m;
  }

  const MlpShape& shape() const { return shape_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  MatrixMap w_input() { return {params_.data(), rows(shape_.hidden), rows(shape_.inputs)}; }
  ConstMatrixMap w_input() const { return {params_.data(), rows(shape_.hidden), rows(shape_.inputs)}; }
  VectorMap b_input() { return {params_.data() + off_b(), rows(shape_.hidden)}; }
  ConstVectorMap b_input() const { return {params_.data() + off_b(), rows(shape_.hidden)}; }
  MatrixMap heads() { return {params_.data() + off_heads(), rows(shape_.types), rows(shape_.hidden)}; }
  ConstMatrixMap heads() const {
    return {params_.data() + off_heads(), rows(shape_.types), rows(shape_.hidden)};
  }
  VectorMap head_bias() { return {params_.data() + off_c(), rows(shape_.types)}; }
  ConstVectorMap head_bias() const { return {params_.data() + off_c(), rows(shape_.types)}; }

 private:
  static Eigen::Index rows(std::size_t n) { return static_cast<Eigen::Index>(n); }
  std::size_t off_b() const { return shape_.hidden * shape_.inputs; }
  std::size_t off_heads() const { return off_b() + shape_.hidden; }
  std::size_t off_c() const { return off_heads() + shape_.types * shape_.hidden; }

  MlpShape shape_;
  Eigen::VectorXd params_;
};

struct LabeledExample {
  Eigen::VectorXd features;
  Eigen::VectorXd labels;  // multi-hot
};

namespace detail {

inline double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Keeps reported probabilities strictly inside (0, 1).
inline constexpr double kProbFloor = 1e-15;

}  // namespace detail

inline Eigen::VectorXd forward(const Mlp& mlp, const Eigen::Ref<const Eigen::VectorXd>& features) {
  if (static_cast<std::size_t>(features.size()) != mlp.shape().inputs) {
    throw ValidationError("feature dimension " + std::to_string(features.size()) +
                          " does not match MLP input " + std::to_string(mlp.shape().inputs));
  }
  const Eigen::VectorXd hidden = (mlp.w_input() * features + mlp.b_input()).array().tanh();
  const Eigen::VectorXd logits = mlp.heads() * hidden + mlp.head_bias();
  Eigen::VectorXd p(logits.size());
  for (Eigen::Index t = 0; t < logits.size(); ++t) {
    p[t] = std::clamp(detail::stable_sigmoid(logits[t]), detail::kProbFloor, 1.0 - detail::kProbFloor);
  }
  return p;
}

struct LossAndGradient {
  double loss = 0.0;
  Mlp gradient;
};

// Mean over examples of the summed per-type binary cross-entropy, and its
// exact gradient.
inline LossAndGradient loss_and_gradient(const Mlp& mlp, std::span<const LabeledExample* const> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const auto& s = mlp.shape();
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.inputs), b);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(s.types), b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& ex = *batch[static_cast<std::size_t>(i)];
    if (static_cast<std::size_t>(ex.features.size()) != s.inputs) {
      throw ValidationError("feature dimension does not match MLP input");
    }
    if (static_cast<std::size_t>(ex.labels.size()) != s.types) {
      throw ValidationError("label vector length does not match number of types");
    }
    x.col(i) = ex.features;
    y.col(i) = ex.labels;
  }

  const Eigen::MatrixXd hidden = ((mlp.w_input() * x).colwise() + mlp.b_input()).array().tanh();
  const Eigen::MatrixXd logits = (mlp.heads() * hidden).colwise() + mlp.head_bias();

  LossAndGradient out{0.0, Mlp(s)};
  Eigen::MatrixXd delta(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      const double z = logits(t, j);
      loss += detail::softplus(z) - y(t, j) * z;
      delta(t, j) = detail::stable_sigmoid(z) - y(t, j);
    }
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  out.loss = loss * inv_b;
  delta *= inv_b;

  auto& g = out.gradient;
  g.heads() = delta * hidden.transpose();
  g.head_bias() = delta.rowwise().sum();
  const Eigen::MatrixXd dhidden =
      ((mlp.heads().transpose() * delta).array() * (1.0 - hidden.array().square())).matrix();
  g.w_input() = dhidden * x.transpose();
  g.b_input() = dhidden.rowwise().sum();
  return out;
}

inline LossAndGradient loss_and_gradient(const Mlp& mlp, std::span<const LabeledExample> batch) {
  std::vector<const LabeledExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& ex : batch) ptrs.push_back(&ex);
  return loss_and_gradient(mlp, std::span<const LabeledExample* const>(ptrs));
}

// Mean loss over a data set, evaluated in chunks.
inline double mean_loss(const Mlp& mlp, std::span<const LabeledExample> data) {
  if (data.empty()) throw ValidationError("empty data set");
  constexpr std::size_t kChunk = 512;
  double total = 0.0;
  for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, data.size() - begin);
    total += loss_and_gradient(mlp, data.subspan(begin, n)).loss * static_cast<double>(n);
  }
  return total / static_cast<double>(data.size());
}

struct TrainConfig {
  double learning_rate = 0.1;
  double adagrad_epsilon = 1e-8;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  enum class EarlyStop { kDevLoss, kDevMicroF1 } early_stop = EarlyStop::kDevLoss;

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("learning_rate must be positive");
    if (!(adagrad_epsilon > 0)) throw ValidationError("adagrad_epsilon must be positive");
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (max_epochs == 0) throw ValidationError("max_epochs must be positive");
  }
};

// accumulator += g^2; param -= lr * g / (sqrt(accumulator) + eps)
inline void adagrad_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                         Eigen::Ref<Eigen::VectorXd> accumulators, double learning_rate,
                         double epsilon) {
  if (params.size() != grads.size() || params.size() != accumulators.size()) {
    throw ValidationError("adagrad_step: shape mismatch");
  }
  accumulators.array() += grads.array().square();
  params.array() -= learning_rate * grads.array() / (accumulators.array().sqrt() + epsilon);
}

// Micro F1 of per-(example, type) decisions at probability 0.5.
inline double micro_f1_at_half(const Mlp& mlp, std::span<const LabeledExample> data) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& ex : data) {
    const Eigen::VectorXd p = forward(mlp, ex.features);
    for (Eigen::Index t = 0; t < p.size(); ++t) {
      const bool predicted = p[t] >= 0.5;
      const bool gold = ex.labels[t] > 0.5;
      tp += predicted && gold;
      fp += predicted && !gold;
      fn += !predicted && gold;
    }
  }
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

struct TrainResult {
  Mlp model;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  std::vector<double> dev_history;  // dev criterion after each epoch
};

inline TrainResult train(std::span<const LabeledExample> examples, std::span<const LabeledExample> dev,
                         std::size_t hidden, const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw ValidationError("empty training set");
  if (dev.empty()) throw ValidationError("empty dev set");
  const MlpShape shape{static_cast<std::size_t>(examples[0].features.size()), hidden,
                       static_cast<std::size_t>(examples[0].labels.size())};
  for (const auto* set : {&examples, &dev}) {
    for (const auto& ex : *set) {
      if (static_cast<std::size_t>(ex.features.size()) != shape.inputs) {
        throw ValidationError("inconsistent feature dimension across examples");
      }
      if (static_cast<std::size_t>(ex.labels.size()) != shape.types) {
        throw ValidationError("inconsistent label dimension across examples");
      }
    }
  }

  Rng rng(config.seed);
  Mlp model = Mlp::initialized(shape, rng);
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(model.params().size());

  // Lower is better for both criteria (micro F1 is negated).
  auto criterion = [&](const Mlp& m) {
    return config.early_stop == TrainConfig::EarlyStop::kDevLoss ? mean_loss(m, dev)
                                                                  : -micro_f1_at_half(m, dev);
  };

  TrainResult result{model, 0, 0, {}};
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<const LabeledExample*> batch;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[order[i]]);
      const auto lg = loss_and_gradient(model, std::span<const LabeledExample* const>(batch));
      adagrad_step(model.params(), lg.gradient.params(), accum, config.learning_rate,
                   config.adagrad_epsilon);
    }
    if (!model.params().allFinite()) throw RuntimeError("MLP training diverged");
    const double value = criterion(model);
    result.dev_history.push_back(value);
    result.epochs_run = epoch;
    if (value < best) {
      best = value;
      stale = 0;
      result.model = model;
      result.best_epoch = epoch;
    } else if (++stale >= std::max<std::size_t>(1, config.patience)) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline std::string format_checkpoint(const Mlp& mlp) {
  const auto& s = mlp.shape();
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["n"] = s.inputs;
  j["h"] = s.hidden;
  j["num_types"] = s.types;
  auto row_major = [](const auto& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) v.push_back(m(i, k));
    }
    return v;
  };
  j["w_input"] = row_major(mlp.w_input());
  j["b_input"] = row_major(mlp.b_input());
  j["heads"] = row_major(mlp.heads());
  j["head_bias"] = row_major(mlp.head_bias());
  return j.dump() + "\n";
}

inline Mlp parse_checkpoint(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version");
    }
    Mlp mlp(MlpShape{j.at("n").get<std::size_t>(), j.at("h").get<std::size_t>(),
                     j.at("num_types").get<std::size_t>()});
    auto fill = [&](const char* key, auto block) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != static_cast<std::size_t>(block.size())) {
        throw ValidationError(std::string("checkpoint array ") + key + " has wrong length");
      }
      std::size_t idx = 0;
      for (Eigen::Index i = 0; i < block.rows(); ++i) {
        for (Eigen::Index k = 0; k < block.cols(); ++k) block(i, k) = v[idx++];
      }
    };
    fill("w_input", mlp.w_input());
    fill("b_input", mlp.b_input());
    fill("heads", mlp.heads());
    fill("head_bias", mlp.head_bias());
    if (!mlp.params().allFinite()) throw ValidationError("checkpoint contains non-finite values");
    return mlp;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Mlp& mlp, const std::filesystem::path& path) {
  write_file_atomic(path, format_checkpoint(mlp));
}

inline Mlp load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace corptype

#endif  // CORPTYPE_NEURAL_HPP
