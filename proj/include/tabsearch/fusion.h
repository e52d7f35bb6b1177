#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tabsearch/error.h"
#include "tabsearch/random.h"

namespace tabsearch {

// Regression head over [v_a W1 + b1 ; f_bert]:
//
//   f_a   = v_a * W1 + b1          (v_a a row vector of width d)
//   score = [f_a ; f_bert] . W2 + b2
//
// A head with feature_dim == 0 is the BERT-only variant (W2 has width h).
// Scoring a hybrid head without v_a uses the trailing h entries of W2.
template <typename Scalar>
struct FusionHead {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  FusionHead() = default;
  FusionHead(int feature_dim, int hidden_dim)
      : w1(Matrix::Zero(feature_dim, feature_dim)),
        b1(Vector::Zero(feature_dim)),
        w2(Vector::Zero(feature_dim + hidden_dim)),
        feature_dim_(feature_dim),
        hidden_dim_(hidden_dim) {
    if (feature_dim < 0 || hidden_dim <= 0) {
      throw DimensionError("fusion head needs d >= 0 and h > 0");
    }
  }

  int feature_dim() const { return feature_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  bool bert_only() const { return feature_dim_ == 0; }
  Eigen::Index num_parameters() const {
    return w1.size() + b1.size() + w2.size() + 1;
  }

  bool AllFinite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           std::isfinite(b2);
  }

  Matrix w1;
  Vector b1;
  Vector w2;
  Scalar b2 = Scalar(0);

 private:
  int feature_dim_ = 0;
  int hidden_dim_ = 1;
};

template <typename Scalar, typename DerivedF>
Scalar FuseScore(const FusionHead<Scalar>& head,
                 const Eigen::MatrixBase<DerivedF>& f_bert) {
  if (f_bert.size() != head.hidden_dim()) {
    throw DimensionError("f_bert width " + std::to_string(f_bert.size()) +
                         " != head hidden size " +
                         std::to_string(head.hidden_dim()));
  }
  return head.w2.tail(head.hidden_dim()).dot(f_bert) + head.b2;
}

template <typename Scalar, typename DerivedF, typename DerivedA>
Scalar FuseScore(const FusionHead<Scalar>& head,
                 const Eigen::MatrixBase<DerivedF>& f_bert,
                 const Eigen::MatrixBase<DerivedA>& features) {
  if (head.bert_only()) {
    throw DimensionError("BERT-only head given additional features");
  }
  if (features.size() != head.feature_dim()) {
    throw DimensionError("feature width " + std::to_string(features.size()) +
                         " != head feature size " +
                         std::to_string(head.feature_dim()));
  }
  const typename FusionHead<Scalar>::Vector fused_a =
      head.w1.transpose() * features + head.b1;
  return head.w2.head(head.feature_dim()).dot(fused_a) + FuseScore(head, f_bert);
}

template <typename Scalar>
struct FusionSample {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector f_bert;
  std::optional<Vector> features;
  Scalar target = Scalar(0);
};

template <typename Scalar>
Scalar Predict(const FusionHead<Scalar>& head,
               const FusionSample<Scalar>& sample) {
  return sample.features ? FuseScore(head, sample.f_bert, *sample.features)
                         : FuseScore(head, sample.f_bert);
}

// Gradient of the squared error (prediction - target)^2.
template <typename Scalar>
struct HeadGradient {
  typename FusionHead<Scalar>::Matrix w1;
  typename FusionHead<Scalar>::Vector b1;
  typename FusionHead<Scalar>::Vector w2;
  Scalar b2 = Scalar(0);
  Scalar loss = Scalar(0);

  static HeadGradient Zero(const FusionHead<Scalar>& head) {
    HeadGradient g;
    g.w1.setZero(head.w1.rows(), head.w1.cols());
    g.b1.setZero(head.b1.size());
    g.w2.setZero(head.w2.size());
    return g;
  }

  HeadGradient& operator+=(const HeadGradient& other) {
    w1 += other.w1;
    b1 += other.b1;
    w2 += other.w2;
    b2 += other.b2;
    loss += other.loss;
    return *this;
  }

  HeadGradient& operator*=(Scalar s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    loss *= s;
    return *this;
  }
};

template <typename Scalar>
HeadGradient<Scalar> ComputeHeadGradient(const FusionHead<Scalar>& head,
                                         const FusionSample<Scalar>& sample) {
  auto grad = HeadGradient<Scalar>::Zero(head);
  const Scalar residual = Predict(head, sample) - sample.target;
  const Scalar scale = Scalar(2) * residual;
  grad.loss = residual * residual;
  grad.b2 = scale;

  const int d = head.feature_dim();
  const int h = head.hidden_dim();
  grad.w2.tail(h) = scale * sample.f_bert;
  if (sample.features && d > 0) {
    const auto& v = *sample.features;
    const typename FusionHead<Scalar>::Vector fused_a =
        head.w1.transpose() * v + head.b1;
    grad.w2.head(d) = scale * fused_a;
    const typename FusionHead<Scalar>::Vector upstream =
        scale * head.w2.head(d);
    grad.b1 = upstream;
    grad.w1 = v * upstream.transpose();
  }
  return grad;
}

struct TrainConfig {
  int epochs = 5;
  int batch_size = 16;
  double learning_rate = 1e-5;
  double warmup_fraction = 0.1;
  bool linear_decay = true;
  std::uint64_t seed = 42;
  // 0 = run all epochs.
  int max_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void Validate() const;
  std::string Describe() const;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Multiplier on the base learning rate for 0-based `step` out of `total`.
// Warm-up ramps (step + 1) / warmup_steps; decay runs linearly to 1/(T - W).
double LearningRateFactor(const TrainConfig& config, int step, int total);

// Uniform in [-r, r] with r = 1/sqrt(fan_in): fan_in d for W1/b1, d + h for
// W2/b2. Draw order is W1 (column-major), b1, W2, b2.
template <typename Scalar>
FusionHead<Scalar> InitHead(int feature_dim, int hidden_dim,
                            std::uint64_t seed) {
  FusionHead<Scalar> head(feature_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  auto draw = [&rng](double r) {
    return static_cast<Scalar>((2.0 * UniformUnit(rng) - 1.0) * r);
  };
  if (feature_dim > 0) {
    const double r1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (Eigen::Index i = 0; i < head.w1.size(); ++i) head.w1.data()[i] = draw(r1);
    for (Eigen::Index i = 0; i < head.b1.size(); ++i) head.b1[i] = draw(r1);
  }
  const double r2 =
      1.0 / std::sqrt(static_cast<double>(feature_dim + hidden_dim));
  for (Eigen::Index i = 0; i < head.w2.size(); ++i) head.w2[i] = draw(r2);
  head.b2 = draw(r2);
  return head;
}

template <typename Scalar>
struct TrainResult {
  FusionHead<Scalar> head;
  std::vector<Scalar> step_losses;  // mean batch loss before each update
  int steps = 0;
};

// Mini-batch Adam on mean squared error. Each epoch reshuffles the sample
// order with the config seed; results are bit-reproducible for a given seed.
template <typename Scalar>
TrainResult<Scalar> TrainHead(const std::vector<FusionSample<Scalar>>& samples,
                              int feature_dim, int hidden_dim,
                              const TrainConfig& config) {
  config.Validate();
  if (samples.empty()) throw ValidationError("train_head: no samples");
  for (const auto& s : samples) {
    if (s.f_bert.size() != hidden_dim ||
        (s.features && s.features->size() != feature_dim)) {
      throw DimensionError("train_head: sample dimensions do not match head");
    }
  }

  TrainResult<Scalar> result;
  result.head = InitHead<Scalar>(feature_dim, hidden_dim, config.seed);
  auto& head = result.head;

  const int n = static_cast<int>(samples.size());
  const int batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  int total = config.epochs * batches_per_epoch;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);

  auto m = HeadGradient<Scalar>::Zero(head);
  auto v = HeadGradient<Scalar>::Zero(head);
  std::vector<int> order(n);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  int step = 0;
  for (int epoch = 0; epoch < config.epochs && step < total; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Shuffle(std::span<int>(order), rng);
    for (int start = 0; start < n && step < total;
         start += config.batch_size, ++step) {
      const int stop = std::min(n, start + config.batch_size);
      auto grad = HeadGradient<Scalar>::Zero(head);
      for (int i = start; i < stop; ++i) {
        grad += ComputeHeadGradient(head, samples[order[i]]);
      }
      grad *= Scalar(1) / Scalar(stop - start);
      if (!std::isfinite(grad.loss) || !std::isfinite(grad.b2)) {
        throw TrainingDiverged("train_head diverged at step " +
                               std::to_string(step) + " (" +
                               config.Describe() + ")");
      }
      result.step_losses.push_back(grad.loss);

      const Scalar b1c = Scalar(config.beta1);
      const Scalar b2c = Scalar(config.beta2);
      const Scalar lr = Scalar(config.learning_rate *
                               LearningRateFactor(config, step, total));
      const Scalar bias1 = Scalar(1) - std::pow(b1c, Scalar(step + 1));
      const Scalar bias2 = Scalar(1) - std::pow(b2c, Scalar(step + 1));
      const Scalar eps = Scalar(config.epsilon);

      auto adam = [&](auto& param, auto& m1, auto& m2, const auto& g) {
        m1 = b1c * m1 + (Scalar(1) - b1c) * g;
        m2 = b2c * m2 + (Scalar(1) - b2c) * g.cwiseAbs2();
        param.array() -= lr * (m1.array() / bias1) /
                         ((m2.array() / bias2).sqrt() + eps);
      };
      adam(head.w1, m.w1, v.w1, grad.w1);
      adam(head.b1, m.b1, v.b1, grad.b1);
      adam(head.w2, m.w2, v.w2, grad.w2);
      m.b2 = b1c * m.b2 + (Scalar(1) - b1c) * grad.b2;
      v.b2 = b2c * v.b2 + (Scalar(1) - b2c) * grad.b2 * grad.b2;
      head.b2 -= lr * (m.b2 / bias1) / (std::sqrt(v.b2 / bias2) + eps);

      if (!head.AllFinite()) {
        throw TrainingDiverged("train_head produced non-finite parameters at "
                               "step " + std::to_string(step) + " (" +
                               config.Describe() + ")");
      }
    }
  }
  result.steps = step;
  return result;
}

template <typename Scalar>
Scalar MeanSquaredError(const FusionHead<Scalar>& head,
                        const std::vector<FusionSample<Scalar>>& samples) {
  Scalar total = Scalar(0);
  for (const auto& s : samples) {
    const Scalar r = Predict(head, s) - s.target;
    total += r * r;
  }
  return samples.empty() ? Scalar(0) : total / Scalar(samples.size());
}

// Text checkpoint:
//   tabsearch-fusion-head 1
//   feature_dim <d>
//   hidden_dim <h>
//   w1 <d*d values, row-major>
//   b1 <d values>
//   w2 <d+h values>
//   b2 <value>
// Values use shortest round-trip formatting, so save/load is exact.
void SaveHead(const FusionHead<double>& head, const std::filesystem::path& path);
FusionHead<double> LoadHead(const std::filesystem::path& path);
std::string SerializeHead(const FusionHead<double>& head);
FusionHead<double> DeserializeHead(const std::string& text);

}  // namespace tabsearch
