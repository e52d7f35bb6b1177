#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fusion_reference.h"
#include "tabsearch/fusion.h"
#include "test_support.h"

namespace tabsearch {
namespace {

using Eigen::VectorXd;

VectorXd Vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

TEST_CASE("constant head") {
  FusionHead<double> head(3, 4);
  head.b2 = 0.5;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto s = testing::RandomSample(rng, 3, 4, i % 2 == 0);
    CHECK(Predict(head, s) == 0.5);
  }
}

TEST_CASE("hand-worked hybrid score") {
  FusionHead<double> head(1, 2);
  head.w1(0, 0) = 2;
  head.b1(0) = 1;
  head.w2 = Vec({1, 1, 1});
  head.b2 = 0;
  // f_a = 3*2 + 1 = 7; f = [7, 1, -1]; score = 7.
  CHECK(FuseScore(head, Vec({1, -1}), Vec({3})) == 7.0);
  CHECK(FuseScore(head, Vec({1, -1})) == 0.0);
}

TEST_CASE("bert-only head ignores features and checks widths") {
  FusionHead<double> head(0, 3);
  head.w2 = Vec({1, 2, 3});
  head.b2 = 1;
  CHECK(head.bert_only());
  CHECK(FuseScore(head, Vec({1, 1, 1})) == 7.0);
  CHECK_THROWS_AS(FuseScore(head, Vec({1, 1, 1}), Vec({1})), DimensionError);
  CHECK_THROWS_AS(FuseScore(head, Vec({1, 1})), DimensionError);
  FusionHead<double> hybrid(2, 3);
  CHECK_THROWS_AS(FuseScore(hybrid, Vec({1, 1, 1}), Vec({1})), DimensionError);
  CHECK_THROWS_AS(FusionHead<double>(1, 0), DimensionError);
  CHECK(hybrid.num_parameters() == 4 + 2 + 5 + 1);
}

TEST_CASE("without features the score depends only on f_bert") {
  std::mt19937_64 rng(2);
  auto head = testing::RandomHead(rng, 3, 2);
  const VectorXd f = Vec({0.3, -0.7});
  const double s = FuseScore(head, f);
  head.w1.setRandom();
  head.b1.setRandom();
  head.w2.head(3).setRandom();
  CHECK(FuseScore(head, f) == s);
}

TEST_CASE("float instantiation agrees with double") {
  std::mt19937_64 rng(3);
  const auto head = testing::RandomHead(rng, 2, 3);
  FusionHead<float> fhead(2, 3);
  fhead.w1 = head.w1.cast<float>();
  fhead.b1 = head.b1.cast<float>();
  fhead.w2 = head.w2.cast<float>();
  fhead.b2 = static_cast<float>(head.b2);
  const auto s = testing::RandomSample(rng, 2, 3, true);
  const float got = FuseScore(fhead, s.f_bert.cast<float>().eval(),
                              s.features->cast<float>().eval());
  CHECK(got == doctest::Approx(Predict(head, s)).epsilon(1e-5));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = static_cast<int>(UniformBelow(rng, 5));
    const int h = 1 + static_cast<int>(UniformBelow(rng, 6));
    const auto head = testing::RandomHead(rng, d, h);
    const auto sample = testing::RandomSample(rng, d, h, d > 0 && trial % 4 != 0);
    CHECK(testing::GradientCheck(head, sample) <= 1e-4);
  }
}

TEST_CASE("gradient closed forms") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto head = testing::RandomHead(rng, 2, 3);
    auto sample = testing::RandomSample(rng, 2, 3, true);
    const double pred = Predict(head, sample);
    const auto grad = ComputeHeadGradient(head, sample);
    CHECK(grad.b2 == doctest::Approx(2 * (pred - sample.target)));
    CHECK(grad.loss == doctest::Approx((pred - sample.target) * (pred - sample.target)));

    sample.target = pred;
    const auto zero = ComputeHeadGradient(head, sample);
    CHECK(zero.w1.isZero(0));
    CHECK(zero.b1.isZero(0));
    CHECK(zero.w2.isZero(0));
    CHECK(zero.b2 == 0.0);
  }
}

TEST_CASE("linearity in f_bert and b2 shift") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto head = testing::RandomHead(rng, 3, 4);
    const auto a = testing::RandomSample(rng, 3, 4, true);
    const auto b = testing::RandomSample(rng, 3, 4, true);
    const VectorXd mid = (a.f_bert + b.f_bert) / 2;
    const double sa = FuseScore(head, a.f_bert, *a.features);
    const double sb = FuseScore(head, b.f_bert, *a.features);
    CHECK(FuseScore(head, mid, *a.features) ==
          doctest::Approx((sa + sb) / 2).epsilon(1e-12).scale(1.0));

    auto shifted = head;
    const double c = 10 * testing::Gauss(rng);
    shifted.b2 += c;
    std::vector<FusionSample<double>> batch;
    for (int i = 0; i < 12; ++i) batch.push_back(testing::RandomSample(rng, 3, 4, i % 3 != 0));
    std::vector<double> s0, s1;
    for (const auto& s : batch) {
      s0.push_back(Predict(head, s));
      s1.push_back(Predict(shifted, s));
      CHECK(s1.back() == doctest::Approx(s0.back() + c).epsilon(1e-12).scale(1.0));
    }
    auto rank = [](const std::vector<double>& v) {
      std::vector<int> idx(v.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return v[x] > v[y]; });
      return idx;
    };
    CHECK(rank(s0) == rank(s1));
  }
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.warmup_fraction = 0.1;
  // 100 steps: warm-up 10 steps reaching 1 at step 9, then linear decay.
  CHECK(LearningRateFactor(c, 0, 100) == doctest::Approx(0.1));
  CHECK(LearningRateFactor(c, 9, 100) == doctest::Approx(1.0));
  CHECK(LearningRateFactor(c, 10, 100) == doctest::Approx(1.0));
  CHECK(LearningRateFactor(c, 55, 100) == doctest::Approx(0.5));
  CHECK(LearningRateFactor(c, 99, 100) == doctest::Approx(1.0 / 90));
  c.linear_decay = false;
  CHECK(LearningRateFactor(c, 99, 100) == 1.0);
  c.warmup_fraction = 0.0;
  CHECK(LearningRateFactor(c, 0, 100) == 1.0);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.Validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.warmup_fraction = 1.0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
}

TEST_CASE("training recovers a planted head within 500 steps") {
  std::mt19937_64 rng(7);
  const auto planted = testing::RandomHead(rng, 2, 3);
  const auto samples = testing::PlantedSamples(rng, planted, 64);
  const auto result = TrainHead(samples, 2, 3, testing::PlantedTrainConfig());
  CHECK(result.steps <= 500);
  CHECK(MeanSquaredError(result.head, samples) <= 1e-3);
}

TEST_CASE("single sample loss decreases monotonically") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<FusionSample<double>> one = {testing::RandomSample(rng, 2, 3, true)};
    TrainConfig c;
    c.epochs = 11;
    c.batch_size = 1;
    c.learning_rate = 1e-3;
    c.warmup_fraction = 0;
    c.linear_decay = false;
    c.seed = trial;
    const auto result = TrainHead(one, 2, 3, c);
    REQUIRE(result.step_losses.size() == 11);
    for (int i = 1; i < 11; ++i) {
      CHECK(result.step_losses[i] < result.step_losses[i - 1]);
    }
  }
}

TEST_CASE("constant targets drive predictions to the constant") {
  std::mt19937_64 rng(9);
  std::vector<FusionSample<double>> samples;
  for (int i = 0; i < 32; ++i) {
    auto s = testing::RandomSample(rng, 0, 3, false);
    s.target = 2.0;
    samples.push_back(s);
  }
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 8;
  c.learning_rate = 0.02;
  c.warmup_fraction = 0;
  const auto result = TrainHead(samples, 0, 3, c);
  CHECK(MeanSquaredError(result.head, samples) <= 1e-3);
  CHECK(result.head.b2 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("training is bit-reproducible and fails loudly") {
  std::mt19937_64 rng(10);
  std::vector<FusionSample<double>> samples;
  for (int i = 0; i < 40; ++i) samples.push_back(testing::RandomSample(rng, 2, 3, i % 4 != 0));
  TrainConfig c;
  c.epochs = 3;
  c.learning_rate = 1e-3;
  const auto a = TrainHead(samples, 2, 3, c);
  const auto b = TrainHead(samples, 2, 3, c);
  CHECK(SerializeHead(a.head) == SerializeHead(b.head));
  CHECK(a.step_losses == b.step_losses);
  c.seed = 43;
  CHECK(SerializeHead(TrainHead(samples, 2, 3, c).head) != SerializeHead(a.head));

  CHECK_THROWS_AS(TrainHead(std::vector<FusionSample<double>>{}, 2, 3, c),
                  ValidationError);
  CHECK_THROWS_AS(TrainHead(samples, 2, 4, c), DimensionError);
  auto bad = samples;
  bad[0].target = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TrainHead(bad, 2, 3, c), TrainingDiverged);
}

TEST_CASE("checkpoint round trip is exact") {
  testing::TempDir dir;
  std::mt19937_64 rng(11);
  for (int d : {0, 1, 4}) {
    auto head = testing::RandomHead(rng, d, 3);
    head.b2 = 0.1 + 0.2;  // not representable in short decimal form
    const auto path = dir / ("h" + std::to_string(d));
    SaveHead(head, path);
    const auto loaded = LoadHead(path);
    CHECK(loaded.feature_dim() == d);
    CHECK(loaded.hidden_dim() == 3);
    CHECK(loaded.w1 == head.w1);
    CHECK(loaded.b1 == head.b1);
    CHECK(loaded.w2 == head.w2);
    CHECK(loaded.b2 == head.b2);
  }
  CHECK_THROWS_AS(DeserializeHead("not a head\n"), ParseError);
  CHECK_THROWS_AS(
      DeserializeHead("tabsearch-fusion-head 1\nfeature_dim 1\nhidden_dim 1\n"
                      "w1 1\nb1 1\nw2 1\nb2 0\n"),
      ParseError);
  CHECK_THROWS_AS(LoadHead(dir / "absent"), IoError);
}

}  // namespace
}  // namespace tabsearch
