#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "desk_data.hpp"
#include "ssrp/nn/train.hpp"

using namespace ssrp;
using namespace ssrp::nn;

namespace {

TrainOptions quick(std::size_t epochs) {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = 16;
  o.seed = 5;
  return o;
}

}  // namespace

TEST(BatchRanges, CoversEverySampleOnce) {
  for (std::size_t n : {0u, 1u, 2u, 5u, 63u, 64u, 65u, 130u}) {
    for (std::size_t b : {2u, 7u, 64u}) {
      auto r = batch_ranges(n, b);
      std::size_t next = 0;
      for (auto [lo, hi] : r) {
        EXPECT_EQ(lo, next);
        EXPECT_GT(hi, lo);
        next = hi;
      }
      EXPECT_EQ(next, n);
    }
  }
}

TEST(BatchRanges, TrailingSingletonIsMerged) {
  auto r = batch_ranges(65, 64);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], (std::pair<std::size_t, std::size_t>{0, 65}));
  r = batch_ranges(66, 64);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].second - r[1].first, 2u);
  // A lone sample with nothing to merge into stays as it is.
  EXPECT_EQ(batch_ranges(1, 64).size(), 1u);
}

TEST(Train, SameSeedSameModel) {
  auto in = desk::all_inputs(87);
  auto cfg = desk::network(pooling::PoolingSpec::ssrp_t(2));
  Network<double> a(cfg, 3), b(cfg, 3);
  auto ha = train<double>(a, in.x, in.y, in.x, in.y, quick(3));
  auto hb = train<double>(b, in.x, in.y, in.x, in.y, quick(3));
  EXPECT_EQ(ha.loss, hb.loss);
  EXPECT_EQ(ha.validation_accuracy, hb.validation_accuracy);
  for (std::size_t i = 0; i < a.params().trainable.size(); ++i)
    EXPECT_EQ(a.params().trainable[i].value, b.params().trainable[i].value);
}

TEST(Train, HistoryLengthsFollowOptions) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::gap()), 1);
  auto opt = quick(4);
  opt.track_train_accuracy = true;
  std::size_t calls = 0;
  auto h = train<double>(net, in.x, in.y, {}, {}, opt, [&](const TrainHistory& s) { EXPECT_EQ(s.epochs_run, ++calls); });
  EXPECT_EQ(calls, 4u);
  EXPECT_EQ(h.loss.size(), 4u);
  EXPECT_TRUE(h.validation_accuracy.empty());
  EXPECT_EQ(h.train_accuracy.size(), 4u);
}

TEST(Train, ZeroEpochsLeavesNetworkUntouched) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::gap()), 1);
  auto before = net.params().trainable;
  auto h = train<double>(net, in.x, in.y, in.x, in.y, quick(0));
  EXPECT_EQ(h.epochs_run, 0u);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(net.params().trainable[i].value, before[i].value);
}

TEST(Train, LossDecreasesOnSeparableData) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::ssrp_b(2)), 2);
  auto opt = quick(30);
  opt.mixup_alpha = 0.0;
  auto h = train<double>(net, in.x, in.y, {}, {}, opt);
  EXPECT_LT(h.loss.back(), 0.5 * h.loss.front());
  for (double l : h.loss) EXPECT_TRUE(std::isfinite(l));
}

TEST(Train, StopsAtTargetTrainingAccuracy) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::gap()), 3);
  auto opt = quick(300);
  opt.stop_at_train_accuracy = 1.0;
  auto h = train<double>(net, in.x, in.y, {}, {}, opt);
  ASSERT_FALSE(h.train_accuracy.empty());
  EXPECT_EQ(h.train_accuracy.back(), 1.0);
  EXPECT_LT(h.epochs_run, 300u);
  EXPECT_EQ(accuracy<double>(net, in.x, in.y), 1.0);
}

TEST(Train, HugeLearningRateDiverges) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::gap()), 4);
  auto opt = quick(50);
  opt.learning_rate = 1e305;  // weights overflow to inf after one step
  try {
    train<double>(net, in.x, in.y, {}, {}, opt);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1u);
    EXPECT_LE(e.epoch(), 50u);
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
}

TEST(Train, NanInputDivergesInFirstEpoch) {
  auto in = desk::all_inputs(87);
  in.x[0].data()[0] = std::numeric_limits<double>::quiet_NaN();
  Network<double> net(desk::network(pooling::PoolingSpec::gap()), 4);
  try {
    train<double>(net, in.x, in.y, {}, {}, quick(3));
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1u);
  }
}

TEST(Train, RejectsBadArguments) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::gap()), 4);
  auto opt = quick(1);
  opt.batch_size = 1;
  EXPECT_THROW(train<double>(net, in.x, in.y, {}, {}, opt), Error);
  std::vector<int> short_y(in.y.begin(), in.y.begin() + 3);
  EXPECT_THROW(train<double>(net, in.x, short_y, {}, {}, quick(1)), Error);
  std::span<const FeatureMap<double>> one(in.x.data(), 1);
  std::span<const int> one_y(in.y.data(), 1);
  try {
    train<double>(net, one, one_y, {}, {}, quick(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
}

TEST(Predict, BatchingDoesNotChangePredictions) {
  auto in = desk::all_inputs(87);
  Network<double> net(desk::network(pooling::PoolingSpec::ssrp_t(2)), 6);
  EXPECT_EQ(predict<double>(net, in.x, 64), predict<double>(net, in.x, 5));
}
