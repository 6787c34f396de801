#pragma once

// Minibatch SGD training with mixup, and accuracy evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ssrp/error.hpp"
#include "ssrp/nn/loss.hpp"
#include "ssrp/nn/network.hpp"

namespace ssrp::nn {

struct TrainOptions {
  std::size_t epochs = 700;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double mixup_alpha = 0.2;  // 0 disables mixup
  std::uint64_t seed = 0;
  bool track_train_accuracy = false;
  /// Stop once training accuracy (eval mode) reaches this value.
  std::optional<double> stop_at_train_accuracy;
};

struct TrainHistory {
  std::vector<double> loss;                 // mean minibatch loss per epoch
  std::vector<double> validation_accuracy;  // per epoch; empty without validation data
  std::vector<double> train_accuracy;       // per epoch when tracked
  std::size_t epochs_run = 0;
};

template <typename T>
std::vector<int> predict(Network<T>& net, std::span<const FeatureMap<T>> x, std::size_t batch_size = 64) {
  std::vector<int> out;
  out.reserve(x.size());
  for (std::size_t lo = 0; lo < x.size(); lo += batch_size) {
    const std::size_t hi = std::min(x.size(), lo + batch_size);
    auto r = net.forward(x.subspan(lo, hi - lo), Mode::kEval);
    for (std::size_t n = 0; n < r.probs.rows(); ++n) {
      const T* p = r.probs.row(n);
      out.push_back(static_cast<int>(std::max_element(p, p + r.probs.cols()) - p));
    }
  }
  return out;
}

template <typename T>
double accuracy(Network<T>& net, std::span<const FeatureMap<T>> x, std::span<const int> y,
                std::size_t batch_size = 64) {
  require(x.size() == y.size(), ErrorKind::kShape, "inputs and labels differ in count");
  if (x.empty()) return 0.0;
  const auto pred = predict(net, x, batch_size);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

/// Splits [0, n) into consecutive batches of `batch_size`; a trailing batch
/// of one sample is merged into its predecessor, since train-mode batch
/// normalization cannot use it.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  for (std::size_t lo = 0; lo < n; lo += batch_size) r.emplace_back(lo, std::min(n, lo + batch_size));
  if (r.size() > 1 && r.back().second - r.back().first == 1) {
    r[r.size() - 2].second = n;
    r.pop_back();
  }
  return r;
}

/// Trains `net` in place. Each epoch shuffles the training set, forms
/// batches, mixes every batch with a random permutation of itself (one
/// lambda per batch), and takes one SGD step per batch. Validation accuracy
/// is recorded after every epoch. `on_epoch` (if set) sees the history so far.
template <typename T>
TrainHistory train(Network<T>& net, std::span<const FeatureMap<T>> train_x, std::span<const int> train_y,
                   std::span<const FeatureMap<T>> val_x, std::span<const int> val_y, const TrainOptions& opt,
                   const std::function<void(const TrainHistory&)>& on_epoch = {}) {
  require(train_x.size() == train_y.size(), ErrorKind::kShape, "inputs and labels differ in count");
  require(val_x.size() == val_y.size(), ErrorKind::kShape, "validation inputs and labels differ in count");
  require(opt.batch_size >= 2, ErrorKind::kInvalidArgument, "batch size must be >= 2");
  if (opt.epochs > 0) require(train_x.size() >= 2, ErrorKind::kInsufficientData, "need at least 2 training samples");

  const std::size_t n_classes = net.config().n_classes;
  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainHistory hist;

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (auto [lo, hi] : batch_ranges(order.size(), opt.batch_size)) {
      std::vector<FeatureMap<T>> xb;
      std::vector<int> yb;
      for (std::size_t i = lo; i < hi; ++i) {
        xb.push_back(train_x[order[i]]);
        yb.push_back(train_y[order[i]]);
      }
      Grid<T> targets = one_hot<T>(yb, n_classes);
      if (opt.mixup_alpha > 0.0) {
        std::vector<std::size_t> perm(xb.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<FeatureMap<T>> xp;
        Grid<T> yp(targets.rows(), targets.cols());
        for (std::size_t i = 0; i < perm.size(); ++i) {
          xp.push_back(xb[perm[i]]);
          std::copy(targets.row(perm[i]), targets.row(perm[i]) + n_classes, yp.row(i));
        }
        auto mixed = mixup_batch<T>(std::span<const FeatureMap<T>>(xb), targets,
                                    std::span<const FeatureMap<T>>(xp), yp, opt.mixup_alpha, rng);
        xb = std::move(mixed.inputs);
        targets = std::move(mixed.targets);
      }
      auto r = net.forward(std::span<const FeatureMap<T>>(xb), Mode::kTrain, &rng);
      const double loss = cross_entropy_soft(r.probs, targets);
      if (!std::isfinite(loss))
        throw DivergenceError(epoch + 1, "non-finite loss at epoch " + std::to_string(epoch + 1));
      auto grads = net.backward(r.cache, softmax_cross_entropy_grad(r.probs, targets));
      sgd_momentum_step(net, grads, opt.learning_rate, opt.momentum);
      loss_sum += loss;
      ++batches;
    }
    hist.loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    if (!val_x.empty()) hist.validation_accuracy.push_back(accuracy(net, val_x, val_y));
    hist.epochs_run = epoch + 1;
    bool stop = false;
    if (opt.track_train_accuracy || opt.stop_at_train_accuracy) {
      const double acc = accuracy(net, train_x, train_y);
      hist.train_accuracy.push_back(acc);
      stop = opt.stop_at_train_accuracy && acc >= *opt.stop_at_train_accuracy;
    }
    if (on_epoch) on_epoch(hist);
    if (stop) break;
  }
  return hist;
}

}  // namespace ssrp::nn
