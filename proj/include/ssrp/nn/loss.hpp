#pragma once

// Softmax, soft-label cross-entropy and mixup.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "ssrp/error.hpp"
#include "ssrp/tensor.hpp"

namespace ssrp::nn {

/// Row-wise numerically stable softmax.
template <typename T>
Grid<T> softmax(const Grid<T>& logits) {
  Grid<T> p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const T* z = logits.row(r);
    const T zmax = *std::max_element(z, z + logits.cols());
    T sum = T(0);
    for (std::size_t c = 0; c < logits.cols(); ++c) sum += (p(r, c) = std::exp(z[c] - zmax));
    for (std::size_t c = 0; c < logits.cols(); ++c) p(r, c) /= sum;
  }
  return p;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over rows of -sum_j target_j * log(max(pred_j, 1e-12)).
template <typename T>
double cross_entropy_soft(const Grid<T>& pred, const Grid<T>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorKind::kShape,
          "prediction and target shapes differ");
  require(pred.rows() > 0, ErrorKind::kShape, "empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    double psum = 0.0, tsum = 0.0, row = 0.0;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double p = pred(r, c), t = target(r, c);
      if (p < 0.0 || t < 0.0) fail(ErrorKind::kContract, "negative probability");
      psum += p;
      tsum += t;
      if (t != 0.0) row -= t * std::log(std::max(p, kProbabilityFloor));
    }
    if (std::abs(psum - 1.0) > 1e-6 || std::abs(tsum - 1.0) > 1e-6)
      fail(ErrorKind::kContract, "row " + std::to_string(r) + " is not a probability distribution");
    total += row;
  }
  return total / static_cast<double>(pred.rows());
}

/// d(mean CE)/d(logits) for softmax outputs: (p - y) / N.
template <typename T>
Grid<T> softmax_cross_entropy_grad(const Grid<T>& probs, const Grid<T>& target) {
  require(probs.rows() == target.rows() && probs.cols() == target.cols(), ErrorKind::kShape,
          "prediction and target shapes differ");
  Grid<T> g(probs.rows(), probs.cols());
  const T inv_n = T(1) / static_cast<T>(probs.rows());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = (probs.data()[i] - target.data()[i]) * inv_n;
  return g;
}

template <typename T>
Grid<T> one_hot(std::span<const int> labels, std::size_t n_classes) {
  Grid<T> y(labels.size(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < n_classes,
            ErrorKind::kInvalidArgument, "label out of range");
    y(i, static_cast<std::size_t>(labels[i])) = T(1);
  }
  return y;
}

/// Beta(a, b) via the ratio of two gamma draws.
template <typename Rng>
double sample_beta(double a, double b, Rng& rng) {
  require(a > 0.0 && b > 0.0, ErrorKind::kInvalidArgument, "beta parameters must be positive");
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  for (;;) {
    const double x = ga(rng), y = gb(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

template <typename T>
struct MixedBatch {
  std::vector<FeatureMap<T>> inputs;
  Grid<T> targets;
  double lambda = 1.0;
};

/// x = lambda * x_a + (1 - lambda) * x_b, same for the (soft) labels.
template <typename T>
MixedBatch<T> mixup_with_lambda(std::span<const FeatureMap<T>> xa, const Grid<T>& ya,
                                std::span<const FeatureMap<T>> xb, const Grid<T>& yb,
                                double lambda) {
  require(xa.size() == xb.size() && ya.rows() == xa.size() && yb.rows() == xb.size() &&
              ya.cols() == yb.cols(),
          ErrorKind::kShape, "mixup batches differ in size");
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::kInvalidArgument, "mixup lambda outside [0, 1]");
  MixedBatch<T> out;
  out.lambda = lambda;
  const T l = static_cast<T>(lambda), m = static_cast<T>(1.0 - lambda);
  out.inputs.reserve(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i) {
    require(xa[i].same_shape(xb[i]), ErrorKind::kShape, "mixup inputs differ in shape");
    FeatureMap<T> x = xa[i];
    for (std::size_t j = 0; j < x.size(); ++j) x.data()[j] = l * xa[i].data()[j] + m * xb[i].data()[j];
    out.inputs.push_back(std::move(x));
  }
  out.targets = Grid<T>(ya.rows(), ya.cols());
  for (std::size_t j = 0; j < ya.size(); ++j)
    out.targets.data()[j] = l * ya.data()[j] + m * yb.data()[j];
  return out;
}

/// lambda ~ Beta(alpha, alpha).
template <typename T, typename Rng>
MixedBatch<T> mixup_batch(std::span<const FeatureMap<T>> xa, const Grid<T>& ya,
                          std::span<const FeatureMap<T>> xb, const Grid<T>& yb, double alpha,
                          Rng& rng) {
  return mixup_with_lambda(xa, ya, xb, yb, sample_beta(alpha, alpha, rng));
}

}  // namespace ssrp::nn
