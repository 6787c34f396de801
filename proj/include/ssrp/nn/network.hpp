#pragma once

// Convolutional backbone with explicit forward caches and hand-written
// backward passes.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssrp/error.hpp"
#include "ssrp/nn/config.hpp"
#include "ssrp/nn/loss.hpp"
#include "ssrp/pooling/pooling.hpp"
#include "ssrp/tensor.hpp"

namespace ssrp::nn {

enum class Mode { kTrain, kEval };

template <typename T>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> velocity;  // momentum buffer; unused for running statistics
};

/// All network state. `trainable` order per block b is conv kernel
/// [out, in, 3, 3], conv bias, bn gamma, bn beta; then dense1 weight
/// [in, units] and bias (when present), output weight and bias. `buffers`
/// holds bn running mean and variance per block.
template <typename T>
struct NetworkParams {
  std::vector<Param<T>> trainable;
  std::vector<Param<T>> buffers;

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : trainable) n += p.value.size();
    return n;
  }

  const Param<T>& find(const std::string& name) const {
    for (const auto& p : trainable)
      if (p.name == name) return p;
    for (const auto& p : buffers)
      if (p.name == name) return p;
    fail(ErrorKind::kInvalidArgument, "no parameter named '" + name + "'");
  }
};

template <typename T>
using Gradients = std::vector<std::vector<T>>;

namespace detail {

inline std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

template <typename T>
Param<T> make_param(std::string name, std::vector<std::size_t> shape, T fill) {
  const std::size_t n = numel(shape);
  return {std::move(name), std::move(shape), std::vector<T>(n, fill), std::vector<T>(n, T(0))};
}

}  // namespace detail

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases, unit gamma, zero
/// beta, running mean 0 and variance 1.
template <typename T = double>
NetworkParams<T> init_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  NetworkParams<T> p;
  auto he = [&](Param<T>& w, std::size_t fan_in) {
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (T& v : w.value) v = static_cast<T>(nd(rng));
  };
  constexpr std::size_t K = NetworkConfig::kKernel;
  std::size_t in_ch = 1;
  for (std::size_t b = 0; b < cfg.conv_filters.size(); ++b) {
    const std::size_t out = cfg.conv_filters[b];
    const std::string id = std::to_string(b + 1);
    auto kernel = detail::make_param<T>("conv" + id + ".kernel", {out, in_ch, K, K}, T(0));
    he(kernel, in_ch * K * K);
    p.trainable.push_back(std::move(kernel));
    p.trainable.push_back(detail::make_param<T>("conv" + id + ".bias", {out}, T(0)));
    p.trainable.push_back(detail::make_param<T>("bn" + id + ".gamma", {out}, T(1)));
    p.trainable.push_back(detail::make_param<T>("bn" + id + ".beta", {out}, T(0)));
    p.buffers.push_back(detail::make_param<T>("bn" + id + ".running_mean", {out}, T(0)));
    p.buffers.push_back(detail::make_param<T>("bn" + id + ".running_var", {out}, T(1)));
    in_ch = out;
  }
  std::size_t width = cfg.pooled_feature_length();
  if (cfg.dense_units > 0) {
    auto w = detail::make_param<T>("dense1.weight", {width, cfg.dense_units}, T(0));
    he(w, width);
    p.trainable.push_back(std::move(w));
    p.trainable.push_back(detail::make_param<T>("dense1.bias", {cfg.dense_units}, T(0)));
    width = cfg.dense_units;
  }
  auto w = detail::make_param<T>("output.weight", {width, cfg.n_classes}, T(0));
  he(w, width);
  p.trainable.push_back(std::move(w));
  p.trainable.push_back(detail::make_param<T>("output.bias", {cfg.n_classes}, T(0)));
  return p;
}

// ---- layer kernels ---------------------------------------------------------

/// 3x3 convolution, stride 1, zero "same" padding. `kernel` is
/// [out][in][3][3] row-major, `bias` has `out` entries.
template <typename T>
FeatureMap<T> conv2d_forward(const FeatureMap<T>& x, std::span<const T> kernel, std::span<const T> bias) {
  constexpr std::size_t K = NetworkConfig::kKernel;
  const std::size_t Cin = x.channels(), Tn = x.time(), F = x.freq();
  const std::size_t Cout = bias.size();
  require(kernel.size() == Cout * Cin * K * K, ErrorKind::kShape,
          "conv kernel does not match " + std::to_string(Cin) + " input channels");
  FeatureMap<T> y(Cout, Tn, F);
  for (std::size_t o = 0; o < Cout; ++o) {
    T* yo = y.plane(o);
    std::fill(yo, yo + Tn * F, bias[o]);
    for (std::size_t i = 0; i < Cin; ++i) {
      const T* xi = x.plane(i);
      const T* k = kernel.data() + (o * Cin + i) * K * K;
      for (std::size_t dt = 0; dt < K; ++dt) {
        // Output rows t read input row t + dt - 1.
        const std::size_t t_lo = dt == 0 ? 1 : 0;
        const std::size_t t_hi = dt == 2 ? (Tn > 0 ? Tn - 1 : 0) : Tn;
        for (std::size_t df = 0; df < K; ++df) {
          const T w = k[dt * K + df];
          if (w == T(0)) continue;
          const std::size_t f_lo = df == 0 ? 1 : 0;
          const std::size_t f_hi = df == 2 ? (F > 0 ? F - 1 : 0) : F;
          for (std::size_t t = t_lo; t < t_hi; ++t) {
            T* yr = yo + t * F;
            const T* xr = xi + (t + dt - 1) * F + df;
            for (std::size_t f = f_lo; f < f_hi; ++f) yr[f] += w * xr[f - 1];
          }
        }
      }
    }
  }
  return y;
}

/// Accumulates kernel and bias gradients; returns the input gradient when
/// `want_input_grad`.
template <typename T>
FeatureMap<T> conv2d_backward(const FeatureMap<T>& x, std::span<const T> kernel, const FeatureMap<T>& dy,
                              std::span<T> dkernel, std::span<T> dbias, bool want_input_grad) {
  constexpr std::size_t K = NetworkConfig::kKernel;
  const std::size_t Cin = x.channels(), Tn = x.time(), F = x.freq(), Cout = dy.channels();
  require(dy.time() == Tn && dy.freq() == F && kernel.size() == Cout * Cin * K * K &&
              dkernel.size() == kernel.size() && dbias.size() == Cout,
          ErrorKind::kShape, "conv backward shape mismatch");
  FeatureMap<T> dx;
  if (want_input_grad) dx = FeatureMap<T>(Cin, Tn, F);
  for (std::size_t o = 0; o < Cout; ++o) {
    const T* g = dy.plane(o);
    T bsum = T(0);
    for (std::size_t j = 0; j < Tn * F; ++j) bsum += g[j];
    dbias[o] += bsum;
    for (std::size_t i = 0; i < Cin; ++i) {
      const T* xi = x.plane(i);
      T* dxi = want_input_grad ? dx.plane(i) : nullptr;
      const T* k = kernel.data() + (o * Cin + i) * K * K;
      T* dk = dkernel.data() + (o * Cin + i) * K * K;
      for (std::size_t dt = 0; dt < K; ++dt) {
        const std::size_t t_lo = dt == 0 ? 1 : 0;
        const std::size_t t_hi = dt == 2 ? (Tn > 0 ? Tn - 1 : 0) : Tn;
        for (std::size_t df = 0; df < K; ++df) {
          const std::size_t f_lo = df == 0 ? 1 : 0;
          const std::size_t f_hi = df == 2 ? (F > 0 ? F - 1 : 0) : F;
          const T w = k[dt * K + df];
          T acc = T(0);
          for (std::size_t t = t_lo; t < t_hi; ++t) {
            const T* gr = g + t * F;
            const T* xr = xi + (t + dt - 1) * F + df;
            for (std::size_t f = f_lo; f < f_hi; ++f) acc += gr[f] * xr[f - 1];
            if (dxi) {
              T* dxr = dxi + (t + dt - 1) * F + df;
              for (std::size_t f = f_lo; f < f_hi; ++f) dxr[f - 1] += w * gr[f];
            }
          }
          dk[dt * K + df] += acc;
        }
      }
    }
  }
  return dx;
}

/// Per-channel batch normalization state for one forward call.
template <typename T>
struct BatchNormCache {
  std::vector<FeatureMap<T>> xhat;
  std::vector<T> inv_std;
};

/// Normalizes each channel over (batch, time, freq). Train mode uses batch
/// statistics (biased variance) and folds them into the running estimates
/// with `momentum`; eval mode uses the running estimates.
template <typename T>
std::vector<FeatureMap<T>> batchnorm_forward(const std::vector<FeatureMap<T>>& x, std::span<const T> gamma,
                                             std::span<const T> beta, std::span<T> running_mean,
                                             std::span<T> running_var, double epsilon, double momentum,
                                             Mode mode, BatchNormCache<T>* cache) {
  require(!x.empty(), ErrorKind::kShape, "empty batch");
  if (mode == Mode::kTrain && x.size() < 2)
    fail(ErrorKind::kDegenerate, "batch normalization needs at least 2 samples in train mode");
  const std::size_t C = x[0].channels(), plane = x[0].time() * x[0].freq();
  require(gamma.size() == C && beta.size() == C && running_mean.size() == C && running_var.size() == C,
          ErrorKind::kShape, "batchnorm parameter size mismatch");
  for (const auto& s : x) require(s.same_shape(x[0]), ErrorKind::kShape, "ragged batch");

  std::vector<FeatureMap<T>> y(x.size(), FeatureMap<T>(C, x[0].time(), x[0].freq()));
  if (cache) {
    cache->xhat.assign(x.size(), FeatureMap<T>(C, x[0].time(), x[0].freq()));
    cache->inv_std.assign(C, T(0));
  }
  const double count = static_cast<double>(x.size() * plane);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double s = 0.0;
      for (const auto& xs : x)
        for (std::size_t j = 0; j < plane; ++j) s += xs.plane(c)[j];
      mean = s / count;
      double v = 0.0;
      for (const auto& xs : x)
        for (std::size_t j = 0; j < plane; ++j) {
          const double d = xs.plane(c)[j] - mean;
          v += d * d;
        }
      var = v / count;
      running_mean[c] = static_cast<T>(momentum * running_mean[c] + (1.0 - momentum) * mean);
      running_var[c] = static_cast<T>(momentum * running_var[c] + (1.0 - momentum) * var);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + epsilon));
    const T m = static_cast<T>(mean);
    if (cache) cache->inv_std[c] = inv;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const T* xs = x[n].plane(c);
      T* ys = y[n].plane(c);
      T* xh = cache ? cache->xhat[n].plane(c) : nullptr;
      for (std::size_t j = 0; j < plane; ++j) {
        const T h = (xs[j] - m) * inv;
        if (xh) xh[j] = h;
        ys[j] = gamma[c] * h + beta[c];
      }
    }
  }
  return y;
}

/// Train-mode batchnorm backward; accumulates dgamma / dbeta.
template <typename T>
std::vector<FeatureMap<T>> batchnorm_backward(const BatchNormCache<T>& cache, std::span<const T> gamma,
                                              const std::vector<FeatureMap<T>>& dy, std::span<T> dgamma,
                                              std::span<T> dbeta) {
  require(dy.size() == cache.xhat.size() && !dy.empty(), ErrorKind::kShape, "batchnorm backward size mismatch");
  const std::size_t C = dy[0].channels(), plane = dy[0].time() * dy[0].freq();
  const T count = static_cast<T>(dy.size() * plane);
  std::vector<FeatureMap<T>> dx(dy.size(), FeatureMap<T>(C, dy[0].time(), dy[0].freq()));
  for (std::size_t c = 0; c < C; ++c) {
    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (std::size_t n = 0; n < dy.size(); ++n) {
      const T* g = dy[n].plane(c);
      const T* h = cache.xhat[n].plane(c);
      for (std::size_t j = 0; j < plane; ++j) {
        sum_dy += g[j];
        sum_dy_xhat += g[j] * h[j];
      }
    }
    dgamma[c] += sum_dy_xhat;
    dbeta[c] += sum_dy;
    const T scale = gamma[c] * cache.inv_std[c] / count;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      const T* g = dy[n].plane(c);
      const T* h = cache.xhat[n].plane(c);
      T* d = dx[n].plane(c);
      for (std::size_t j = 0; j < plane; ++j) d[j] = scale * (count * g[j] - sum_dy - h[j] * sum_dy_xhat);
    }
  }
  return dx;
}

// ---- network ---------------------------------------------------------------

template <typename T>
struct BlockCache {
  std::vector<FeatureMap<T>> input;      // conv input
  BatchNormCache<T> bn;
  std::vector<FeatureMap<T>> activated;  // after ReLU, before average pooling
  std::size_t pool_t = 1, pool_f = 1;
  bool pooled = false;
};

/// Everything `backward` needs from one forward call.
template <typename T>
struct ForwardCache {
  std::uint64_t version = 0;
  Mode mode = Mode::kEval;
  std::vector<BlockCache<T>> blocks;
  std::vector<FeatureMap<T>> pool_input;  // global pooling operand
  std::vector<pooling::PooledOutput<T>> pooled;
  Grid<T> flat;         // N x pooled_feature_length
  Grid<T> hidden_pre;   // N x dense_units, before ReLU
  Grid<T> hidden;       // after ReLU and dropout
  Grid<T> dropout_mask; // N x dense_units, 0 or 1/(1-rate)

  /// Hash of every discrete decision the forward pass made (ReLU signs,
  /// pooling selections, dropout mask). Equal signatures mean the network
  /// is locally the same smooth function.
  std::uint64_t signature() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ULL;
    };
    for (const auto& b : blocks)
      for (const auto& a : b.activated)
        for (T v : a.data()) mix(v > T(0));
    for (const auto& p : pooled)
      for (std::size_t s : p.selection) mix(s);
    for (T v : hidden_pre.data()) mix(v > T(0));
    for (T v : dropout_mask.data()) mix(v != T(0));
    return h;
  }
};

template <typename T>
struct ForwardResult {
  Grid<T> logits;
  Grid<T> probs;
  ForwardCache<T> cache;
};

template <typename T = double>
class Network {
 public:
  Network(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), params_(init_params<T>(cfg_, seed)) {}
  Network(NetworkConfig cfg, NetworkParams<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    const auto ref = init_params<T>(cfg_, 0);
    require(ref.trainable.size() == params_.trainable.size() && ref.buffers.size() == params_.buffers.size(),
            ErrorKind::kShape, "parameter set does not match configuration");
    for (std::size_t i = 0; i < ref.trainable.size(); ++i)
      require(ref.trainable[i].shape == params_.trainable[i].shape, ErrorKind::kShape,
              "shape mismatch for " + ref.trainable[i].name);
  }

  const NetworkConfig& config() const { return cfg_; }
  const NetworkParams<T>& params() const { return params_; }

  /// Mutable access invalidates outstanding forward caches.
  NetworkParams<T>& mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  /// `dropout_rng` is required in train mode when dropout is enabled.
  ForwardResult<T> forward(std::span<const FeatureMap<T>> batch, Mode mode,
                           std::mt19937_64* dropout_rng = nullptr) {
    require(!batch.empty(), ErrorKind::kShape, "empty batch");
    for (const auto& x : batch)
      require(x.channels() == 1 && x.time() == cfg_.input_time && x.freq() == cfg_.input_freq,
              ErrorKind::kShape,
              "input " + x.shape_string() + " does not match configured 1x" + std::to_string(cfg_.input_time) +
                  "x" + std::to_string(cfg_.input_freq));
    const std::size_t N = batch.size();
    ForwardResult<T> r;
    ForwardCache<T>& cache = r.cache;
    cache.version = version_;
    cache.mode = mode;

    std::vector<FeatureMap<T>> h(batch.begin(), batch.end());
    const std::size_t n_blocks = cfg_.conv_filters.size();
    cache.blocks.resize(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      auto& bc = cache.blocks[b];
      auto& kernel = params_.trainable[4 * b];
      auto& bias = params_.trainable[4 * b + 1];
      auto& gamma = params_.trainable[4 * b + 2];
      auto& beta = params_.trainable[4 * b + 3];
      auto& rmean = params_.buffers[2 * b];
      auto& rvar = params_.buffers[2 * b + 1];

      std::vector<FeatureMap<T>> z;
      z.reserve(N);
      for (const auto& x : h) z.push_back(conv2d_forward<T>(x, kernel.value, bias.value));
      auto y = batchnorm_forward<T>(z, gamma.value, beta.value, rmean.value, rvar.value, cfg_.bn_epsilon,
                                    cfg_.bn_momentum, mode, &bc.bn);
      for (auto& ys : y)
        for (T& v : ys.data()) v = v < T(0) ? T(0) : v;  // keeps NaN visible to the divergence check
      bc.input = std::move(h);
      bc.activated = std::move(y);

      h.clear();
      if (b < cfg_.pooled_blocks) {
        const auto& a0 = bc.activated[0];
        bc.pooled = true;
        bc.pool_t = a0.time() >= 2 ? 2 : 1;
        bc.pool_f = a0.freq() >= 2 ? 2 : 1;
        for (const auto& a : bc.activated) h.push_back(pooling::avg_pool(a, bc.pool_t, bc.pool_f));
      } else {
        h = bc.activated;
      }
    }

    const std::size_t D = cfg_.pooled_feature_length();
    cache.flat = Grid<T>(N, D);
    cache.pooled.reserve(N);
    for (std::size_t n = 0; n < N; ++n) {
      cache.pooled.push_back(pooling::global_pool_forward(cfg_.pooling, h[n]));
      const auto& v = cache.pooled.back().values.data();
      require(v.size() == D, ErrorKind::kShape, "pooled feature length mismatch");
      std::copy(v.begin(), v.end(), cache.flat.row(n));
    }
    cache.pool_input = std::move(h);

    std::size_t head = 4 * n_blocks;
    const Grid<T>* features = &cache.flat;
    if (cfg_.dense_units > 0) {
      const auto& w = params_.trainable[head];
      const auto& bias = params_.trainable[head + 1];
      cache.hidden_pre = affine(cache.flat, w.value, bias.value, cfg_.dense_units);
      cache.hidden = cache.hidden_pre;
      for (T& v : cache.hidden.data()) v = v < T(0) ? T(0) : v;  // keeps NaN visible to the divergence check
      if (mode == Mode::kTrain && cfg_.dropout_rate > 0.0) {
        require(dropout_rng != nullptr, ErrorKind::kContract, "train-mode dropout needs an rng");
        std::bernoulli_distribution keep(1.0 - cfg_.dropout_rate);
        const T scale = static_cast<T>(1.0 / (1.0 - cfg_.dropout_rate));
        cache.dropout_mask = Grid<T>(N, cfg_.dense_units);
        for (std::size_t i = 0; i < cache.hidden.size(); ++i) {
          const T m = keep(*dropout_rng) ? scale : T(0);
          cache.dropout_mask.data()[i] = m;
          cache.hidden.data()[i] *= m;
        }
      }
      features = &cache.hidden;
      head += 2;
    }
    r.logits = affine(*features, params_.trainable[head].value, params_.trainable[head + 1].value, cfg_.n_classes);
    r.probs = softmax(r.logits);
    return r;
  }

  /// Gradients of the loss for every trainable tensor, in `trainable` order.
  Gradients<T> backward(const ForwardCache<T>& cache, const Grid<T>& dlogits) const {
    if (cache.mode != Mode::kTrain) fail(ErrorKind::kContract, "backward needs a train-mode forward cache");
    if (cache.version != version_) fail(ErrorKind::kContract, "stale forward cache: parameters changed since forward");
    const std::size_t N = cache.flat.rows();
    require(dlogits.rows() == N && dlogits.cols() == cfg_.n_classes, ErrorKind::kShape,
            "logit gradient shape mismatch");

    Gradients<T> grads;
    for (const auto& p : params_.trainable) grads.emplace_back(p.value.size(), T(0));

    const std::size_t n_blocks = cfg_.conv_filters.size();
    std::size_t head = 4 * n_blocks;
    std::size_t out_idx = cfg_.dense_units > 0 ? head + 2 : head;
    const Grid<T>& features = cfg_.dense_units > 0 ? cache.hidden : cache.flat;

    Grid<T> dfeat = affine_backward(features, params_.trainable[out_idx].value, dlogits, grads[out_idx],
                                    grads[out_idx + 1]);
    Grid<T> dflat;
    if (cfg_.dense_units > 0) {
      if (!cache.dropout_mask.data().empty())
        for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat.data()[i] *= cache.dropout_mask.data()[i];
      for (std::size_t i = 0; i < dfeat.size(); ++i)
        if (!(cache.hidden_pre.data()[i] > T(0))) dfeat.data()[i] = T(0);
      dflat = affine_backward(cache.flat, params_.trainable[head].value, dfeat, grads[head], grads[head + 1]);
    } else {
      dflat = std::move(dfeat);
    }

    // Back through global pooling into the last block's output.
    std::vector<FeatureMap<T>> dh;
    dh.reserve(N);
    for (std::size_t n = 0; n < N; ++n) {
      const FeatureMap<T>& x = cache.pool_input[n];
      Grid<T> g(x.channels(), x.freq());
      std::copy(dflat.row(n), dflat.row(n) + g.size(), g.data().begin());
      dh.push_back(pooling::global_pool_backward(cfg_.pooling, x, cache.pooled[n], g));
    }

    for (std::size_t bi = n_blocks; bi-- > 0;) {
      const auto& bc = cache.blocks[bi];
      if (bc.pooled)
        for (std::size_t n = 0; n < N; ++n)
          dh[n] = pooling::avg_pool_backward(bc.activated[n], dh[n], bc.pool_t, bc.pool_f);
      for (std::size_t n = 0; n < N; ++n) {
        auto& d = dh[n].data();
        const auto& a = bc.activated[n].data();
        for (std::size_t j = 0; j < d.size(); ++j)
          if (!(a[j] > T(0))) d[j] = T(0);
      }
      auto dz = batchnorm_backward<T>(bc.bn, params_.trainable[4 * bi + 2].value, dh, grads[4 * bi + 2],
                                      grads[4 * bi + 3]);
      std::vector<FeatureMap<T>> dx;
      dx.reserve(N);
      for (std::size_t n = 0; n < N; ++n)
        dx.push_back(conv2d_backward<T>(bc.input[n], params_.trainable[4 * bi].value, dz[n], grads[4 * bi],
                                        grads[4 * bi + 1], bi > 0));
      dh = std::move(dx);
    }
    return grads;
  }

 private:
  static Grid<T> affine(const Grid<T>& x, const std::vector<T>& w, const std::vector<T>& b, std::size_t out) {
    const std::size_t in = x.cols();
    require(w.size() == in * out && b.size() == out, ErrorKind::kShape, "dense layer shape mismatch");
    Grid<T> y(x.rows(), out);
    for (std::size_t n = 0; n < x.rows(); ++n) {
      T* yr = y.row(n);
      std::copy(b.begin(), b.end(), yr);
      const T* xr = x.row(n);
      for (std::size_t i = 0; i < in; ++i) {
        const T xi = xr[i];
        if (xi == T(0)) continue;
        const T* wr = w.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wr[j];
      }
    }
    return y;
  }

  static Grid<T> affine_backward(const Grid<T>& x, const std::vector<T>& w, const Grid<T>& dy, std::vector<T>& dw,
                                 std::vector<T>& db) {
    const std::size_t in = x.cols(), out = dy.cols();
    Grid<T> dx(x.rows(), in);
    for (std::size_t n = 0; n < x.rows(); ++n) {
      const T* g = dy.row(n);
      const T* xr = x.row(n);
      for (std::size_t j = 0; j < out; ++j) db[j] += g[j];
      for (std::size_t i = 0; i < in; ++i) {
        const T* wr = w.data() + i * out;
        T* dwr = dw.data() + i * out;
        T acc = T(0);
        for (std::size_t j = 0; j < out; ++j) {
          dwr[j] += xr[i] * g[j];
          acc += wr[j] * g[j];
        }
        dx(n, i) = acc;
      }
    }
    return dx;
  }

  NetworkConfig cfg_;
  NetworkParams<T> params_;
  std::uint64_t version_ = 0;
};

/// Classical momentum: v <- momentum * v + g; p <- p - lr * v.
template <typename T>
void sgd_momentum_step(NetworkParams<T>& params, const Gradients<T>& grads, double lr, double momentum) {
  require(grads.size() == params.trainable.size(), ErrorKind::kShape, "gradient count mismatch");
  const T l = static_cast<T>(lr), m = static_cast<T>(momentum);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params.trainable[i];
    require(grads[i].size() == p.value.size(), ErrorKind::kShape, "gradient shape mismatch for " + p.name);
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      p.velocity[j] = m * p.velocity[j] + grads[i][j];
      p.value[j] -= l * p.velocity[j];
    }
  }
}

template <typename T>
void sgd_momentum_step(Network<T>& net, const Gradients<T>& grads, double lr, double momentum) {
  sgd_momentum_step(net.mutable_params(), grads, lr, momentum);
}

}  // namespace ssrp::nn
