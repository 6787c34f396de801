#pragma once

// Central finite-difference check of Network::backward on randomly sampled
// parameter coordinates. Coordinates whose +-h perturbation changes any
// discrete forward decision (ReLU sign, pooling selection) are resampled,
// since the loss is not differentiable across such a kink.

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ssrp/nn/loss.hpp"
#include "ssrp/nn/network.hpp"

namespace gradcheck {

struct Report {
  std::size_t checked = 0;
  std::size_t resampled = 0;
  double worst = 0.0;
  std::string worst_name;
};

inline ssrp::nn::NetworkConfig tiny_config(const ssrp::pooling::PoolingSpec& pooling, std::size_t pooled_blocks = 2) {
  ssrp::nn::NetworkConfig cfg;
  cfg.input_time = 8;
  cfg.input_freq = 6;
  cfg.conv_filters = {2, 3, 4};
  cfg.pooled_blocks = pooled_blocks;
  cfg.dense_units = 5;
  cfg.n_classes = 2;
  cfg.pooling = pooling;
  return cfg;
}

inline Report check_network(const ssrp::nn::NetworkConfig& cfg, std::size_t coordinates, std::uint64_t seed,
                            double h = 1e-4) {
  using namespace ssrp;
  std::mt19937_64 rng(seed);
  nn::Network<double> net(cfg, seed);
  std::vector<FeatureMap<double>> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(oracle::random_map(1, cfg.input_time, cfg.input_freq, rng));
  Grid<double> target(3, cfg.n_classes);
  for (std::size_t r = 0; r < 3; ++r) {
    // Soft targets exercise the general loss gradient.
    double s = 0.0;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) s += target(r, c) = 0.1 + std::uniform_real_distribution<double>()(rng);
    for (std::size_t c = 0; c < cfg.n_classes; ++c) target(r, c) /= s;
  }
  const std::uint64_t dropout_seed = seed ^ 0xabcdefULL;
  auto run = [&](std::uint64_t* sig) {
    std::mt19937_64 drop(dropout_seed);
    auto r = net.forward(batch, nn::Mode::kTrain, &drop);
    if (sig) *sig = r.cache.signature();
    return r;
  };

  std::uint64_t base_sig = 0;
  auto base = run(&base_sig);
  const auto grads = net.backward(base.cache, nn::softmax_cross_entropy_grad(base.probs, target));

  Report rep;
  const std::size_t n_tensors = net.params().trainable.size();
  std::uniform_int_distribution<std::size_t> pick_tensor(0, n_tensors - 1);
  std::size_t attempts = 0;
  while (rep.checked < coordinates && attempts < coordinates * 50) {
    ++attempts;
    const std::size_t ti = pick_tensor(rng);
    const std::size_t n = net.params().trainable[ti].value.size();
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    double& coord = net.mutable_params().trainable[ti].value[j];
    const double saved = coord;
    std::uint64_t up_sig = 0, down_sig = 0;
    coord = saved + h;
    const double up = nn::cross_entropy_soft(run(&up_sig).probs, target);
    coord = saved - h;
    const double down = nn::cross_entropy_soft(run(&down_sig).probs, target);
    coord = saved;
    if (up_sig != base_sig || down_sig != base_sig) {
      ++rep.resampled;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err = oracle::relative_error(grads[ti][j], numeric);
    if (err > rep.worst) {
      rep.worst = err;
      rep.worst_name = net.params().trainable[ti].name + "[" + std::to_string(j) + "]";
    }
    ++rep.checked;
  }
  return rep;
}

}  // namespace gradcheck
