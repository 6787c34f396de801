#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrp/error.hpp"
#include "ssrp/pooling/pooling.hpp"

namespace ssrp::nn {

/// Backbone description: `conv_filters.size()` blocks of
/// conv3x3 (same padding) -> batchnorm -> ReLU, average pooling after the
/// first `pooled_blocks` blocks, a global temporal pooling operator, an
/// optional hidden dense layer with dropout, and a softmax classifier.
///
/// Average pooling halves each axis whose extent is at least 2 and leaves
/// singleton axes alone, so k x 1 inputs pool along time only.
struct NetworkConfig {
  std::size_t input_time = 431;
  std::size_t input_freq = 40;
  std::vector<std::size_t> conv_filters{32, 64, 128};
  std::size_t pooled_blocks = 2;
  pooling::PoolingSpec pooling = pooling::PoolingSpec::gap();
  std::size_t dense_units = 128;  // 0 disables the hidden dense layer
  double dropout_rate = 0.5;
  std::size_t n_classes = 50;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  static constexpr std::size_t kKernel = 3;

  struct Extent {
    std::size_t time = 0, freq = 0;
  };

  /// Spatial extent entering each block, plus the extent reaching the
  /// global pooling layer as the last element.
  std::vector<Extent> trace_extents() const {
    std::vector<Extent> out;
    Extent e{input_time, input_freq};
    for (std::size_t b = 0; b < conv_filters.size(); ++b) {
      out.push_back(e);
      if (b < pooled_blocks) e = {e.time >= 2 ? e.time / 2 : 1, e.freq >= 2 ? e.freq / 2 : 1};
    }
    out.push_back(e);
    return out;
  }

  std::size_t last_channels() const { return conv_filters.empty() ? 1 : conv_filters.back(); }

  /// Length of the flattened pooled vector fed to the dense head.
  std::size_t pooled_feature_length() const { return last_channels() * trace_extents().back().freq; }

  void validate() const {
    require(input_time >= 1 && input_freq >= 1, ErrorKind::kInvalidArgument, "input extent must be >= 1");
    require(!conv_filters.empty(), ErrorKind::kInvalidArgument, "at least one conv block is required");
    for (std::size_t c : conv_filters) require(c >= 1, ErrorKind::kInvalidArgument, "filter count must be >= 1");
    require(pooled_blocks <= conv_filters.size(), ErrorKind::kInvalidArgument,
            "pooled_blocks exceeds the number of conv blocks");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::kInvalidArgument,
            "dropout rate must lie in [0, 1)");
    require(n_classes >= 1, ErrorKind::kInvalidArgument, "n_classes must be >= 1");
    require(bn_epsilon > 0.0 && bn_momentum >= 0.0 && bn_momentum < 1.0, ErrorKind::kInvalidArgument,
            "invalid batchnorm constants");
    pooling.validate();
    const auto ext = trace_extents().back();
    require(ext.time >= pooling.min_time(), ErrorKind::kInvalidArgument,
            pooling.to_string() + " needs " + std::to_string(pooling.min_time()) +
                " frames but the backbone leaves " + std::to_string(ext.time));
  }
};

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"input_time", c.input_time},     {"input_freq", c.input_freq},
       {"conv_filters", c.conv_filters}, {"pooled_blocks", c.pooled_blocks},
       {"pooling", c.pooling.name()},    {"window", c.pooling.window},
       {"top_k", c.pooling.top_k},       {"dense_units", c.dense_units},
       {"dropout_rate", c.dropout_rate}, {"n_classes", c.n_classes},
       {"bn_epsilon", c.bn_epsilon},     {"bn_momentum", c.bn_momentum}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.input_time = j.value("input_time", c.input_time);
  c.input_freq = j.value("input_freq", c.input_freq);
  c.conv_filters = j.value("conv_filters", c.conv_filters);
  c.pooled_blocks = j.value("pooled_blocks", c.pooled_blocks);
  if (j.contains("pooling")) c.pooling.kind = pooling::parse_pooling_kind(j.at("pooling").get<std::string>());
  c.pooling.window = j.value("window", c.pooling.window);
  c.pooling.top_k = j.value("top_k", c.pooling.top_k);
  c.dense_units = j.value("dense_units", c.dense_units);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.bn_epsilon = j.value("bn_epsilon", c.bn_epsilon);
  c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
}

struct ParamCount {
  std::vector<std::pair<std::string, std::size_t>> layers;
  std::size_t total = 0;
};

/// Trainable parameter count per layer (running statistics excluded).
inline ParamCount count_params(const NetworkConfig& cfg) {
  ParamCount pc;
  auto add = [&](std::string name, std::size_t n) {
    pc.layers.emplace_back(std::move(name), n);
    pc.total += n;
  };
  std::size_t in_ch = 1;
  for (std::size_t b = 0; b < cfg.conv_filters.size(); ++b) {
    const std::size_t out = cfg.conv_filters[b];
    add("conv" + std::to_string(b + 1), out * in_ch * NetworkConfig::kKernel * NetworkConfig::kKernel + out);
    add("bn" + std::to_string(b + 1), 2 * out);
    in_ch = out;
  }
  std::size_t width = cfg.pooled_feature_length();
  if (cfg.dense_units > 0) {
    add("dense1", width * cfg.dense_units + cfg.dense_units);
    width = cfg.dense_units;
  }
  if (cfg.n_classes > 0) add("output", width * cfg.n_classes + cfg.n_classes);
  return pc;
}

}  // namespace ssrp::nn
