#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ssrp/error.hpp"

namespace ssrp {

/// Channel-major activation tensor: `channels` planes of `time` x `freq`.
template <typename T>
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t time, std::size_t freq, T fill = T(0))
      : c_(channels), t_(time), f_(freq), data_(channels * time * freq, fill) {}

  std::size_t channels() const { return c_; }
  std::size_t time() const { return t_; }
  std::size_t freq() const { return f_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t c, std::size_t t, std::size_t f) { return data_[(c * t_ + t) * f_ + f]; }
  T operator()(std::size_t c, std::size_t t, std::size_t f) const {
    return data_[(c * t_ + t) * f_ + f];
  }

  T* plane(std::size_t c) { return data_.data() + c * t_ * f_; }
  const T* plane(std::size_t c) const { return data_.data() + c * t_ * f_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const FeatureMap& o) const { return c_ == o.c_ && t_ == o.t_ && f_ == o.f_; }

  std::string shape_string() const {
    return std::to_string(c_) + "x" + std::to_string(t_) + "x" + std::to_string(f_);
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t c_ = 0, t_ = 0, f_ = 0;
  std::vector<T> data_;
};

/// Row-major `rows` x `cols` matrix used for pooled outputs (channel x freq)
/// and for per-batch vectors (sample x feature).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  T* row(std::size_t r) { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

}  // namespace ssrp
