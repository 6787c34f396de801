#pragma once

// Global temporal pooling over C x T x F feature maps:
//   SSRP-B  per (c, f), the largest mean over all length-W windows (stride 1)
//   SSRP-T  per (c, f), the mean of the K largest single-frame activations
//   GAP     per (c, f), the temporal mean
// plus non-overlapping average pooling used inside the backbone.
//
// Ties always resolve to the smallest time index, so forward selections and
// therefore gradients are deterministic. Selected windows/frames are summed
// in increasing time order, which makes SSRP-B(W=T), SSRP-T(K=T) and GAP
// produce bit-identical values.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "ssrp/error.hpp"
#include "ssrp/tensor.hpp"

namespace ssrp::pooling {

enum class PoolingKind { kGap, kSsrpB, kSsrpT, kMax, kAvg };

struct PoolingSpec {
  PoolingKind kind = PoolingKind::kGap;
  std::size_t window = 0;  // SSRP-B only
  std::size_t top_k = 0;   // SSRP-T only

  static PoolingSpec gap() { return {PoolingKind::kGap, 0, 0}; }
  static PoolingSpec ssrp_b(std::size_t w) { return {PoolingKind::kSsrpB, w, 0}; }
  static PoolingSpec ssrp_t(std::size_t k) { return {PoolingKind::kSsrpT, 0, k}; }
  static PoolingSpec max() { return {PoolingKind::kMax, 0, 0}; }
  static PoolingSpec avg() { return {PoolingKind::kAvg, 0, 0}; }

  void validate() const {
    if (kind == PoolingKind::kSsrpB && window < 1)
      fail(ErrorKind::kInvalidArgument, "SSRP-B window must be >= 1");
    if (kind == PoolingKind::kSsrpT && top_k < 1)
      fail(ErrorKind::kInvalidArgument, "SSRP-T top-K must be >= 1");
  }

  /// Smallest time extent the operator accepts.
  std::size_t min_time() const {
    switch (kind) {
      case PoolingKind::kSsrpB: return window;
      case PoolingKind::kSsrpT: return top_k;
      default: return 1;
    }
  }

  std::string name() const {
    switch (kind) {
      case PoolingKind::kGap: return "gap";
      case PoolingKind::kSsrpB: return "ssrp_b";
      case PoolingKind::kSsrpT: return "ssrp_t";
      case PoolingKind::kMax: return "max";
      case PoolingKind::kAvg: return "avg";
    }
    return "?";
  }

  std::string to_string() const {
    if (kind == PoolingKind::kSsrpB) return "ssrp_b(W=" + std::to_string(window) + ")";
    if (kind == PoolingKind::kSsrpT) return "ssrp_t(K=" + std::to_string(top_k) + ")";
    return name();
  }

  bool operator==(const PoolingSpec&) const = default;
};

inline PoolingKind parse_pooling_kind(const std::string& s) {
  if (s == "gap") return PoolingKind::kGap;
  if (s == "ssrp_b" || s == "ssrp-b") return PoolingKind::kSsrpB;
  if (s == "ssrp_t" || s == "ssrp-t") return PoolingKind::kSsrpT;
  if (s == "max") return PoolingKind::kMax;
  if (s == "avg") return PoolingKind::kAvg;
  fail(ErrorKind::kInvalidArgument, "unknown pooling kind '" + s + "'");
}

/// Pooled C x F values plus what the backward pass needs: per (c, f) cell the
/// selected window start (SSRP-B, one entry) or the selected frame indices
/// in increasing order (SSRP-T, K entries). GAP stores no selection.
template <typename T>
struct PooledOutput {
  Grid<T> values;
  std::vector<std::size_t> selection;
  std::size_t per_cell = 0;

  const std::size_t* cell(std::size_t c, std::size_t f) const {
    return selection.data() + (c * values.cols() + f) * per_cell;
  }
};

namespace detail {

template <typename T>
void check_grad_shape(const FeatureMap<T>& x, const Grid<T>& grad_out) {
  require(grad_out.rows() == x.channels() && grad_out.cols() == x.freq(), ErrorKind::kShape,
          "pooled gradient must be " + std::to_string(x.channels()) + "x" +
              std::to_string(x.freq()));
}

template <typename T>
void check_output_shape(const FeatureMap<T>& x, const PooledOutput<T>& out, std::size_t per_cell) {
  require(out.values.rows() == x.channels() && out.values.cols() == x.freq() &&
              out.per_cell == per_cell &&
              out.selection.size() == x.channels() * x.freq() * per_cell,
          ErrorKind::kShape, "pooled output does not belong to this input");
}

}  // namespace detail

template <typename T>
PooledOutput<T> ssrp_b_forward(const FeatureMap<T>& x, std::size_t window) {
  require(window >= 1, ErrorKind::kInvalidArgument, "SSRP-B window must be >= 1");
  const std::size_t C = x.channels(), Tn = x.time(), F = x.freq();
  require(window <= Tn, ErrorKind::kInvalidArgument,
          "SSRP-B window " + std::to_string(window) + " exceeds time extent " + std::to_string(Tn));

  PooledOutput<T> out{Grid<T>(C, F), std::vector<std::size_t>(C * F), 1};
  std::vector<double> prefix(Tn + 1);
  for (std::size_t c = 0; c < C; ++c) {
    const T* p = x.plane(c);
    for (std::size_t f = 0; f < F; ++f) {
      std::size_t best = 0;
      if (window == 1) {
        // Plain argmax; avoids prefix-difference rounding on near ties.
        for (std::size_t t = 1; t < Tn; ++t)
          if (p[t * F + f] > p[best * F + f]) best = t;
      } else {
        prefix[0] = 0.0;
        for (std::size_t t = 0; t < Tn; ++t)
          prefix[t + 1] = prefix[t] + static_cast<double>(p[t * F + f]);
        double best_sum = prefix[window];
        for (std::size_t s = 1; s + window <= Tn; ++s) {
          const double sum = prefix[s + window] - prefix[s];
          if (sum > best_sum) {
            best_sum = sum;
            best = s;
          }
        }
      }
      T acc = T(0);
      for (std::size_t i = 0; i < window; ++i) acc += p[(best + i) * F + f];
      out.values(c, f) = acc / static_cast<T>(window);
      out.selection[c * F + f] = best;
    }
  }
  return out;
}

/// grad_out(c, f) / W on each frame of the selected window, zero elsewhere.
template <typename T>
FeatureMap<T> ssrp_b_backward(const FeatureMap<T>& x, const PooledOutput<T>& out,
                              const Grid<T>& grad_out, std::size_t window) {
  detail::check_grad_shape(x, grad_out);
  detail::check_output_shape(x, out, 1);
  require(window >= 1 && window <= x.time(), ErrorKind::kInvalidArgument, "invalid SSRP-B window");
  const std::size_t C = x.channels(), F = x.freq();
  FeatureMap<T> g(C, x.time(), F);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t start = *out.cell(c, f);
      require(start + window <= x.time(), ErrorKind::kShape, "stale SSRP-B selection");
      const T share = grad_out(c, f) / static_cast<T>(window);
      for (std::size_t i = 0; i < window; ++i) g(c, start + i, f) += share;
    }
  return g;
}

template <typename T>
PooledOutput<T> ssrp_t_forward(const FeatureMap<T>& x, std::size_t top_k) {
  require(top_k >= 1, ErrorKind::kInvalidArgument, "SSRP-T top-K must be >= 1");
  const std::size_t C = x.channels(), Tn = x.time(), F = x.freq();
  require(top_k <= Tn, ErrorKind::kInvalidArgument,
          "SSRP-T top-K " + std::to_string(top_k) + " exceeds time extent " + std::to_string(Tn));

  PooledOutput<T> out{Grid<T>(C, F), std::vector<std::size_t>(C * F * top_k), top_k};
  std::vector<std::size_t> idx(Tn);
  for (std::size_t c = 0; c < C; ++c) {
    const T* p = x.plane(c);
    for (std::size_t f = 0; f < F; ++f) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      auto ranks_before = [&](std::size_t a, std::size_t b) {
        const T va = p[a * F + f], vb = p[b * F + f];
        return va > vb || (va == vb && a < b);
      };
      std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(top_k), idx.end(), ranks_before);
      std::sort(idx.begin(), idx.begin() + static_cast<long>(top_k));
      T acc = T(0);
      std::size_t* sel = out.selection.data() + (c * F + f) * top_k;
      for (std::size_t k = 0; k < top_k; ++k) {
        sel[k] = idx[k];
        acc += p[idx[k] * F + f];
      }
      out.values(c, f) = acc / static_cast<T>(top_k);
    }
  }
  return out;
}

/// grad_out(c, f) / K at each selected frame, zero elsewhere.
template <typename T>
FeatureMap<T> ssrp_t_backward(const FeatureMap<T>& x, const PooledOutput<T>& out,
                              const Grid<T>& grad_out, std::size_t top_k) {
  detail::check_grad_shape(x, grad_out);
  detail::check_output_shape(x, out, top_k);
  const std::size_t C = x.channels(), F = x.freq();
  FeatureMap<T> g(C, x.time(), F);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t f = 0; f < F; ++f) {
      const T share = grad_out(c, f) / static_cast<T>(top_k);
      const std::size_t* sel = out.cell(c, f);
      for (std::size_t k = 0; k < top_k; ++k) {
        require(sel[k] < x.time(), ErrorKind::kShape, "stale SSRP-T selection");
        g(c, sel[k], f) += share;
      }
    }
  return g;
}

template <typename T>
Grid<T> gap_forward(const FeatureMap<T>& x) {
  require(x.time() >= 1, ErrorKind::kShape, "GAP needs at least one frame");
  const std::size_t C = x.channels(), Tn = x.time(), F = x.freq();
  Grid<T> z(C, F);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t f = 0; f < F; ++f) {
      T acc = T(0);
      for (std::size_t t = 0; t < Tn; ++t) acc += x(c, t, f);
      z(c, f) = acc / static_cast<T>(Tn);
    }
  return z;
}

template <typename T>
FeatureMap<T> gap_backward(const FeatureMap<T>& x, const Grid<T>& grad_out) {
  detail::check_grad_shape(x, grad_out);
  FeatureMap<T> g(x.channels(), x.time(), x.freq());
  const T n = static_cast<T>(x.time());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t t = 0; t < x.time(); ++t)
      for (std::size_t f = 0; f < x.freq(); ++f) g(c, t, f) = grad_out(c, f) / n;
  return g;
}

/// Dispatches on `spec`. MAX is SSRP-T with K = 1; AVG is GAP.
template <typename T>
PooledOutput<T> global_pool_forward(const PoolingSpec& spec, const FeatureMap<T>& x) {
  spec.validate();
  switch (spec.kind) {
    case PoolingKind::kSsrpB: return ssrp_b_forward(x, spec.window);
    case PoolingKind::kSsrpT: return ssrp_t_forward(x, spec.top_k);
    case PoolingKind::kMax: return ssrp_t_forward(x, std::size_t{1});
    case PoolingKind::kGap:
    case PoolingKind::kAvg: break;
  }
  return PooledOutput<T>{gap_forward(x), {}, 0};
}

template <typename T>
FeatureMap<T> global_pool_backward(const PoolingSpec& spec, const FeatureMap<T>& x,
                                   const PooledOutput<T>& out, const Grid<T>& grad_out) {
  switch (spec.kind) {
    case PoolingKind::kSsrpB: return ssrp_b_backward(x, out, grad_out, spec.window);
    case PoolingKind::kSsrpT: return ssrp_t_backward(x, out, grad_out, spec.top_k);
    case PoolingKind::kMax: return ssrp_t_backward(x, out, grad_out, std::size_t{1});
    case PoolingKind::kGap:
    case PoolingKind::kAvg: break;
  }
  return gap_backward(x, grad_out);
}

// ---- in-backbone average pooling ------------------------------------------

/// Non-overlapping mean over `pool_t` x `pool_f` blocks; trailing partial
/// blocks are dropped.
template <typename T>
FeatureMap<T> avg_pool(const FeatureMap<T>& x, std::size_t pool_t, std::size_t pool_f) {
  require(pool_t >= 1 && pool_f >= 1, ErrorKind::kInvalidArgument, "pool size must be >= 1");
  require(x.time() >= pool_t && x.freq() >= pool_f, ErrorKind::kShape,
          "average pool " + std::to_string(pool_t) + "x" + std::to_string(pool_f) +
              " does not fit map " + x.shape_string());
  const std::size_t To = x.time() / pool_t, Fo = x.freq() / pool_f;
  const T inv = T(1) / static_cast<T>(pool_t * pool_f);
  FeatureMap<T> y(x.channels(), To, Fo);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t t = 0; t < To; ++t)
      for (std::size_t f = 0; f < Fo; ++f) {
        T acc = T(0);
        for (std::size_t i = 0; i < pool_t; ++i)
          for (std::size_t j = 0; j < pool_f; ++j) acc += x(c, t * pool_t + i, f * pool_f + j);
        y(c, t, f) = acc * inv;
      }
  return y;
}

template <typename T>
FeatureMap<T> avg_pool_backward(const FeatureMap<T>& x, const FeatureMap<T>& grad_out,
                                std::size_t pool_t, std::size_t pool_f) {
  require(grad_out.channels() == x.channels() && grad_out.time() == x.time() / pool_t &&
              grad_out.freq() == x.freq() / pool_f,
          ErrorKind::kShape, "average pool gradient shape mismatch");
  const T inv = T(1) / static_cast<T>(pool_t * pool_f);
  FeatureMap<T> g(x.channels(), x.time(), x.freq());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t t = 0; t < grad_out.time(); ++t)
      for (std::size_t f = 0; f < grad_out.freq(); ++f) {
        const T share = grad_out(c, t, f) * inv;
        for (std::size_t i = 0; i < pool_t; ++i)
          for (std::size_t j = 0; j < pool_f; ++j) g(c, t * pool_t + i, f * pool_f + j) = share;
      }
  return g;
}

template <typename T>
FeatureMap<T> avg_pool_2x2(const FeatureMap<T>& x) {
  require(x.time() >= 2 && x.freq() >= 2, ErrorKind::kShape,
          "2x2 average pool needs T >= 2 and F >= 2, got " + x.shape_string());
  return avg_pool(x, 2, 2);
}

template <typename T>
FeatureMap<T> avg_pool_2x2_backward(const FeatureMap<T>& x, const FeatureMap<T>& grad_out) {
  return avg_pool_backward(x, grad_out, 2, 2);
}

}  // namespace ssrp::pooling
