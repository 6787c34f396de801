#pragma once

// Standardization, covariance, variance-threshold component selection,
// projection and reconstruction for principal component analysis.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrp/binary_io.hpp"
#include "ssrp/error.hpp"
#include "ssrp/matrix.hpp"
#include "ssrp/pca/eigen.hpp"
#include "ssrp/tensor.hpp"

namespace ssrp::pca {

inline constexpr double kStdFloor = 1e-8;

/// Per-feature training statistics.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }

  Matrix apply(const Matrix& data) const {
    require(data.cols() == dim(), ErrorKind::kShape,
            "standardizer expects " + std::to_string(dim()) + " features, got " +
                std::to_string(data.cols()));
    Matrix out(data.rows(), data.cols());
    for (std::size_t r = 0; r < data.rows(); ++r)
      for (std::size_t c = 0; c < data.cols(); ++c) out(r, c) = (data(r, c) - mean[c]) / std[c];
    return out;
  }

  bool operator==(const Standardizer&) const = default;
};

/// Column means and n-1 standard deviations, std clamped to >= 1e-8.
inline Standardizer fit_standardizer(const Matrix& data) {
  require(data.rows() >= 2, ErrorKind::kInsufficientData, "standardizer needs at least 2 samples");
  const std::size_t n = data.rows(), d = data.cols();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = data.row(r);
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += row[c];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = data.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = row[c] - s.mean[c];
      s.std[c] += dv * dv;
    }
  }
  for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n - 1)), kStdFloor);
  return s;
}

inline Matrix center_columns(const Matrix& data) {
  Matrix x = data;
  const std::size_t n = x.rows();
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += x(r, c);
    m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) x(r, c) -= m;
  }
  return x;
}

/// Sample covariance X^T X / (n - 1). Columns are mean-centred first unless
/// `centered` says they already are.
inline Matrix covariance(const Matrix& data, bool centered) {
  require(data.rows() >= 2, ErrorKind::kInsufficientData, "covariance needs at least 2 samples");
  const Matrix x = centered ? data : center_columns(data);
  const std::size_t n = x.rows(), d = x.cols();
  Matrix sigma(d, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = row[i];
      if (xi == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) sigma(i, j) += xi * row[j];
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) sigma(j, i) = sigma(i, j) = sigma(i, j) / denom;
  return sigma;
}

/// Smallest k whose cumulative share of the spectrum reaches `threshold`.
inline std::size_t select_k_by_variance(const std::vector<double>& eigenvalues, double threshold) {
  require(threshold > 0.0 && threshold <= 1.0, ErrorKind::kInvalidArgument,
          "variance threshold must lie in (0, 1]");
  require(!eigenvalues.empty(), ErrorKind::kInvalidArgument, "empty spectrum");
  double total = 0.0;
  for (double l : eigenvalues) {
    require(l >= 0.0, ErrorKind::kInvalidArgument, "eigenvalues must be non-negative");
    total += l;
  }
  if (total <= 0.0) fail(ErrorKind::kDegenerate, "all eigenvalues are zero");
  // Summed in the same order as `total`, so the final ratio is exactly 1.
  double partial = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    partial += eigenvalues[i];
    if (partial / total >= threshold) return i + 1;
  }
  return eigenvalues.size();
}

enum class SolverPath { kAuto, kCovariance, kGram };

struct PcaModel {
  Standardizer standardizer;
  Matrix projection;                      // d x k, orthonormal columns
  std::vector<double> eigenvalues;        // k, descending
  std::vector<double> explained_variance_ratio;
  std::vector<double> spectrum;           // every computed eigenvalue, descending
  double total_variance = 0.0;
  double threshold = 1.0;

  std::size_t dim() const { return projection.rows(); }
  std::size_t components() const { return projection.cols(); }
};

struct Spectrum {
  std::vector<double> values;  // descending, clamped at 0
  Matrix vectors;              // d x m feature-space eigenvectors (m = values.size())
};

/// Eigenpairs of the covariance of already-centred data `x`. The Gram path
/// diagonalizes X X^T / (n-1) and lifts eigenvectors with w = X^T u / |X^T u|;
/// only strictly positive eigenvalues are lifted.
inline Spectrum covariance_spectrum(const Matrix& x, SolverPath path = SolverPath::kAuto) {
  require(x.rows() >= 2, ErrorKind::kInsufficientData, "PCA needs at least 2 samples");
  const std::size_t n = x.rows(), d = x.cols();
  if (path == SolverPath::kAuto) path = n < d ? SolverPath::kGram : SolverPath::kCovariance;

  Spectrum out;
  if (path == SolverPath::kCovariance) {
    auto eig = symmetric_eigendecomposition(covariance(x, true));
    out.values = std::move(eig.values);
    for (double& l : out.values) l = std::max(l, 0.0);
    out.vectors = std::move(eig.vectors);
    return out;
  }

  Matrix gram = matmul_bt(x, x);
  for (double& g : gram.data()) g /= static_cast<double>(n - 1);
  auto eig = symmetric_eigendecomposition(gram);
  const double top = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
  const double cutoff = top * 1e-12;

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < eig.values.size(); ++i)
    if (eig.values[i] > cutoff) keep.push_back(i);
  out.vectors = Matrix(d, keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const std::size_t src = keep[j];
    out.values.push_back(eig.values[src]);
    std::vector<double> w(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double u = eig.vectors(r, src);
      auto row = x.row(r);
      for (std::size_t c = 0; c < d; ++c) w[c] += row[c] * u;
    }
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < d; ++c) out.vectors(c, j) = w[c] / norm;
  }
  canonicalize_signs(out.vectors);
  return out;
}

/// Fits a standardizer on `data`, then keeps the fewest components whose
/// cumulative explained variance reaches `threshold`.
inline PcaModel fit_pca(const Matrix& data, double threshold, SolverPath path = SolverPath::kAuto) {
  PcaModel m;
  m.threshold = threshold;
  m.standardizer = fit_standardizer(data);
  const Matrix x = m.standardizer.apply(data);
  auto spec = covariance_spectrum(x, path);
  m.spectrum = spec.values;
  m.total_variance = 0.0;
  for (double l : m.spectrum) m.total_variance += l;
  const std::size_t k = select_k_by_variance(m.spectrum, threshold);

  m.projection = Matrix(x.cols(), k);
  for (std::size_t i = 0; i < x.cols(); ++i)
    for (std::size_t j = 0; j < k; ++j) m.projection(i, j) = spec.vectors(i, j);
  m.eigenvalues.assign(m.spectrum.begin(), m.spectrum.begin() + static_cast<long>(k));
  for (double l : m.eigenvalues) m.explained_variance_ratio.push_back(l / m.total_variance);
  return m;
}

/// Z = X W for standardized rows X.
inline Matrix project(const PcaModel& model, const Matrix& standardized) {
  require(standardized.cols() == model.dim(), ErrorKind::kShape,
          "project expects " + std::to_string(model.dim()) + " columns, got " +
              std::to_string(standardized.cols()));
  return matmul(standardized, model.projection);
}

/// X_hat = Z W^T, in standardized space.
inline Matrix reconstruct(const PcaModel& model, const Matrix& z) {
  require(z.cols() == model.components(), ErrorKind::kShape,
          "reconstruct expects " + std::to_string(model.components()) + " columns, got " +
              std::to_string(z.cols()));
  return matmul_bt(z, model.projection);
}

/// Lays a k-vector out as a single-channel k x 1 map (time = k, freq = 1).
template <typename T = double>
FeatureMap<T> reshape_for_cnn(std::span<const double> z) {
  require(!z.empty(), ErrorKind::kInvalidArgument, "cannot reshape an empty component vector");
  FeatureMap<T> m(1, z.size(), 1);
  for (std::size_t i = 0; i < z.size(); ++i) m(0, i, 0) = static_cast<T>(z[i]);
  return m;
}

template <typename T>
std::vector<double> flatten(const FeatureMap<T>& m) {
  return {m.data().begin(), m.data().end()};
}

/// CSV "component_index,cumulative_explained_variance", 1-based index.
inline std::string variance_curve_csv(const std::vector<double>& eigenvalues) {
  double total = 0.0;
  for (double l : eigenvalues) {
    require(l >= 0.0, ErrorKind::kInvalidArgument, "eigenvalues must be non-negative");
    total += l;
  }
  if (total <= 0.0) fail(ErrorKind::kDegenerate, "all eigenvalues are zero");
  std::string s = "component_index,cumulative_explained_variance\n";
  double partial = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    partial += eigenvalues[i];
    s += std::to_string(i + 1) + "," + io::format_double(partial / total) + "\n";
  }
  return s;
}

inline void emit_variance_curve(const std::vector<double>& eigenvalues, const std::string& path) {
  io::write_text(path, variance_curve_csv(eigenvalues));
}

// ---- serialization -------------------------------------------------------

/// "PCAM", u32 d, u32 k, then float64: mean[d], std[d], W[d*k] row-major, lambda[k].
inline std::vector<char> encode_pcam(const PcaModel& m) {
  io::BinaryWriter w;
  w.bytes("PCAM");
  w.u32(static_cast<std::uint32_t>(m.dim()));
  w.u32(static_cast<std::uint32_t>(m.components()));
  for (double v : m.standardizer.mean) w.f64(v);
  for (double v : m.standardizer.std) w.f64(v);
  for (double v : m.projection.data()) w.f64(v);
  for (double v : m.eigenvalues) w.f64(v);
  return w.buffer();
}

/// Restores what PCAM carries; `spectrum` becomes the retained eigenvalues and
/// ratios are taken against their sum unless `total_variance` is supplied.
inline PcaModel decode_pcam(std::span<const char> bytes, double total_variance = 0.0) {
  io::BinaryReader rd(bytes);
  if (rd.remaining() < 12 || rd.bytes(4) != "PCAM") fail(ErrorKind::kDecode, "not a PCAM file");
  const std::size_t d = rd.u32(), k = rd.u32();
  if (rd.remaining() != (2 * d + d * k + k) * sizeof(double))
    fail(ErrorKind::kDecode, "PCAM payload size does not match header");
  PcaModel m;
  m.standardizer.mean.resize(d);
  m.standardizer.std.resize(d);
  for (double& v : m.standardizer.mean) v = rd.f64();
  for (double& v : m.standardizer.std) v = rd.f64();
  m.projection = Matrix(d, k);
  for (double& v : m.projection.data()) v = rd.f64();
  m.eigenvalues.resize(k);
  for (double& v : m.eigenvalues) v = rd.f64();
  m.spectrum = m.eigenvalues;
  if (total_variance <= 0.0)
    for (double l : m.eigenvalues) total_variance += l;
  m.total_variance = total_variance;
  for (double l : m.eigenvalues) m.explained_variance_ratio.push_back(l / total_variance);
  return m;
}

inline nlohmann::json summary_json(const PcaModel& m) {
  return {{"dim", m.dim()},
          {"k", m.components()},
          {"threshold", m.threshold},
          {"total_variance", m.total_variance},
          {"eigenvalues", m.eigenvalues},
          {"explained_variance_ratio", m.explained_variance_ratio}};
}

inline void save_pca(const PcaModel& m, const std::string& bin_path, const std::string& json_path) {
  auto bytes = encode_pcam(m);
  io::write_text(bin_path, std::string_view(bytes.data(), bytes.size()));
  io::write_text(json_path, summary_json(m).dump(2) + "\n");
}

}  // namespace ssrp::pca
