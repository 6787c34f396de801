#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ssrp/pca/pca.hpp"

using namespace ssrp;
using namespace ssrp::pca;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (double& v : m.data()) v = nd(rng);
  return m;
}

// Data with a decaying spectrum so truncation is meaningful.
Matrix correlated_data(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  Matrix z = random_matrix(n, d, rng);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) z(r, c) *= 3.0 / (1.0 + double(c));
  return matmul(z, random_matrix(d, d, rng));
}

double column_dot(const Matrix& m, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, i) * m(r, j);
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kContract;
}

}  // namespace

TEST(Standardizer, HandComputedColumns) {
  Matrix x{{1.0, 5.0}, {3.0, 5.0}};
  auto s = fit_standardizer(x);
  EXPECT_EQ(s.mean, (std::vector<double>{2.0, 5.0}));
  EXPECT_NEAR(s.std[0], std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.std[1], 1e-8);
  Matrix c{{5.0}, {5.0}, {5.0}};
  EXPECT_EQ(fit_standardizer(c).std[0], 1e-8);
  EXPECT_EQ(fit_standardizer(c).mean[0], 5.0);
}

TEST(Standardizer, IdempotentOnStandardizedData) {
  std::mt19937_64 rng(1);
  Matrix x = random_matrix(30, 5, rng);
  auto z = fit_standardizer(x).apply(x);
  auto s = fit_standardizer(z);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_NEAR(s.mean[c], 0.0, 1e-12);
    EXPECT_NEAR(s.std[c], 1.0, 1e-12);
  }
}

TEST(Standardizer, NeedsTwoRows) {
  EXPECT_EQ(kind_of([] { fit_standardizer(Matrix{{1.0, 2.0}}); }), ErrorKind::kInsufficientData);
  EXPECT_EQ(kind_of([] { fit_standardizer(Matrix{{1.0}, {2.0}}).apply(Matrix{{1.0, 2.0}}); }), ErrorKind::kShape);
}

TEST(Covariance, WorkedExamples) {
  auto s = covariance(Matrix{{1, 1}, {-1, -1}}, true);
  EXPECT_EQ(s, (Matrix{{2, 2}, {2, 2}}));
  auto v = covariance(Matrix{{1}, {2}, {4}}, false);
  EXPECT_NEAR(v(0, 0), 7.0 / 3.0, 1e-12);  // mean 7/3, squared deviations 42/9 over n-1 = 2
  auto o = covariance(Matrix{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, true);
  EXPECT_EQ(o(0, 1), 0.0);
  EXPECT_EQ(o(1, 0), 0.0);
  EXPECT_NEAR(o(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(kind_of([] { covariance(Matrix{{1.0}}, false); }), ErrorKind::kInsufficientData);
}

TEST(Covariance, SymmetricAndMatchesDirectFormula) {
  std::mt19937_64 rng(2);
  Matrix x = random_matrix(12, 6, rng);
  auto s = covariance(x, false);
  EXPECT_LE(max_asymmetry(s), 1e-12);
  Matrix xc = center_columns(x);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(s(i, j), column_dot(xc, i, j) / 11.0, 1e-12);
}

TEST(Eigen, HandExamples) {
  auto id = symmetric_eigendecomposition(Matrix::identity(3));
  for (double l : id.values) EXPECT_NEAR(l, 1.0, 1e-15);

  auto diag = symmetric_eigendecomposition(Matrix{{1, 0}, {0, 4}});
  EXPECT_NEAR(diag.values[0], 4.0, 1e-15);
  EXPECT_NEAR(diag.values[1], 1.0, 1e-15);
  EXPECT_NEAR(std::abs(diag.vectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(diag.vectors(0, 1)), 1.0, 1e-15);

  auto e = symmetric_eigendecomposition(Matrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(e.values[0], 3.0, 1e-12);
  EXPECT_NEAR(e.values[1], 1.0, 1e-12);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(e.vectors(0, 0) * r + e.vectors(1, 0) * r), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(e.vectors(0, 1) * r - e.vectors(1, 1) * r), 1.0, 1e-12);
}

TEST(Eigen, RejectsAsymmetricInput) {
  EXPECT_EQ(kind_of([] { symmetric_eigendecomposition(Matrix{{1, 2}, {0, 1}}); }), ErrorKind::kContract);
}

TEST(Eigen, ResidualsAndOrthonormality) {
  std::mt19937_64 rng(3);
  for (std::size_t n = 1; n <= 12; ++n) {
    Matrix a = oracle::random_symmetric(n, rng);
    auto e = symmetric_eigendecomposition(a);
    for (std::size_t i = 0; i + 1 < n; ++i) EXPECT_GE(e.values[i], e.values[i + 1]);
    Matrix av = matmul(a, e.vectors);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i)
        EXPECT_NEAR(av(i, j), e.values[j] * e.vectors(i, j), 1e-6 * std::max(1.0, std::abs(e.values[j])));
      for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(column_dot(e.vectors, j, k), j == k ? 1.0 : 0.0, 1e-10);
    }
  }
}

TEST(Eigen, SignConvention) {
  std::mt19937_64 rng(4);
  Matrix a = oracle::random_symmetric(7, rng);
  auto e = symmetric_eigendecomposition(a);
  for (std::size_t j = 0; j < 7; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 7; ++i)
      if (std::abs(e.vectors(i, j)) > std::abs(e.vectors(arg, j))) arg = i;
    EXPECT_GT(e.vectors(arg, j), 0.0);
  }
}

TEST(Eigen, AgreesWithPowerIterationOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 11;
    Matrix a = oracle::random_symmetric(n, rng);
    auto e = symmetric_eigendecomposition(a);
    auto ref = oracle::power_iteration_eigen(a, 100 + static_cast<std::uint64_t>(trial));
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(e.values[j], ref[j].value, 1e-6);
      double cos = 0.0;
      for (std::size_t i = 0; i < n; ++i) cos += e.vectors(i, j) * ref[j].vector[i];
      EXPECT_GT(std::abs(cos), 1.0 - 1e-6);
    }
  }
}

TEST(SelectK, WorkedExamples) {
  EXPECT_EQ(select_k_by_variance({4, 3, 2, 1}, 0.9), 3u);
  EXPECT_EQ(select_k_by_variance({4, 3, 2, 1}, 1.0), 4u);
  EXPECT_EQ(select_k_by_variance({1, 0, 0}, 0.5), 1u);
  EXPECT_EQ(select_k_by_variance({4, 3, 2, 1}, 0.4), 1u);  // inclusive boundary
  EXPECT_EQ(kind_of([] { select_k_by_variance({0, 0}, 0.5); }), ErrorKind::kDegenerate);
  EXPECT_EQ(kind_of([] { select_k_by_variance({1, 0}, 0.0); }), ErrorKind::kInvalidArgument);
}

TEST(SelectK, ExactFullRetentionOnAwkwardSpectra) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(1 + trial % 40);
    for (double& v : l) v = u(rng) * std::pow(10.0, -8.0 * u(rng));
    std::sort(l.rbegin(), l.rend());
    // k never exceeds the number of non-zero entries needed.
    EXPECT_LE(select_k_by_variance(l, 1.0), l.size());
  }
}

TEST(SelectK, MonotoneInThreshold) {
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> ex(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> l(15);
    for (double& v : l) v = ex(rng);
    std::sort(l.rbegin(), l.rend());
    std::size_t prev = 0;
    for (double t = 0.05; t <= 1.0; t += 0.05) {
      const auto k = select_k_by_variance(l, std::min(t, 1.0));
      EXPECT_GE(k, prev);
      prev = k;
    }
  }
}

TEST(Pca, ModelInvariants) {
  std::mt19937_64 rng(8);
  Matrix x = correlated_data(60, 10, rng);
  auto m = fit_pca(x, 0.9);
  ASSERT_GE(m.components(), 1u);
  for (std::size_t i = 0; i < m.components(); ++i)
    for (std::size_t j = 0; j < m.components(); ++j)
      EXPECT_NEAR(column_dot(m.projection, i, j), i == j ? 1.0 : 0.0, 1e-8);
  double ratio_sum = 0.0, spec_sum = 0.0;
  for (std::size_t i = 0; i < m.eigenvalues.size(); ++i) {
    EXPECT_EQ(m.explained_variance_ratio[i], m.eigenvalues[i] / m.total_variance);
    ratio_sum += m.explained_variance_ratio[i];
  }
  for (double l : m.spectrum) {
    EXPECT_GE(l, -1e-10);
    spec_sum += l;
  }
  EXPECT_EQ(spec_sum, m.total_variance);
  EXPECT_GE(ratio_sum, 0.9 - 1e-12);
  // Full retention: ratios sum to one.
  auto full = fit_pca(x, 1.0);
  double s = 0.0;
  for (double r : full.explained_variance_ratio) s += r;
  EXPECT_NEAR(s, 1.0, 1e-10);
  // Trace of the standardized covariance equals the total variance.
  auto cov = covariance(m.standardizer.apply(x), true);
  double trace = 0.0;
  for (std::size_t i = 0; i < 10; ++i) trace += cov(i, i);
  EXPECT_NEAR(trace, m.total_variance, 1e-9);
}

TEST(Pca, ProjectedVariancesMatchEigenvalues) {
  std::mt19937_64 rng(9);
  Matrix x = correlated_data(80, 8, rng);
  auto m = fit_pca(x, 1.0);
  Matrix z = project(m, m.standardizer.apply(x));
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.cols(); ++j) {
    const double var = column_dot(z, j, j) / double(z.rows() - 1);
    EXPECT_NEAR(var, m.eigenvalues[j], 1e-6 * std::max(1.0, m.eigenvalues[j]));
    EXPECT_LE(var, prev * (1 + 1e-9));
    prev = var;
  }
}

TEST(Pca, ProjectReconstructExamples) {
  std::mt19937_64 rng(10);
  Matrix x = random_matrix(5, 8, rng);
  auto m = fit_pca(x, 0.5);
  Matrix zero(3, 8);
  const Matrix z0 = project(m, zero);
  for (double v : z0.data()) EXPECT_EQ(v, 0.0);
  const Matrix x0 = reconstruct(m, Matrix(2, m.components()));
  for (double v : x0.data()) EXPECT_EQ(v, 0.0);

  Matrix w1(1, 8);
  for (std::size_t i = 0; i < 8; ++i) w1(0, i) = m.projection(i, 0);
  auto z = project(m, w1);
  EXPECT_NEAR(z(0, 0), 1.0, 1e-12);
  for (std::size_t j = 1; j < m.components(); ++j) EXPECT_NEAR(z(0, j), 0.0, 1e-12);

  EXPECT_EQ(kind_of([&] { project(m, Matrix(1, 7)); }), ErrorKind::kShape);
  EXPECT_EQ(kind_of([&] { reconstruct(m, Matrix(1, m.components() + 1)); }), ErrorKind::kShape);
}

TEST(Pca, FullRankRoundTrip) {
  std::mt19937_64 rng(11);
  // 5 x 8 data spans a 4-dimensional centred subspace; a square model built
  // from the covariance path keeps all 8 directions.
  Matrix x = random_matrix(5, 8, rng);
  auto spec = covariance_spectrum(center_columns(x), SolverPath::kCovariance);
  PcaModel m;
  m.projection = spec.vectors;
  m.standardizer = {std::vector<double>(8, 0.0), std::vector<double>(8, 1.0)};
  auto back = reconstruct(m, project(m, x));
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_NEAR(back.data()[i], x.data()[i], 1e-8);
}

TEST(Pca, TruncationErrorIdentityAndMonotonicity) {
  std::mt19937_64 rng(12);
  Matrix x = correlated_data(40, 9, rng);
  const auto full = fit_pca(x, 1.0);
  const Matrix xs = full.standardizer.apply(x);
  const auto spec = covariance_spectrum(xs, SolverPath::kCovariance);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= 9; ++k) {
    PcaModel m;
    m.standardizer = full.standardizer;
    m.projection = Matrix(9, k);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < k; ++j) m.projection(i, j) = spec.vectors(i, j);
    const auto back = reconstruct(m, project(m, xs));
    double err = 0.0;
    for (std::size_t i = 0; i < xs.data().size(); ++i) err += std::pow(xs.data()[i] - back.data()[i], 2);
    double tail = 0.0;
    for (std::size_t j = k; j < 9; ++j) tail += spec.values[j];
    EXPECT_NEAR(err, tail * 39.0, 1e-8 * std::max(1.0, err));
    EXPECT_LE(err, prev + 1e-9);
    prev = err;
  }
}

TEST(Pca, GramPathMatchesCovariancePath) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x = center_columns(random_matrix(10, 40, rng));
    auto direct = covariance_spectrum(x, SolverPath::kCovariance);
    auto gram = covariance_spectrum(x, SolverPath::kGram);
    ASSERT_EQ(gram.values.size(), 9u);  // rank n - 1 after centring
    for (std::size_t j = 0; j < gram.values.size(); ++j) {
      EXPECT_NEAR(gram.values[j], direct.values[j], 1e-8);
      double cos = 0.0;
      for (std::size_t i = 0; i < 40; ++i) cos += gram.vectors(i, j) * direct.vectors(i, j);
      EXPECT_GT(cos, 1.0 - 1e-8);  // same sign convention
    }
  }
}

TEST(ReshapeForCnn, Layout) {
  std::vector<double> z(101);
  std::iota(z.begin(), z.end(), 0.0);
  auto m = reshape_for_cnn(z);
  EXPECT_EQ(m.channels(), 1u);
  EXPECT_EQ(m.time(), 101u);
  EXPECT_EQ(m.freq(), 1u);
  EXPECT_EQ(flatten(m), z);
  auto one = reshape_for_cnn(std::vector<double>{2.5});
  EXPECT_EQ(one.time(), 1u);
  EXPECT_THROW(reshape_for_cnn(std::vector<double>{}), Error);
}

TEST(VarianceCurve, WorkedExamplesAndShape) {
  EXPECT_EQ(variance_curve_csv({1.0}), "component_index,cumulative_explained_variance\n1,1\n");
  EXPECT_EQ(variance_curve_csv({3.0, 1.0}), "component_index,cumulative_explained_variance\n1,0.75\n2,1\n");
  std::mt19937_64 rng(14);
  auto m = fit_pca(correlated_data(30, 12, rng), 0.95);
  std::istringstream in(variance_curve_csv(m.spectrum));
  std::string line;
  std::getline(in, line);
  double prev = 0.0, last = 0.0;
  while (std::getline(in, line)) {
    last = io::parse_double(line.substr(line.find(',') + 1));
    EXPECT_GE(last, prev);
    prev = last;
  }
  EXPECT_EQ(last, 1.0);
}

TEST(PcaSerialization, RoundTrip) {
  std::mt19937_64 rng(15);
  auto m = fit_pca(correlated_data(20, 6, rng), 0.9);
  auto back = decode_pcam(encode_pcam(m), m.total_variance);
  EXPECT_EQ(back.standardizer, m.standardizer);
  EXPECT_EQ(back.projection, m.projection);
  EXPECT_EQ(back.eigenvalues, m.eigenvalues);
  EXPECT_EQ(back.explained_variance_ratio, m.explained_variance_ratio);
  auto bytes = encode_pcam(m);
  bytes.pop_back();
  EXPECT_EQ(kind_of([&] { decode_pcam(bytes); }), ErrorKind::kDecode);
  const auto dir = std::filesystem::temp_directory_path();
  save_pca(m, (dir / "ssrp_test.pcam").string(), (dir / "ssrp_test.json").string());
  auto j = nlohmann::json::parse(io::read_text((dir / "ssrp_test.json").string()));
  EXPECT_EQ(j.at("k").get<std::size_t>(), m.components());
  EXPECT_EQ(j.at("threshold").get<double>(), 0.9);
}
