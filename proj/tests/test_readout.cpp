#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace qenc;
using std::numbers::pi;
using testing_support::spec;
using testing_support::to_matrix;

TEST(QubitReadout, Eigenstates) {
  const double z[] = {0};
  EXPECT_EQ(qubit_expectations(angle_embed(z)), std::vector<double>{1.0});
  const double zz[] = {0, 0};
  auto uniform = iqp_embed(zz);
  for (double v : qubit_expectations(uniform))
    EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(QubitReadout, AngleIsCosine) {
  const double third[] = {pi / 3};
  EXPECT_NEAR(qubit_expectations(angle_embed(third))[0], 0.5, 1e-12);
  for (int k = 0; k < 100; ++k) {
    const double x = pi * k / 99.0;
    EXPECT_NEAR(qubit_expectations(angle_embed(std::span<const double>(&x, 1)))[0], std::cos(x), 1e-10);
  }
}

TEST(QubitReadout, MatchesContractionOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, pi);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x = {u(rng), u(rng), u(rng)};
    auto s = iqp_embed(x, 2);
    auto ref = oracle::iqp(x, 2);
    auto z = qubit_expectations(s);
    for (int i = 0; i < 3; ++i)
      EXPECT_NEAR(z[i], oracle::expect_z(ref, i), 1e-10);
  }
}

TEST(QubitReadout, OptionalObservables) {
  ReadoutSpec r;
  r.x = true;
  r.zz = true;
  const double h[] = {pi / 2, 0};
  auto v = qubit_expectations(angle_embed(h), r);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_NEAR(v[0], 0.0, 1e-12); // <Z0>
  EXPECT_NEAR(v[1], 1.0, 1e-12); // <Z1>
  EXPECT_NEAR(v[2], 1.0, 1e-12); // <X0>
  EXPECT_NEAR(v[3], 0.0, 1e-12); // <X1>
  EXPECT_NEAR(v[4], 0.0, 1e-12); // <Z0 Z1>
}

TEST(GaussianReadout, Moments) {
  const double z[] = {0}, a[] = {1.5}, r[] = {0.5};
  EXPECT_EQ(gaussian_moments(displacement_embed(z)), (std::vector<double>{0, 0, 1, 1}));
  auto d = gaussian_moments(displacement_embed(a));
  EXPECT_NEAR(d[0], 3.0, 1e-12);
  EXPECT_NEAR(d[2], 1.0, 1e-12);
  auto s = gaussian_moments(squeezing_embed(r));
  EXPECT_NEAR(s[2], std::exp(-1.0), 1e-12);
  EXPECT_NEAR(s[3], std::exp(1.0), 1e-12);
}

TEST(ReadoutSpec, EmptySelectionRejected) {
  ReadoutSpec r;
  r.z = false;
  EXPECT_THROW(r.validate(), ConfigError);
}

TEST(DatasetFeatures, WidthAndLabels) {
  auto m = to_matrix(testing_support::gds_example(), std::vector<int>{0, 1, 0, 1});
  auto f = dataset_features(encode_gds(m, spec(EmbeddingKind::angle, Granularity::cell)));
  EXPECT_EQ(f.cols(), 3u);
  EXPECT_EQ(f.column_names[1], "c1.q0:Z");
  EXPECT_EQ(*f.labels, *m.labels);
  auto g = dataset_features(encode_gds(m, spec(EmbeddingKind::squeezing, Granularity::cell)));
  EXPECT_EQ(g.cols(), 12u);
}

TEST(DatasetFeatures, SharedRowsShareFeatures) {
  auto m = to_matrix(testing_support::ils_example());
  auto f = dataset_features(encode_ils(m, spec(EmbeddingKind::angle, Granularity::row)));
  EXPECT_EQ(f.values.row(0), f.values.row(1));
  EXPECT_EQ(f.column_names[0], "q0:Z");
}

TEST(DatasetFeatures, RowReadoutFactorsIntoCells) {
  std::mt19937_64 rng(3);
  auto m = to_matrix(oracle::random_grid(rng, 40, 4, 7));
  for (auto kind : {EmbeddingKind::angle, EmbeddingKind::displacement, EmbeddingKind::squeezing}) {
    auto cell = dataset_features(encode_direct(m, spec(kind, Granularity::cell)));
    auto row = dataset_features(encode_direct(m, spec(kind, Granularity::row)));
    EXPECT_LE((cell.values - row.values).cwiseAbs().maxCoeff(), 1e-12);
  }
  auto b = to_matrix(oracle::random_binary_grid(rng, 40, 4));
  auto cell = dataset_features(encode_direct(b, spec(EmbeddingKind::basis, Granularity::cell)));
  auto row = dataset_features(encode_direct(b, spec(EmbeddingKind::basis, Granularity::row)));
  EXPECT_LE((cell.values - row.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DatasetFeatures, RangeInvariants) {
  std::mt19937_64 rng(4);
  auto m = to_matrix(oracle::random_grid(rng, 30, 3, 30));
  ReadoutSpec r;
  r.x = r.zz = true;
  for (auto kind : {EmbeddingKind::iqp, EmbeddingKind::qaoa}) {
    auto f = dataset_features(encode_direct(m, spec(kind, Granularity::row)), r);
    EXPECT_LE(f.values.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
  auto s = dataset_features(encode_direct(m, spec(EmbeddingKind::squeezing, Granularity::cell)));
  for (std::size_t j = 0; j < s.cols(); ++j)
    if (s.column_names[j].find("var") != std::string::npos)
      EXPECT_GT(s.values.col(static_cast<Eigen::Index>(j)).minCoeff(), 0.0);
}

TEST(DatasetFeatures, GdsEqualsDirect) {
  std::mt19937_64 rng(5);
  auto m = to_matrix(oracle::random_grid(rng, 50, 5, 4));
  auto a = dataset_features(encode_gds(m, spec(EmbeddingKind::angle, Granularity::cell)));
  auto b = dataset_features(encode_direct(m, spec(EmbeddingKind::angle, Granularity::cell)));
  EXPECT_EQ(a.values, b.values);
}
