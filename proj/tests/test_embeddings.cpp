#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace qenc;
using std::numbers::pi;

namespace {

void expect_state_near(const PureState& s, const oracle::CVec& ref, double tol) {
  ASSERT_EQ(s.amplitudes.size(), ref.size());
  for (Eigen::Index i = 0; i < ref.size(); ++i)
    EXPECT_NEAR(std::abs(s.amplitudes(i) - ref(i)), 0.0, tol) << "amplitude " << i;
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t d, double lo = 0, double hi = pi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(d);
  for (auto& v : x)
    v = u(rng);
  return x;
}

} // namespace

TEST(Basis, BigEndianIndex) {
  const double a[] = {0}, b[] = {1, 0}, c[] = {1, 1, 1};
  EXPECT_EQ(basis_embed(a).amplitudes(0), Complex(1, 0));
  auto sb = basis_embed(b);
  EXPECT_EQ(sb.amplitudes(2), Complex(1, 0));
  EXPECT_EQ(sb.amplitudes.cwiseAbs().sum(), 1.0);
  EXPECT_EQ(basis_embed(c).amplitudes(7), Complex(1, 0));
  const double bad[] = {0.5};
  EXPECT_THROW(basis_embed(bad), ValidationError);
}

TEST(Basis, MatchesIntegerOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    auto g = oracle::random_binary_grid(rng, 1, 6)[0];
    std::size_t idx = 0;
    for (double b : g)
      idx = idx * 2 + static_cast<std::size_t>(b);
    EXPECT_EQ(basis_embed(g).amplitudes(static_cast<Eigen::Index>(idx)), Complex(1, 0));
  }
}

TEST(Angle, SingleQubitCases) {
  const double z[] = {0}, p[] = {pi}, h[] = {pi / 2};
  expect_state_near(angle_embed(z), oracle::CVec::Unit(2, 0), 1e-12);
  expect_state_near(angle_embed(p), oracle::CVec::Unit(2, 1), 1e-12);
  oracle::CVec ref = oracle::ry(pi / 2) * oracle::zero_state(1);
  expect_state_near(angle_embed(h), ref, 1e-12);
  EXPECT_NEAR(angle_embed(h).amplitudes(0).real(), 0.70710678, 1e-8);
}

TEST(Angle, MatchesDenseOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    auto x = draw(rng, 3);
    oracle::CVec psi = oracle::zero_state(3);
    for (int j = 0; j < 3; ++j)
      psi = oracle::lift(oracle::ry(x[j]), j, 3) * psi;
    expect_state_near(angle_embed(x), psi, 1e-12);
  }
}

TEST(Iqp, ZeroInputIsUniform) {
  const double x[] = {0, 0, 0};
  auto s = iqp_embed(x);
  for (Eigen::Index i = 0; i < 8; ++i)
    EXPECT_NEAR(std::abs(s.amplitudes(i) - Complex(std::pow(2.0, -1.5), 0)), 0.0, 1e-12);
}

TEST(Iqp, WorkedTwoQubitCase) {
  const std::vector<double> x = {0.5, 1.0};
  expect_state_near(iqp_embed(x, 1), oracle::iqp(x, 1), 1e-10);
}

TEST(Iqp, MatchesDenseOracleUpToThreeQubits) {
  std::mt19937_64 rng(6);
  for (std::size_t d = 1; d <= 3; ++d)
    for (int layers = 1; layers <= 3; ++layers)
      for (int t = 0; t < 10; ++t) {
        auto x = draw(rng, d);
        expect_state_near(iqp_embed(x, layers), oracle::iqp(x, layers), 1e-10);
      }
}

TEST(Qaoa, ZeroEverythingIsVacuum) {
  const double x[] = {0};
  const std::vector<double> params(qaoa_param_count(1, 1), 0.0);
  auto s = qaoa_embed(x, params, 1);
  EXPECT_EQ(s.qubit_count, 2);
  expect_state_near(s, oracle::CVec::Unit(4, 0), 1e-12);
}

TEST(Qaoa, SeededTwoQubitCase) {
  const std::vector<double> x = {0.3, 0.7};
  const auto params = qaoa_seeded_params(2, 1, 99);
  expect_state_near(qaoa_embed(x, params, 1), oracle::qaoa(x, params, 1), 1e-10);
}

TEST(Qaoa, MatchesDenseOracleUpToThreeQubits) {
  std::mt19937_64 rng(8);
  for (std::size_t d = 1; d <= 3; ++d)
    for (int layers = 1; layers <= 2; ++layers)
      for (int t = 0; t < 10; ++t) {
        auto x = draw(rng, d);
        auto params = qaoa_seeded_params(d, layers, rng());
        expect_state_near(qaoa_embed(x, params, layers), oracle::qaoa(x, params, layers), 1e-10);
      }
}

TEST(Qaoa, ParamLengthMismatchIsConfigError) {
  const double x[] = {0.1, 0.2};
  const std::vector<double> params(3, 0.0);
  EXPECT_THROW(qaoa_embed(x, params, 1), ConfigError);
  EmbeddingSpec s = testing_support::spec(EmbeddingKind::qaoa, Granularity::row);
  s.qaoa_params = {1, 2, 3};
  EXPECT_THROW(Embedder(s, 2), ConfigError);
}

TEST(QubitEmbeddings, NormalizedOnRandomInputs) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 1000; ++t) {
    auto x = draw(rng, 4, -2 * pi, 2 * pi);
    EXPECT_NEAR(angle_embed(x).norm(), 1.0, 1e-12);
    EXPECT_NEAR(iqp_embed(x, 2).norm(), 1.0, 1e-12);
    EXPECT_NEAR(qaoa_embed(x, qaoa_seeded_params(4, 1, 7), 1).norm(), 1.0, 1e-12);
    auto bits = oracle::random_binary_grid(rng, 1, 4)[0];
    EXPECT_NEAR(basis_embed(bits).norm(), 1.0, 1e-12);
  }
}

TEST(QubitEmbeddings, QubitCapEnforced) {
  std::vector<double> x(21, 0.1);
  EXPECT_THROW(angle_embed(x), ConfigError);
  EXPECT_THROW(Embedder(testing_support::spec(EmbeddingKind::iqp, Granularity::row), 21), ConfigError);
}

TEST(Separability, RowEqualsTensorOfCells) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 100; ++t) {
    auto x = draw(rng, 4);
    std::vector<PureState> cells;
    for (double v : x)
      cells.push_back(angle_embed(std::span<const double>(&v, 1)));
    auto joined = tensor_join(cells);
    auto row = angle_embed(x);
    EXPECT_LE((joined.amplitudes - row.amplitudes).cwiseAbs().maxCoeff(), 1e-12);

    auto bits = oracle::random_binary_grid(rng, 1, 4)[0];
    std::vector<PureState> bcells;
    for (double v : bits)
      bcells.push_back(basis_embed(std::span<const double>(&v, 1)));
    EXPECT_LE((tensor_join(bcells).amplitudes - basis_embed(bits).amplitudes).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TensorJoin, Kronecker) {
  const double z[] = {0}, o[] = {pi}, h[] = {pi / 2};
  std::vector<PureState> a = {angle_embed(z), angle_embed(z)};
  expect_state_near(tensor_join(a), oracle::CVec::Unit(4, 0), 1e-12);
  std::vector<PureState> b = {angle_embed(z), angle_embed(o)};
  expect_state_near(tensor_join(b), oracle::CVec::Unit(4, 1), 1e-12);
  std::vector<PureState> c = {angle_embed(h), angle_embed(h)};
  for (Eigen::Index i = 0; i < 4; ++i)
    EXPECT_NEAR(tensor_join(c).amplitudes(i).real(), 0.5, 1e-12);
  EXPECT_THROW(tensor_join(std::span<const PureState>{}), ValidationError);
}

TEST(Displacement, ClosedForm) {
  const double z[] = {0}, a[] = {1.5}, v[] = {0.2, -0.4};
  auto g0 = displacement_embed(z);
  EXPECT_EQ(g0.mean.norm(), 0.0);
  EXPECT_TRUE(g0.covariance.isIdentity(0));
  auto g1 = displacement_embed(a);
  EXPECT_NEAR(g1.mean(0), 3.0, 1e-12);
  EXPECT_NEAR(g1.mean(1), 0.0, 1e-12);
  auto g2 = displacement_embed(v);
  EXPECT_NEAR(g2.mean(0), 0.4, 1e-12);
  EXPECT_NEAR(g2.mean(2), -0.8, 1e-12);
  EXPECT_TRUE(g2.covariance.isIdentity(0));
}

TEST(Displacement, FockOracle) {
  for (double x : {-1.0, -0.5, 0.0, 0.3, 1.0, 1.5}) {
    const auto m = oracle::quadrature_moments(oracle::displaced_vacuum(x));
    auto g = displacement_embed(std::span<const double>(&x, 1));
    EXPECT_NEAR(g.mean(0), m.mean_x, 1e-6);
    EXPECT_NEAR(g.mean(1), m.mean_p, 1e-6);
    EXPECT_NEAR(g.covariance(0, 0), m.var_x, 1e-6);
    EXPECT_NEAR(g.covariance(1, 1), m.var_p, 1e-6);
  }
}

TEST(Squeezing, ClosedForm) {
  const double r0[] = {0}, r[] = {0.5}, rr[] = {0.5, 0.5};
  EXPECT_TRUE(squeezing_embed(r0).covariance.isIdentity(0));
  auto g = squeezing_embed(r);
  EXPECT_NEAR(g.covariance(0, 0), 0.36787944, 1e-8);
  EXPECT_NEAR(g.covariance(1, 1), 2.71828183, 1e-8);
  EXPECT_NEAR(squeezing_embed(rr).covariance.determinant(), 1.0, 1e-9);
}

TEST(Squeezing, FockOracle) {
  for (double r : {-1.0, -0.6, -0.2, 0.0, 0.25, 0.5, 0.8, 1.0}) {
    const auto psi = oracle::squeezed_vacuum(r);
    const auto [vx, vp] = oracle::squeezed_covariance_from_amplitudes(psi);
    auto g = squeezing_embed(std::span<const double>(&r, 1));
    EXPECT_NEAR(g.covariance(0, 0), vx, 1e-6) << r;
    EXPECT_NEAR(g.covariance(1, 1), vp, 1e-6) << r;
    // the state's own first moments vanish exactly
    const auto m = oracle::quadrature_moments(psi);
    EXPECT_NEAR(m.mean_x, 0.0, 1e-12);
    EXPECT_NEAR(m.mean_p, 0.0, 1e-12);
  }
  // away from the truncation edge the direct second moments agree as well
  for (double r : {-0.3, 0.3}) {
    const auto m = oracle::quadrature_moments(oracle::squeezed_vacuum(r));
    auto g = squeezing_embed(std::span<const double>(&r, 1));
    EXPECT_NEAR(g.covariance(0, 0), m.var_x, 1e-6);
    EXPECT_NEAR(g.covariance(1, 1), m.var_p, 1e-6);
  }
}

TEST(Gaussian, PurityAndJoin) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    auto x = draw(rng, 3, -1, 1);
    EXPECT_NEAR(displacement_embed(x).covariance.determinant(), 1.0, 1e-9);
    EXPECT_NEAR(squeezing_embed(x).covariance.determinant(), 1.0, 1e-9);
  }
  const double a[] = {1.5}, r[] = {0.5};
  std::vector<GaussianState> parts = {displacement_embed(a), squeezing_embed(r)};
  auto j = gaussian_join(parts);
  EXPECT_EQ(j.mode_count, 2);
  EXPECT_NEAR(j.mean(0), 3.0, 1e-12);
  EXPECT_NEAR(j.covariance(2, 2), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(j.covariance(3, 3), std::exp(1.0), 1e-12);
  EXPECT_EQ(j.covariance(0, 2), 0.0);
  std::vector<GaussianState> one = {squeezing_embed(r)};
  EXPECT_EQ(gaussian_join(one).covariance, one[0].covariance);
  EXPECT_THROW(gaussian_join(std::span<const GaussianState>{}), ValidationError);
}

TEST(Embedder, DeterministicAndWidthChecked) {
  Embedder e(testing_support::spec(EmbeddingKind::qaoa, Granularity::row), 3);
  const double x[] = {0.1, 0.2, 0.3};
  auto a = std::get<PureState>(e(x));
  auto b = std::get<PureState>(e(x));
  EXPECT_EQ(a.amplitudes, b.amplitudes);
  const double y[] = {0.1};
  EXPECT_THROW(e(y), ValidationError);
}
