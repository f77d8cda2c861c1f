#include "support.hpp"

#include <gtest/gtest.h>

using namespace qenc;
using testing_support::to_matrix;

TEST(DedupKey, SignedZeroCollapses) { EXPECT_EQ(dedup_key(-0.0), dedup_key(0.0)); }

TEST(DedupKey, Deterministic) {
  EXPECT_EQ(dedup_key(0.2), dedup_key(0.2));
  EXPECT_NE(dedup_key(0.2), dedup_key(0.20000000000000004));
}

TEST(DedupKey, RejectsNonFinite) {
  EXPECT_THROW(dedup_key(std::nan("")), ValidationError);
  EXPECT_THROW(dedup_key(INFINITY), ValidationError);
  try {
    dedup_key(-INFINITY);
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("inf"), std::string::npos);
  }
}

TEST(DedupKey, RoundingPolicyMatchesTextOracle) {
  const auto p = KeyPolicy::rounded(3);
  EXPECT_EQ(dedup_key(0.20004, p), dedup_key(0.19996, p));
  EXPECT_EQ(oracle::round_text(0.20004, 3), oracle::round_text(0.19996, 3));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  int checked = 0;
  for (int t = 0; t < 20000; ++t) {
    const double a = u(rng);
    const double b = a + u(rng) * 1e-3;
    // skip pairs sitting next to a rounding boundary, where binary and
    // decimal rounding may legitimately disagree
    auto near_half = [](double v) {
      const double s = v * 1000.0;
      return std::abs(s - std::floor(s) - 0.5) < 1e-6;
    };
    if (near_half(a) || near_half(b))
      continue;
    const bool same_text = oracle::round_text(a, 3) == oracle::round_text(b, 3);
    EXPECT_EQ(dedup_key(a, p) == dedup_key(b, p), same_text) << a << " " << b;
    ++checked;
  }
  EXPECT_GT(checked, 19000);
}

TEST(RowKey, WorkedRows) {
  const double r1[] = {0.2, 0.4, 0.6}, r2[] = {0.2, 0.4, 0.6}, r3[] = {0.9, 0.1, 0.3};
  EXPECT_EQ(row_key(r1), row_key(r2));
  EXPECT_NE(row_key(r1), row_key(r3));
  EXPECT_EQ(row_key(std::span<const double>{}), row_key(std::span<const double>{}));
}

TEST(RowKey, EqualIffCellsEqual) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    auto g = oracle::random_grid(rng, 2, 3, 2);
    const bool rows_equal = row_key(g[0]) == row_key(g[1]);
    bool cells_equal = true;
    for (int j = 0; j < 3; ++j)
      cells_equal = cells_equal && dedup_key(g[0][j]) == dedup_key(g[1][j]);
    EXPECT_EQ(rows_equal, cells_equal);
  }
}

TEST(FeatureMatrix, ValidateCatchesBadInput) {
  auto m = to_matrix({{1.0, 2.0}, {3.0, 4.0}}, std::vector<int>{0, 1});
  EXPECT_NO_THROW(m.validate());
  m.values(1, 1) = std::nan("");
  EXPECT_THROW(m.validate(), ValidationError);
  auto short_labels = to_matrix({{1.0}, {2.0}}, std::vector<int>{0});
  EXPECT_THROW(short_labels.validate(), ValidationError);
  auto negative = to_matrix({{1.0}}, std::vector<int>{-1});
  EXPECT_THROW(negative.validate(), ValidationError);
}

TEST(FeatureMatrix, SelectRowsCarriesLabels) {
  auto m = to_matrix({{1}, {2}, {3}}, std::vector<int>{0, 1, 0});
  const std::size_t idx[] = {2, 1};
  auto s = m.select_rows(idx);
  EXPECT_EQ(s.values(0, 0), 3);
  EXPECT_EQ((*s.labels)[1], 1);
}

TEST(Enums, ParseAndCompatibility) {
  EXPECT_EQ(parse_strategy("CC-ILS"), StrategyKind::CC_ILS);
  EXPECT_EQ(parse_strategy("GDS"), StrategyKind::GDS);
  EXPECT_THROW(parse_strategy("XYZ"), ConfigError);
  EXPECT_THROW(check_compatible(StrategyKind::ILS, Granularity::cell), ConfigError);
  EXPECT_THROW(check_compatible(StrategyKind::GDS, Granularity::row), ConfigError);
  EXPECT_NO_THROW(check_compatible(StrategyKind::DE, Granularity::row));
  EXPECT_TRUE(is_class_conditional(StrategyKind::CC_GDS));
  for (auto k : kAllEmbeddings)
    EXPECT_EQ(parse_embedding_kind(to_string(k)), k);
}
