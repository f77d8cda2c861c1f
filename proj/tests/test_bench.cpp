#include "support.hpp"

#include <gtest/gtest.h>

using namespace qenc;
using testing_support::scratch;
using testing_support::slurp;
using testing_support::to_matrix;

namespace {

ExperimentConfig matrix_config(const FeatureMatrix& m, const std::string& dir_name,
                               std::vector<EmbeddingKind> kinds, std::vector<StrategyKind> strategies) {
  auto dir = scratch(dir_name);
  const auto path = (dir / "matrix.csv").string();
  csv::write_file(path, csv::format_matrix(m));
  ExperimentConfig c = default_config();
  c.input_path = path;
  c.preprocess_enabled = false;
  c.output_dir = (dir / "out").string();
  c.embeddings.clear();
  for (auto k : kinds) {
    EmbeddingEntry e;
    e.name = std::string(to_string(k));
    e.spec.kind = k;
    c.embeddings.push_back(e);
  }
  c.strategies = std::move(strategies);
  return c;
}

ExperimentConfig synthetic_config(std::size_t rows, std::vector<EmbeddingKind> kinds,
                                  std::vector<StrategyKind> strategies) {
  ExperimentConfig c = default_config();
  c.synthetic.rows = rows;
  c.embeddings.clear();
  for (auto k : kinds) {
    EmbeddingEntry e;
    e.name = std::string(to_string(k));
    e.spec.kind = k;
    c.embeddings.push_back(e);
  }
  c.strategies = std::move(strategies);
  return c;
}

const GridCellResult& find_cell(const BenchReport& r, StrategyKind s, Granularity g) {
  for (const auto& c : r.cells)
    if (c.strategy == s && c.granularity == g)
      return c;
  throw std::runtime_error("cell not found");
}

} // namespace

TEST(Config, DefaultsRoundTripThroughJson) {
  auto c = default_config();
  auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_json(json{{"sed", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"encoding", {{"thread", 2}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"embeddings":[{"kind":"angle","layer":2}]})")), ConfigError);
}

TEST(Config, EmptyStrategiesRejected) {
  EXPECT_THROW(config_from_json(json{{"strategies", json::array()}}), ConfigError);
}

TEST(Config, IncompatibleFixedGranularityRejected) {
  auto j = json::parse(R"({"embeddings":[{"kind":"angle","granularity":"cell"}],"strategies":["DE","ILS"]})");
  try {
    config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ILS"), std::string::npos) << e.what();
  }
}

TEST(Config, OverridesApplyAfterFile) {
  json doc = json::parse(R"({"seed": 1, "embeddings": ["angle", "squeezing"]})");
  apply_override(doc, "seed=7");
  apply_override(doc, "encoding.call_delay_us=25");
  apply_override(doc, "output_dir=some/where");
  apply_override(doc, "embeddings.1=displacement");
  auto c = config_from_json(doc);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.call_delay_us, 25);
  EXPECT_EQ(c.output_dir, "some/where");
  EXPECT_EQ(c.embeddings[1].spec.kind, EmbeddingKind::displacement);
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(doc, "embeddings.9=angle"), ConfigError);
}

TEST(Config, HashIgnoresOutputDirOnly) {
  auto a = default_config();
  auto b = a;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 43;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Grid, OrderAndAutoGranularity) {
  auto c = default_config();
  c.embeddings.resize(2); // basis, angle
  c.strategies = {StrategyKind::GDS, StrategyKind::DE, StrategyKind::ILS};
  auto g = expand_grid(c);
  ASSERT_EQ(g.size(), 8u);
  // per embedding: DE cell, DE row, ILS row, GDS cell
  const StrategyKind want[] = {StrategyKind::DE, StrategyKind::DE, StrategyKind::ILS, StrategyKind::GDS};
  const Granularity gran[] = {Granularity::cell, Granularity::row, Granularity::row, Granularity::cell};
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(g[i].embedding, i < 4 ? "basis" : "angle");
    EXPECT_EQ(g[i].strategy, want[i % 4]);
    EXPECT_EQ(g[i].spec.granularity, gran[i % 4]);
  }
  c.strategies = {StrategyKind::DE};
  EXPECT_EQ(expand_grid(c).size(), 2u);
}

TEST(Bench, WorkedMatrixCounts) {
  auto m = to_matrix(testing_support::gds_example(), std::vector<int>{0, 1, 0, 1});
  auto c = matrix_config(m, "bench-worked", {EmbeddingKind::angle}, {StrategyKind::DE, StrategyKind::GDS});
  auto r = run_experiment(c);
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_EQ(r.cells[0].strategy, StrategyKind::DE);
  EXPECT_EQ(r.cells[0].stats.embed_calls, 12u);
  EXPECT_EQ(r.cells[1].strategy, StrategyKind::GDS);
  EXPECT_EQ(r.cells[1].stats.embed_calls, 6u);
  EXPECT_EQ(r.cells[1].stats.cache_hits, 6u);
  for (const auto& cell : r.cells) {
    EXPECT_TRUE(cell.ok);
    EXPECT_EQ(cell.classifiers.size(), 4u);
  }
}

TEST(Bench, StatsMatchStrategyCounters) {
  std::mt19937_64 rng(3);
  auto m = to_matrix(oracle::random_grid(rng, 60, 4, 5), oracle::random_labels(rng, 60));
  auto c = matrix_config(m, "bench-fidelity", {EmbeddingKind::angle}, std::vector<StrategyKind>(std::begin(kAllStrategies), std::end(kAllStrategies)));
  auto r = run_experiment(c);
  auto data = prepare_data(c);
  for (const auto& cell : r.cells) {
    EmbeddingSpec s;
    s.kind = cell.kind;
    s.granularity = cell.granularity;
    auto e = encode(data.full, s, cell.strategy);
    EXPECT_TRUE(e.stats.same_counts(cell.stats)) << to_string(cell.strategy);
  }
}

TEST(Bench, SqueezingOnChurnCloneReportsEveryClassifier) {
  auto c = synthetic_config(600, {EmbeddingKind::squeezing},
                            {StrategyKind::DE, StrategyKind::ILS, StrategyKind::GDS, StrategyKind::CC_ILS});
  auto r = run_experiment(c);
  // DE runs at both granularities so each strategy has a matching baseline
  ASSERT_EQ(r.cells.size(), 5u);
  std::set<StrategyKind> seen;
  for (const auto& cell : r.cells) {
    seen.insert(cell.strategy);
    EXPECT_TRUE(cell.ok) << cell.reason;
    ASSERT_EQ(cell.classifiers.size(), 4u);
    for (const auto& k : cell.classifiers)
      EXPECT_TRUE(k.accuracy.has_value()) << k.name << ": " << k.error;
  }
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_GT(find_cell(r, StrategyKind::CC_ILS, Granularity::row).per_class.size(), 1u);
}

TEST(Bench, FailedCellKeepsOthersRunning) {
  // 21 qubits exceeds the simulator cap for row-level angle encoding
  std::mt19937_64 rng(4);
  auto m = to_matrix(oracle::random_grid(rng, 6, 21, 3), oracle::random_labels(rng, 6));
  auto c = matrix_config(m, "bench-failed", {EmbeddingKind::angle},
                         {StrategyKind::DE, StrategyKind::ILS, StrategyKind::GDS});
  auto r = run_experiment(c);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_TRUE(find_cell(r, StrategyKind::DE, Granularity::cell).ok);
  EXPECT_TRUE(find_cell(r, StrategyKind::GDS, Granularity::cell).ok);
  EXPECT_FALSE(find_cell(r, StrategyKind::DE, Granularity::row).ok);
  const auto& bad = find_cell(r, StrategyKind::ILS, Granularity::row);
  EXPECT_FALSE(bad.ok);
  EXPECT_FALSE(bad.reason.empty());
  EXPECT_NE(format_report_table(r).find("FAILED"), std::string::npos);
}

TEST(Report, OneCellTable) {
  BenchReport r;
  r.config_hash = "0123456789abcdef";
  r.classifier_names = {"logreg"};
  GridCellResult cell;
  cell.embedding = "angle";
  cell.classifiers = {{"logreg", 0.75, {}}};
  r.cells.push_back(cell);
  auto t = format_report_table(r);
  std::istringstream in(t);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line))
    lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u); // banner, header, rule, one data row
  EXPECT_EQ(lines[2].find_first_not_of('-'), std::string::npos);
  EXPECT_NE(lines[3].find("0.7500"), std::string::npos);
}

TEST(Report, DelayIsLabelled) {
  BenchReport r;
  r.call_delay_us = 50;
  EXPECT_NE(format_report_table(r).find("artificial call delay 50us"), std::string::npos);
}

TEST(Report, EmitIsByteIdenticalAndRoundTrips) {
  auto c = synthetic_config(300, {EmbeddingKind::angle, EmbeddingKind::displacement},
                            {StrategyKind::DE, StrategyKind::GDS, StrategyKind::CC_GDS});
  auto r = run_experiment(c);
  const ReportFormat all[] = {ReportFormat::table, ReportFormat::csv, ReportFormat::jsonl};
  auto d1 = scratch("emit-1"), d2 = scratch("emit-2");
  auto p1 = emit_report(r, d1.string(), all);
  auto p2 = emit_report(r, d2.string(), all);
  ASSERT_EQ(p1.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(std::filesystem::path(p1[i]).filename().string(), r.config_hash + "." + std::string(to_string(all[i])));
    EXPECT_EQ(slurp(p1[i]), slurp(p2[i]));
  }
  EXPECT_TRUE(read_report(p1[1]).same_content(r));
  EXPECT_TRUE(read_report(p1[2]).same_content(r));
  EXPECT_TRUE(std::filesystem::exists(d1 / (r.config_hash + ".timing.csv")));

  // a second run differs only in timing
  auto again = run_experiment(c);
  EXPECT_EQ(format_report_csv(again), format_report_csv(r));
  EXPECT_EQ(format_report_jsonl(again), format_report_jsonl(r));
}

TEST(Report, RoundTripKeepsErrorsAndMissingAccuracies) {
  BenchReport r;
  r.config_hash = "00000000000000aa";
  r.seed = 5;
  r.classifier_names = {"logreg", "knn"};
  GridCellResult a;
  a.embedding = "emb, \"quoted\"";
  a.strategy = StrategyKind::CC_GDS;
  a.stats.embed_calls = 3;
  a.per_class = {{0, 2, 1, 3}, {1, 1, 0, 1}};
  a.classifiers = {{"logreg", 0.1 + 0.2, {}}, {"knn", std::nullopt, "k exceeds rows"}};
  GridCellResult b;
  b.ok = false;
  b.reason = "boom";
  b.classifiers = {{"logreg", std::nullopt, "cell failed"}, {"knn", std::nullopt, "cell failed"}};
  r.cells = {a, b};
  EXPECT_TRUE(parse_report_csv(format_report_csv(r)).same_content(r));
  EXPECT_TRUE(parse_report_jsonl(format_report_jsonl(r)).same_content(r));
}

TEST(Report, UnwritableDirectory) {
  BenchReport r;
  const ReportFormat f[] = {ReportFormat::csv};
  auto d = scratch("unwritable");
  csv::write_file((d / "file").string(), "x");
  EXPECT_THROW(emit_report(r, (d / "file" / "sub").string(), f), IoError);
}

TEST(Compare, SeparableEmbeddingHasZeroDeltas) {
  auto c = synthetic_config(400, {EmbeddingKind::angle},
                            std::vector<StrategyKind>(std::begin(kAllStrategies), std::end(kAllStrategies)));
  auto s = compare_strategies(run_experiment(c));
  EXPECT_EQ(s.rows.size(), 4u * 4u);
  for (const auto& d : s.rows)
    EXPECT_EQ(d.delta, 0.0) << d.classifier << " " << to_string(d.strategy);
  EXPECT_EQ(s.flagged, 0u);
}

TEST(Compare, TenfoldRedundancyGivesTenfoldReduction) {
  // m = 0.1 n d distinct values
  const std::size_t n = 100, d = 5;
  oracle::Grid g(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      g[i][j] = 0.01 * static_cast<double>((i * d + j) % 50);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = static_cast<int>(i % 2);
  auto c = matrix_config(to_matrix(g, y), "bench-tenfold", {EmbeddingKind::angle},
                         {StrategyKind::DE, StrategyKind::GDS});
  auto s = compare_strategies(run_experiment(c));
  ASSERT_FALSE(s.rows.empty());
  for (const auto& row : s.rows)
    EXPECT_DOUBLE_EQ(row.call_reduction, 10.0);
}

TEST(Compare, DeOnlyGivesEmptyTable) {
  auto m = to_matrix(testing_support::gds_example(), std::vector<int>{0, 1, 0, 1});
  auto c = matrix_config(m, "bench-deonly", {EmbeddingKind::angle}, {StrategyKind::DE});
  EXPECT_TRUE(compare_strategies(run_experiment(c)).rows.empty());
}

TEST(Compare, MissingBaselineIsAnError) {
  BenchReport r;
  GridCellResult cell;
  cell.embedding = "angle";
  cell.strategy = StrategyKind::GDS;
  r.cells.push_back(cell);
  EXPECT_THROW(compare_strategies(r), ConfigError);
}

TEST(Compare, FlagsLargeDeltas) {
  BenchReport r;
  GridCellResult de, gds;
  de.embedding = gds.embedding = "angle";
  gds.strategy = StrategyKind::GDS;
  de.stats.embed_calls = 10;
  gds.stats.embed_calls = 5;
  de.classifiers = {{"logreg", 0.80, {}}};
  gds.classifiers = {{"logreg", 0.75, {}}};
  r.cells = {de, gds};
  auto s = compare_strategies(r, 0.02);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_TRUE(s.rows[0].flagged);
  EXPECT_EQ(s.flagged, 1u);
  EXPECT_DOUBLE_EQ(s.rows[0].call_reduction, 2.0);
}

TEST(Properties, CostOrderingOnRedundantData) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 10 + rng() % 60, d = 1 + rng() % 5;
    auto m = to_matrix(oracle::random_grid(rng, n, d, 2 + rng() % 6), oracle::random_labels(rng, n));
    for (auto k : {EmbeddingKind::angle, EmbeddingKind::displacement}) {
      EmbeddingSpec cell, row;
      cell.kind = row.kind = k;
      row.granularity = Granularity::row;
      const auto de_cell = encode(m, cell, StrategyKind::DE).stats.embed_calls;
      const auto de_row = encode(m, row, StrategyKind::DE).stats.embed_calls;
      const auto gds = encode(m, cell, StrategyKind::GDS).stats.embed_calls;
      const auto ccgds = encode(m, cell, StrategyKind::CC_GDS).stats.embed_calls;
      const auto ils = encode(m, row, StrategyKind::ILS).stats.embed_calls;
      EXPECT_LE(gds, ccgds);
      EXPECT_LE(ccgds, de_cell);
      EXPECT_LE(ils, de_row);
    }
  }
}
