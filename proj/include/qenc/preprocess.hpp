#pragma once

// Classical tabular pipeline ahead of encoding:
//   CSV -> one-hot -> correlation filter -> VIF filter -> class balancing
//       -> PCA (elbow-selected width) -> min-max scaling

#include "qenc/core.hpp"
#include "qenc/csv.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

namespace qenc {

// ---------------------------------------------------------------------------
// Raw tables

enum class ColumnKind { categorical, numeric };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  std::vector<std::string> text; // categorical values
  std::vector<double> numbers;   // numeric values
};

struct RawTable {
  std::vector<Column> columns;
  std::size_t row_count = 0;
  std::size_t dropped_rows = 0;
  std::vector<std::string> warnings;

  const Column& column(std::string_view name) const {
    for (const auto& c : columns)
      if (c.name == name)
        return c;
    throw ValidationError("no column named '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    return std::any_of(columns.begin(), columns.end(), [&](const Column& c) { return c.name == name; });
  }
};

/// Declared column kinds; undeclared columns are inferred (numeric when
/// every non-blank cell parses as a finite number).
using CsvSchema = std::map<std::string, ColumnKind, std::less<>>;

inline RawTable parse_table(std::string_view text, const CsvSchema& schema = {}) {
  auto records = csv::parse(text);
  if (records.empty())
    throw ValidationError("CSV input has no header row");
  const csv::Record header = records.front();
  {
    std::set<std::string> seen;
    for (const auto& h : header) {
      if (csv::is_blank(h))
        throw ValidationError("malformed CSV header: empty column name");
      if (!seen.insert(h).second)
        throw ValidationError("malformed CSV header: duplicate column '" + h + "'");
    }
  }
  for (const auto& [name, kind] : schema)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw ValidationError("schema names column '" + name + "' which the CSV header lacks");

  RawTable t;
  std::vector<std::size_t> line_of; // 1-based record number, header = 1
  std::vector<const csv::Record*> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      ++t.dropped_rows;
      t.warnings.push_back("line " + std::to_string(r + 1) + ": " + std::to_string(records[r].size()) +
                           " fields, expected " + std::to_string(header.size()) + "; row dropped");
      continue;
    }
    rows.push_back(&records[r]);
    line_of.push_back(r + 1);
  }

  const std::size_t d = header.size();
  std::vector<ColumnKind> kinds(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (auto it = schema.find(header[j]); it != schema.end()) {
      kinds[j] = it->second;
      continue;
    }
    bool numeric = false;
    bool all_parse = true;
    for (const auto* rec : rows) {
      const auto& cell = (*rec)[j];
      if (csv::is_blank(cell))
        continue;
      if (csv::parse_number(cell))
        numeric = true;
      else {
        all_parse = false;
        break;
      }
    }
    kinds[j] = numeric && all_parse ? ColumnKind::numeric : ColumnKind::categorical;
  }

  // declared-numeric parse failures are errors; blank numeric cells drop the row
  std::vector<std::string> failures;
  std::vector<bool> keep(rows.size(), true);
  for (std::size_t j = 0; j < d; ++j) {
    if (kinds[j] != ColumnKind::numeric)
      continue;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& cell = (*rows[r])[j];
      if (csv::is_blank(cell))
        keep[r] = false;
      else if (!csv::parse_number(cell))
        failures.push_back("line " + std::to_string(line_of[r]) + " column '" + header[j] + "': '" + cell + "'");
    }
  }
  if (!failures.empty()) {
    std::string msg = "numeric parse failures:";
    for (std::size_t k = 0; k < failures.size() && k < 10; ++k)
      msg += "\n  " + failures[k];
    if (failures.size() > 10)
      msg += "\n  ... and " + std::to_string(failures.size() - 10) + " more";
    throw ValidationError(msg);
  }

  for (std::size_t j = 0; j < d; ++j) {
    Column c;
    c.name = header[j];
    c.kind = kinds[j];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!keep[r])
        continue;
      const auto& cell = (*rows[r])[j];
      if (c.kind == ColumnKind::numeric)
        c.numbers.push_back(*csv::parse_number(cell));
      else
        c.text.push_back(cell);
    }
    t.columns.push_back(std::move(c));
  }
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (!keep[r]) {
      ++t.dropped_rows;
      t.warnings.push_back("line " + std::to_string(line_of[r]) + ": blank numeric cell; row dropped");
    } else {
      ++t.row_count;
    }
  if (t.row_count == 0)
    throw ValidationError("CSV input has zero usable data rows");
  return t;
}

inline RawTable load_csv(const std::string& path, const CsvSchema& schema = {}) {
  return parse_table(csv::read_file(path), schema);
}

// ---------------------------------------------------------------------------
// One-hot expansion

struct OneHotResult {
  FeatureMatrix matrix;
  std::vector<std::string> label_levels; // index = label id
  std::vector<std::string> warnings;
};

/// Every categorical column with k levels becomes k indicator columns named
/// `column=level` (levels sorted); numeric columns pass through. The target
/// becomes labels 0, 1, ... in first-appearance order.
inline OneHotResult one_hot(const RawTable& t, std::string_view target,
                            std::span<const std::string> exclude = {}) {
  const Column& tc = t.column(target);
  for (const auto& e : exclude)
    if (!t.has_column(e))
      throw ValidationError("drop list names unknown column '" + e + "'");

  OneHotResult res;
  Labels labels;
  labels.reserve(t.row_count);
  {
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < t.row_count; ++i) {
      std::string key = tc.kind == ColumnKind::numeric ? csv::format_number(tc.numbers[i]) : tc.text[i];
      auto [it, fresh] = ids.try_emplace(key, static_cast<int>(res.label_levels.size()));
      if (fresh)
        res.label_levels.push_back(key);
      labels.push_back(it->second);
    }
  }
  if (res.label_levels.size() < 2)
    throw ValidationError("target column '" + std::string(target) + "' needs at least two levels");

  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;
  for (const auto& c : t.columns) {
    if (c.name == target || std::find(exclude.begin(), exclude.end(), c.name) != exclude.end())
      continue;
    if (c.kind == ColumnKind::numeric) {
      cols.push_back(c.numbers);
      names.push_back(c.name);
      continue;
    }
    std::set<std::string> levels(c.text.begin(), c.text.end());
    if (levels.size() == 1)
      res.warnings.push_back("categorical column '" + c.name + "' is constant; single indicator emitted");
    for (const auto& level : levels) {
      std::vector<double> ind(t.row_count);
      for (std::size_t i = 0; i < t.row_count; ++i)
        ind[i] = c.text[i] == level ? 1.0 : 0.0;
      cols.push_back(std::move(ind));
      names.push_back(c.name + "=" + level);
    }
  }

  Matrix v(static_cast<Eigen::Index>(t.row_count), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < t.row_count; ++i)
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  res.matrix = FeatureMatrix(std::move(v), std::move(labels), std::move(names));
  return res;
}

// ---------------------------------------------------------------------------
// Collinearity filters

struct FilterResult {
  FeatureMatrix matrix;
  std::vector<std::string> dropped;
};

inline std::vector<std::size_t> zero_variance_columns(const FeatureMatrix& m) {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
    auto col = m.values.col(j);
    if (m.rows() == 0 || (col.array() == col(0)).all())
      out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

/// Pearson correlations; zero-variance columns correlate 0 with everything
/// else (diagonal stays 1).
inline Eigen::MatrixXd correlation_matrix(const FeatureMatrix& m) {
  if (m.rows() < 2)
    throw ValidationError("correlation needs at least two rows");
  Eigen::MatrixXd centered = m.values.rowwise() - m.values.colwise().mean();
  Eigen::VectorXd sd = centered.colwise().norm();
  const auto d = static_cast<Eigen::Index>(m.cols());
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) {
      double v = 0;
      if (sd(a) > 0 && sd(b) > 0)
        v = std::clamp(centered.col(a).dot(centered.col(b)) / (sd(a) * sd(b)), -1.0, 1.0);
      r(a, b) = r(b, a) = v;
    }
  return r;
}

/// Drops the later column of every pair whose |r| exceeds `threshold`,
/// scanning columns in order against the ones already kept.
inline FilterResult drop_correlated(const FeatureMatrix& m, double threshold) {
  const Eigen::MatrixXd r = correlation_matrix(m);
  std::vector<std::size_t> kept;
  FilterResult res;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    bool drop = false;
    for (std::size_t k : kept)
      if (std::abs(r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))) > threshold) {
        drop = true;
        break;
      }
    if (drop)
      res.dropped.push_back(m.column_names[j]);
    else
      kept.push_back(j);
  }
  res.matrix = m.select_cols(kept);
  return res;
}

/// VIF_j = 1 / (1 - R^2_j), R^2_j from regressing column j on the others
/// with an intercept. Exact collinearity (and constant columns) report +inf.
inline std::vector<double> vif_scores(const FeatureMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const auto d = static_cast<Eigen::Index>(m.cols());
  if (n <= d)
    throw ValidationError("VIF needs more rows than columns (" + std::to_string(n) + " <= " + std::to_string(d) +
                          "); reduce dimensionality first");
  // work on standardized columns so the collinearity cutoff is scale free
  Eigen::MatrixXd z = m.values.rowwise() - m.values.colwise().mean();
  Eigen::VectorXd norms = z.colwise().norm();
  for (Eigen::Index j = 0; j < d; ++j)
    if (norms(j) > 0)
      z.col(j) /= norms(j);
  const Eigen::MatrixXd gram = z.transpose() * z;

  constexpr double kCollinear = 1e-10;
  std::vector<double> out(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    if (norms(j) == 0) {
      out[static_cast<std::size_t>(j)] = std::numeric_limits<double>::infinity();
      continue;
    }
    if (d == 1) {
      out[0] = 1.0;
      continue;
    }
    std::vector<Eigen::Index> others;
    for (Eigen::Index k = 0; k < d; ++k)
      if (k != j && norms(k) > 0)
        others.push_back(k);
    if (others.empty()) {
      out[static_cast<std::size_t>(j)] = 1.0;
      continue;
    }
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(others.size()), static_cast<Eigen::Index>(others.size()));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(others.size()));
    for (std::size_t a = 0; a < others.size(); ++a) {
      rhs(static_cast<Eigen::Index>(a)) = gram(others[a], j);
      for (std::size_t b = 0; b < others.size(); ++b)
        sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = gram(others[a], others[b]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(1e-12);
    const Eigen::VectorXd beta = qr.solve(rhs);
    const double residual = std::max(0.0, 1.0 - rhs.dot(beta)); // = 1 - R^2 on unit-norm columns
    out[static_cast<std::size_t>(j)] =
        residual < kCollinear ? std::numeric_limits<double>::infinity() : 1.0 / residual;
  }
  return out;
}

/// Repeatedly removes the highest-VIF column (ties: the later column) until
/// every VIF is at most `threshold`.
inline FilterResult vif_filter(const FeatureMatrix& m, double threshold = 5.0) {
  FilterResult res{m, {}};
  while (res.matrix.cols() > 1) {
    auto scores = vif_scores(res.matrix);
    std::size_t worst = 0;
    for (std::size_t j = 1; j < scores.size(); ++j)
      if (scores[j] >= scores[worst])
        worst = j;
    if (scores[worst] <= threshold)
      break;
    res.dropped.push_back(res.matrix.column_names[worst]);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < res.matrix.cols(); ++j)
      if (j != worst)
        keep.push_back(j);
    res.matrix = res.matrix.select_cols(keep);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Class balancing

/// Keeps every minority row and a seeded sample (without replacement) of the
/// majority class of equal size. Output keeps the original row order.
inline FeatureMatrix undersample_balance(const FeatureMatrix& m, std::uint64_t seed) {
  if (!m.labels)
    throw ValidationError("undersampling needs labels");
  auto classes = m.distinct_labels();
  if (classes.size() != 2)
    throw ValidationError("undersampling needs exactly two classes, found " + std::to_string(classes.size()));
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < m.rows(); ++i)
    members[(*m.labels)[i] == classes[0] ? 0 : 1].push_back(i);
  const std::size_t minority = members[0].size() <= members[1].size() ? 0 : 1;
  const std::size_t target = members[minority].size();
  std::vector<std::size_t> chosen = members[minority];
  std::vector<std::size_t> pool = members[1 - minority];
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t k = 0; k < target; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(target));
  std::sort(chosen.begin(), chosen.end());
  return m.select_rows(chosen);
}

// ---------------------------------------------------------------------------
// Scaling

/// Per-column affine map onto [lo, hi]; constant columns go to the midpoint.
/// Values outside the fitted range are clamped.
struct MinMaxScaler {
  double lo = 0.0;
  double hi = std::numbers::pi;
  Vector mins;
  Vector maxs;

  static MinMaxScaler fit(const FeatureMatrix& m, double lo = 0.0, double hi = std::numbers::pi) {
    if (!(lo < hi))
      throw ConfigError("min-max target interval must satisfy lo < hi");
    MinMaxScaler s{lo, hi, Vector(m.values.cols()), Vector(m.values.cols())};
    if (m.rows() == 0)
      throw ValidationError("cannot fit a scaler on an empty matrix");
    s.mins = m.values.colwise().minCoeff().transpose();
    s.maxs = m.values.colwise().maxCoeff().transpose();
    return s;
  }

  FeatureMatrix transform(const FeatureMatrix& m) const {
    check_width(m);
    FeatureMatrix out = m;
    const double mid = 0.5 * (lo + hi);
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      const double span = maxs(j) - mins(j);
      for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        double& v = out.values(i, j);
        v = span > 0 ? lo + (std::clamp(v, mins(j), maxs(j)) - mins(j)) / span * (hi - lo) : mid;
      }
    }
    return out;
  }

  FeatureMatrix inverse(const FeatureMatrix& m) const {
    check_width(m);
    FeatureMatrix out = m;
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      const double span = maxs(j) - mins(j);
      for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        double& v = out.values(i, j);
        v = span > 0 ? mins(j) + (v - lo) / (hi - lo) * span : mins(j);
      }
    }
    return out;
  }

private:
  void check_width(const FeatureMatrix& m) const {
    if (m.values.cols() != mins.size())
      throw ValidationError("scaler fitted on " + std::to_string(mins.size()) + " columns, got " +
                            std::to_string(m.cols()));
  }
};

inline std::pair<FeatureMatrix, MinMaxScaler> min_max_scale(const FeatureMatrix& m, double lo = 0.0,
                                                            double hi = std::numbers::pi) {
  auto s = MinMaxScaler::fit(m, lo, hi);
  return {s.transform(m), s};
}

/// Threshold binarization: value > threshold -> 1, else 0.
struct Binarizer {
  Vector thresholds;

  static Binarizer fit_median(const FeatureMatrix& m) {
    Binarizer b{Vector(m.values.cols())};
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      std::vector<double> col(m.values.col(j).begin(), m.values.col(j).end());
      if (col.empty())
        throw ValidationError("cannot binarize an empty matrix");
      std::sort(col.begin(), col.end());
      const std::size_t h = col.size() / 2;
      b.thresholds(j) = col.size() % 2 ? col[h] : 0.5 * (col[h - 1] + col[h]);
    }
    return b;
  }

  static Binarizer fixed(std::size_t d, double threshold) {
    return Binarizer{Vector::Constant(static_cast<Eigen::Index>(d), threshold)};
  }

  FeatureMatrix transform(const FeatureMatrix& m) const {
    if (m.values.cols() != thresholds.size())
      throw ValidationError("binarizer width mismatch");
    FeatureMatrix out = m;
    for (Eigen::Index i = 0; i < m.values.rows(); ++i)
      for (Eigen::Index j = 0; j < m.values.cols(); ++j)
        out.values(i, j) = m.values(i, j) > thresholds(j) ? 1.0 : 0.0;
    return out;
  }
};

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Eigen::MatrixXd components; // d x k, orthonormal columns
  Vector column_means;
  Vector singular_values;                     // all min(n, d)
  std::vector<double> explained_variance_ratio; // all min(n, d), non-increasing

  std::size_t k() const { return static_cast<std::size_t>(components.cols()); }
};

/// Top-k right singular vectors of the centered matrix. Each component is
/// signed so that its largest-magnitude entry is positive.
inline PcaModel pca_fit(const FeatureMatrix& m, std::size_t k) {
  const std::size_t r = std::min(m.rows(), m.cols());
  if (k < 1 || k > r)
    throw ValidationError("PCA component count " + std::to_string(k) + " outside [1, " + std::to_string(r) + "]");
  PcaModel model;
  model.column_means = m.values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.values.rowwise() - model.column_means.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  model.singular_values = svd.singularValues();
  const double total = model.singular_values.squaredNorm();
  if (!(total > 0))
    throw ValidationError("PCA on a matrix with zero variance");
  for (Eigen::Index i = 0; i < model.singular_values.size(); ++i)
    model.explained_variance_ratio.push_back(model.singular_values(i) * model.singular_values(i) / total);
  model.components = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index c = 0; c < model.components.cols(); ++c) {
    Eigen::Index at = 0;
    model.components.col(c).cwiseAbs().maxCoeff(&at);
    if (model.components(at, c) < 0)
      model.components.col(c) *= -1.0;
  }
  return model;
}

inline FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& m) {
  if (m.values.cols() != model.column_means.size())
    throw ValidationError("PCA fitted on " + std::to_string(model.column_means.size()) + " columns, got " +
                          std::to_string(m.cols()));
  Matrix scores = (m.values.rowwise() - model.column_means.transpose()) * model.components;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < model.k(); ++c)
    names.push_back("pc" + std::to_string(c));
  return FeatureMatrix(std::move(scores), m.labels, std::move(names));
}

/// Index of the point on the cumulative ratio curve farthest from the chord
/// through its first and last points; ties go to the smallest index.
inline std::size_t detect_elbow(std::span<const double> ratios) {
  if (ratios.size() < 3)
    throw ValidationError("elbow detection needs at least 3 ratios");
  std::vector<double> cum(ratios.size());
  std::partial_sum(ratios.begin(), ratios.end(), cum.begin());
  const double x1 = 0, y1 = cum.front();
  const double x2 = static_cast<double>(cum.size() - 1), y2 = cum.back();
  const double len = std::hypot(x2 - x1, y2 - y1);
  std::size_t best = 0;
  double best_dist = -1;
  for (std::size_t i = 0; i < cum.size(); ++i) {
    const double x = static_cast<double>(i);
    const double dist = std::abs((y2 - y1) * x - (x2 - x1) * cum[i] + x2 * y1 - y2 * x1) / len;
    if (dist > best_dist + 1e-12) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PreprocessConfig {
  std::string target = "Churn";
  std::vector<std::string> drop_columns = {"customerID", "TotalCharges", "PhoneService", "MonthlyCharges"};
  std::vector<std::string> categorical_columns = {"SeniorCitizen"};
  std::optional<double> correlation_threshold = 0.8;
  std::optional<double> vif_threshold = 5.0;
  bool balance = true;
  bool pca = true;
  std::size_t pca_components = 0; // 0: elbow
  std::size_t max_components = 0; // 0: no cap
  double scale_lo = 0.0;
  double scale_hi = std::numbers::pi;
};

struct PreprocessSummary {
  std::size_t rows_loaded = 0;
  std::size_t rows_dropped = 0;
  std::size_t one_hot_columns = 0;
  std::vector<std::string> correlation_dropped;
  std::vector<std::string> vif_dropped;
  std::size_t rows_after_balance = 0;
  std::optional<std::size_t> elbow_index;
  std::size_t components = 0;
  std::vector<std::string> warnings;
};

inline CsvSchema schema_for(const PreprocessConfig& cfg) {
  CsvSchema s;
  for (const auto& c : cfg.categorical_columns)
    s[c] = ColumnKind::categorical;
  return s;
}

/// one-hot -> filters -> balance; everything that is fitted without a split.
inline FeatureMatrix prepare_features(const RawTable& t, const PreprocessConfig& cfg, std::uint64_t seed,
                                      PreprocessSummary& summary) {
  summary.rows_loaded = t.row_count;
  summary.rows_dropped = t.dropped_rows;
  summary.warnings = t.warnings;
  auto oh = one_hot(t, cfg.target, cfg.drop_columns);
  summary.one_hot_columns = oh.matrix.cols();
  summary.warnings.insert(summary.warnings.end(), oh.warnings.begin(), oh.warnings.end());
  FeatureMatrix m = std::move(oh.matrix);
  if (cfg.correlation_threshold) {
    auto r = drop_correlated(m, *cfg.correlation_threshold);
    summary.correlation_dropped = r.dropped;
    m = std::move(r.matrix);
  }
  if (cfg.vif_threshold) {
    auto r = vif_filter(m, *cfg.vif_threshold);
    summary.vif_dropped = r.dropped;
    m = std::move(r.matrix);
  }
  if (cfg.balance)
    m = undersample_balance(m, seed);
  summary.rows_after_balance = m.rows();
  return m;
}

/// PCA + scaling fitted on one matrix, reusable on another.
struct Reduction {
  std::optional<PcaModel> pca;
  MinMaxScaler scaler;

  static Reduction fit(const FeatureMatrix& train, const PreprocessConfig& cfg, PreprocessSummary& summary) {
    Reduction red;
    FeatureMatrix reduced = train;
    if (cfg.pca) {
      const std::size_t full = std::min(train.rows(), train.cols());
      std::size_t k = cfg.pca_components;
      if (k == 0) {
        auto probe = pca_fit(train, std::max<std::size_t>(1, full));
        if (probe.explained_variance_ratio.size() >= 3) {
          summary.elbow_index = detect_elbow(probe.explained_variance_ratio);
          k = *summary.elbow_index + 1;
        } else {
          k = full;
        }
      }
      if (cfg.max_components > 0)
        k = std::min(k, cfg.max_components);
      red.pca = pca_fit(train, k);
      reduced = pca_transform(*red.pca, train);
    }
    summary.components = reduced.cols();
    red.scaler = MinMaxScaler::fit(reduced, cfg.scale_lo, cfg.scale_hi);
    return red;
  }

  FeatureMatrix apply(const FeatureMatrix& m) const {
    return scaler.transform(pca ? pca_transform(*pca, m) : m);
  }
};

} // namespace qenc
