#pragma once

// Shared domain types for the encoding library: feature matrices, value
// identity keys, embedding/strategy descriptors and cache accounting.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qenc {

/// Bad input data (NaN, non-binary basis input, shape mismatch...).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent configuration (strategy/granularity mismatch, bad params...).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Environment failure (unreadable file, unwritable output...).
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

} // namespace detail

/// n x d real matrix with optional class labels.
struct FeatureMatrix {
  Matrix values;
  std::optional<Labels> labels;
  std::vector<std::string> column_names;

  FeatureMatrix() = default;

  explicit FeatureMatrix(Matrix v, std::optional<Labels> l = std::nullopt,
                         std::vector<std::string> names = {})
      : values(std::move(v)), labels(std::move(l)), column_names(std::move(names)) {
    if (column_names.empty()) {
      column_names.reserve(static_cast<std::size_t>(values.cols()));
      for (Eigen::Index j = 0; j < values.cols(); ++j)
        column_names.push_back("f" + std::to_string(j));
    }
  }

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }

  bool has_labels() const { return labels.has_value(); }

  /// Throws ValidationError when any invariant is broken.
  void validate() const {
    if (column_names.size() != cols())
      throw ValidationError("feature matrix has " + std::to_string(cols()) + " columns but " +
                            std::to_string(column_names.size()) + " column names");
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      for (Eigen::Index j = 0; j < values.cols(); ++j)
        if (!std::isfinite(values(i, j)))
          throw ValidationError("non-finite value " + detail::format_double(values(i, j)) +
                                " at row " + std::to_string(i) + ", column " + std::to_string(j));
    if (labels) {
      if (labels->size() != rows())
        throw ValidationError("label vector has length " + std::to_string(labels->size()) +
                              ", expected " + std::to_string(rows()));
      for (int y : *labels)
        if (y < 0)
          throw ValidationError("labels must be non-negative integers, got " + std::to_string(y));
      if (rows() > 0 && distinct_labels().empty())
        throw ValidationError("labels present but empty");
    }
  }

  /// Sorted distinct labels (empty when unlabeled).
  std::vector<int> distinct_labels() const {
    if (!labels)
      return {};
    std::set<int> s(labels->begin(), labels->end());
    return {s.begin(), s.end()};
  }

  /// Rows selected by index, labels carried along.
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(static_cast<Eigen::Index>(idx.size()), values.cols());
    std::optional<Labels> lab;
    if (labels)
      lab.emplace();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(idx[r]));
      if (lab)
        lab->push_back((*labels)[idx[r]]);
    }
    return FeatureMatrix(std::move(out), std::move(lab), column_names);
  }

  /// Columns selected by index, labels carried along.
  FeatureMatrix select_cols(std::span<const std::size_t> idx) const {
    Matrix out(values.rows(), static_cast<Eigen::Index>(idx.size()));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      out.col(static_cast<Eigen::Index>(c)) = values.col(static_cast<Eigen::Index>(idx[c]));
      names.push_back(column_names[idx[c]]);
    }
    return FeatureMatrix(std::move(out), labels, std::move(names));
  }
};

// ---------------------------------------------------------------------------
// Value identity

/// Exact bit identity (default) or identity after rounding to `decimals`.
struct KeyPolicy {
  std::optional<int> decimals;

  static KeyPolicy exact() { return {}; }
  static KeyPolicy rounded(int d) { return KeyPolicy{d}; }

  bool operator==(const KeyPolicy&) const = default;
};

/// Hashable identity of a value (one word) or of a row (one word per cell).
class DedupKey {
public:
  DedupKey() = default;
  explicit DedupKey(std::vector<std::uint64_t> bits) : bits_(std::move(bits)) {}

  std::span<const std::uint64_t> bits() const { return bits_; }
  bool operator==(const DedupKey&) const = default;

  std::size_t hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ bits_.size();
    for (std::uint64_t b : bits_) {
      std::uint64_t z = b + 0x9e3779b97f4a7c15ULL + h;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      h = z ^ (z >> 31);
    }
    return static_cast<std::size_t>(h);
  }

private:
  std::vector<std::uint64_t> bits_;
};

struct DedupKeyHash {
  std::size_t operator()(const DedupKey& k) const { return k.hash(); }
};

namespace detail {

inline std::uint64_t canonical_bits(double value, const KeyPolicy& policy) {
  if (!std::isfinite(value))
    throw ValidationError("cannot build a dedup key for non-finite value " + format_double(value));
  double v = value;
  if (policy.decimals) {
    // scaled integer grid; comparing the rounded scaled value avoids the
    // second rounding that division back would introduce
    v = std::round(value * std::pow(10.0, *policy.decimals));
    if (!std::isfinite(v))
      throw ValidationError("value " + format_double(value) + " overflows rounding to " +
                            std::to_string(*policy.decimals) + " decimals");
  }
  if (v == 0.0)
    v = 0.0; // -0 -> +0
  return std::bit_cast<std::uint64_t>(v);
}

} // namespace detail

inline DedupKey dedup_key(double value, const KeyPolicy& policy = {}) {
  return DedupKey({detail::canonical_bits(value, policy)});
}

inline DedupKey row_key(std::span<const double> row, const KeyPolicy& policy = {}) {
  std::vector<std::uint64_t> bits;
  bits.reserve(row.size());
  for (double v : row)
    bits.push_back(detail::canonical_bits(v, policy));
  return DedupKey(std::move(bits));
}

// ---------------------------------------------------------------------------
// Embedding / strategy descriptors

enum class EmbeddingKind { basis, angle, iqp, qaoa, displacement, squeezing };
enum class Granularity { cell, row };
enum class StrategyKind { DE, ILS, GDS, CC_ILS, CC_GDS };

inline constexpr EmbeddingKind kAllEmbeddings[] = {EmbeddingKind::basis,        EmbeddingKind::angle,
                                                   EmbeddingKind::iqp,          EmbeddingKind::qaoa,
                                                   EmbeddingKind::displacement, EmbeddingKind::squeezing};
inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::DE, StrategyKind::ILS, StrategyKind::GDS,
                                                  StrategyKind::CC_ILS, StrategyKind::CC_GDS};

inline std::string_view to_string(EmbeddingKind k) {
  switch (k) {
  case EmbeddingKind::basis: return "basis";
  case EmbeddingKind::angle: return "angle";
  case EmbeddingKind::iqp: return "iqp";
  case EmbeddingKind::qaoa: return "qaoa";
  case EmbeddingKind::displacement: return "displacement";
  case EmbeddingKind::squeezing: return "squeezing";
  }
  return "?";
}

inline std::string_view to_string(Granularity g) { return g == Granularity::cell ? "cell" : "row"; }

inline std::string_view to_string(StrategyKind s) {
  switch (s) {
  case StrategyKind::DE: return "DE";
  case StrategyKind::ILS: return "ILS";
  case StrategyKind::GDS: return "GDS";
  case StrategyKind::CC_ILS: return "CC_ILS";
  case StrategyKind::CC_GDS: return "CC_GDS";
  }
  return "?";
}

inline EmbeddingKind parse_embedding_kind(std::string_view s) {
  for (auto k : kAllEmbeddings)
    if (to_string(k) == s)
      return k;
  throw ConfigError("unknown embedding kind '" + std::string(s) + "'");
}

inline Granularity parse_granularity(std::string_view s) {
  if (s == "cell")
    return Granularity::cell;
  if (s == "row")
    return Granularity::row;
  throw ConfigError("unknown granularity '" + std::string(s) + "' (expected cell or row)");
}

inline StrategyKind parse_strategy(std::string_view s) {
  for (auto k : kAllStrategies)
    if (to_string(k) == s)
      return k;
  // accept the hyphenated spelling as well
  if (s == "CC-ILS")
    return StrategyKind::CC_ILS;
  if (s == "CC-GDS")
    return StrategyKind::CC_GDS;
  throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

inline bool is_class_conditional(StrategyKind s) {
  return s == StrategyKind::CC_ILS || s == StrategyKind::CC_GDS;
}

/// Granularity a memoizing strategy is defined over; DE accepts both.
inline std::optional<Granularity> required_granularity(StrategyKind s) {
  switch (s) {
  case StrategyKind::ILS:
  case StrategyKind::CC_ILS: return Granularity::row;
  case StrategyKind::GDS:
  case StrategyKind::CC_GDS: return Granularity::cell;
  case StrategyKind::DE: break;
  }
  return std::nullopt;
}

inline void check_compatible(StrategyKind s, Granularity g) {
  auto req = required_granularity(s);
  if (req && *req != g)
    throw ConfigError("strategy " + std::string(to_string(s)) + " is incompatible with " +
                      std::string(to_string(g)) + " granularity (requires " +
                      std::string(to_string(*req)) + ")");
}

struct EmbeddingSpec {
  EmbeddingKind kind = EmbeddingKind::angle;
  Granularity granularity = Granularity::cell;
  int layers = 1;                   // iqp / qaoa depth
  std::vector<double> qaoa_params;  // empty -> drawn from rng_seed
  std::uint64_t rng_seed = 1234;

  bool operator==(const EmbeddingSpec&) const = default;

  bool is_qubit() const {
    return kind != EmbeddingKind::displacement && kind != EmbeddingKind::squeezing;
  }

  std::string label() const {
    return std::string(to_string(kind)) + "/" + std::string(to_string(granularity));
  }
};

/// Per-class slice of the cache accounting (class-conditional strategies).
struct ClassStats {
  int label = 0;
  std::size_t embed_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t rows = 0;

  bool operator==(const ClassStats&) const = default;
};

struct CacheStats {
  std::size_t embed_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t unique_keys = 0;
  double wall_seconds = 0.0;
  std::size_t cells_total = 0;
  std::size_t rows_total = 0;

  std::size_t requests() const { return embed_calls + cache_hits; }

  /// Equality of the counters; wall time is excluded.
  bool same_counts(const CacheStats& o) const {
    return embed_calls == o.embed_calls && cache_hits == o.cache_hits &&
           unique_keys == o.unique_keys && cells_total == o.cells_total && rows_total == o.rows_total;
  }
};

} // namespace qenc
