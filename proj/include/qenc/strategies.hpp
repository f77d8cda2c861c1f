#pragma once

// Encoding strategies as planning + memoization layers over an Embedder.
//
//   DE      one embedding call per cell or per row, no reuse
//   ILS     one call per distinct row
//   GDS     one call per distinct value in the whole matrix
//   CC_ILS  one call per distinct row within each class
//   CC_GDS  one call per distinct value within each class
//
// Planning (key extraction, grouping) is single threaded and visits items in
// first-appearance order; only the embedding of distinct items may run in
// parallel, each into its own pre-assigned slot.

#include "qenc/core.hpp"
#include "qenc/embeddings.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace qenc {

// ---------------------------------------------------------------------------
// Redundancy analysis

struct UniqueValue {
  DedupKey key;
  double value = 0.0; // first occurrence
  std::size_t count = 0;
};

/// Distinct values in row-major first-appearance order.
inline std::vector<UniqueValue> unique_values(const FeatureMatrix& m, const KeyPolicy& policy = {}) {
  std::vector<UniqueValue> out;
  std::unordered_map<DedupKey, std::size_t, DedupKeyHash> index;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row(i)) {
      auto key = dedup_key(v, policy);
      auto [it, fresh] = index.try_emplace(key, out.size());
      if (fresh)
        out.push_back({std::move(key), v, 0});
      ++out[it->second].count;
    }
  return out;
}

struct RowGroup {
  DedupKey key;
  std::size_t representative = 0;
  std::vector<std::size_t> members;
};

inline std::vector<RowGroup> unique_rows(const FeatureMatrix& m, const KeyPolicy& policy = {}) {
  std::vector<RowGroup> out;
  std::unordered_map<DedupKey, std::size_t, DedupKeyHash> index;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto key = row_key(m.row(i), policy);
    auto [it, fresh] = index.try_emplace(key, out.size());
    if (fresh)
      out.push_back({std::move(key), i, {}});
    out[it->second].members.push_back(i);
  }
  return out;
}

struct ClassPartition {
  std::vector<int> class_ids;                        // ascending
  std::vector<std::vector<std::size_t>> row_indices; // parallel to class_ids
};

inline ClassPartition partition_by_class(const FeatureMatrix& m) {
  if (!m.labels)
    throw ConfigError("class-conditional encoding needs labels on the training matrix");
  ClassPartition p;
  p.class_ids = m.distinct_labels();
  p.row_indices.resize(p.class_ids.size());
  std::map<int, std::size_t> slot;
  for (std::size_t c = 0; c < p.class_ids.size(); ++c)
    slot[p.class_ids[c]] = c;
  for (std::size_t i = 0; i < m.rows(); ++i)
    p.row_indices[slot.at((*m.labels)[i])].push_back(i);
  return p;
}

// ---------------------------------------------------------------------------
// Cache

/// Key -> state map with concurrent readers and writers. A key becomes
/// visible only together with its fully built state.
class StateCache {
public:
  StateHandle find(const DedupKey& key) const {
    std::shared_lock lock(mutex_);
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : it->second;
  }

  /// Inserts unless present; returns the handle that ends up stored.
  StateHandle insert(const DedupKey& key, StateHandle state) {
    std::unique_lock lock(mutex_);
    auto [it, fresh] = map_.try_emplace(key, std::move(state));
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }

private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<DedupKey, StateHandle, DedupKeyHash> map_;
};

// ---------------------------------------------------------------------------
// Encoded output

/// Label-aware embedding, used in place of the shared embedder during
/// class-conditional fitting. Train-only: unseen data never reaches it.
using ClassEmbeddingHook = std::function<QuantumState(std::span<const double>, int label)>;

struct EncodeOptions {
  KeyPolicy key_policy;
  unsigned threads = 1;
  std::chrono::microseconds call_delay{0};
  ClassEmbeddingHook class_hook;
};

struct EncodedDataset {
  Granularity granularity = Granularity::cell;
  std::size_t n = 0;
  std::size_t d = 0;
  /// Cell granularity: n*d handles, row-major. Row granularity: n handles.
  std::vector<StateHandle> states;
  std::optional<Labels> labels;
  CacheStats stats;
  std::vector<ClassStats> per_class;
  StrategyKind strategy = StrategyKind::DE;
  EmbeddingSpec embedding;
  /// Requests served by the class-agnostic fallback cache (CC strategies on unseen data).
  std::size_t fallback_requests = 0;

  const StateHandle& cell(std::size_t i, std::size_t j) const { return states.at(i * d + j); }
  const StateHandle& row(std::size_t i) const { return states.at(i); }
};

namespace detail {

struct PlanItem {
  DedupKey key;
  std::size_t position = 0; // representative position
  int label = -1;           // class label when embedding through the hook
};

inline std::span<const double> position_input(const FeatureMatrix& m, Granularity g, std::size_t p) {
  if (g == Granularity::row)
    return m.row(p);
  return {m.values.data() + p, 1};
}

inline std::string position_context(Granularity g, std::size_t p, std::size_t d) {
  if (g == Granularity::row)
    return "row " + std::to_string(p);
  return "row " + std::to_string(p / d) + ", column " + std::to_string(p % d);
}

/// Calls fn(i) for i in [0, count) over up to `threads` workers; rethrows the
/// first failure by index.
template <typename Fn> void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  const unsigned workers = std::min<std::size_t>(threads, count);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_at(workers, count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (i < error_at[w]) {
              error_at[w] = i;
              errors[w] = std::current_exception();
            }
          }
        }
      });
  }
  std::size_t first = count;
  std::exception_ptr err;
  for (unsigned w = 0; w < workers; ++w)
    if (errors[w] && error_at[w] < first) {
      first = error_at[w];
      err = errors[w];
    }
  if (err)
    std::rethrow_exception(err);
}

template <typename Fn> auto with_context(const std::string& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fitted encoder

/// Encodes a training matrix with one strategy and keeps the caches, so that
/// unseen data can reuse them. Class-conditional strategies keep one cache per
/// class plus a class-agnostic fallback cache for data without labels.
class StrategyEncoder {
public:
  StrategyEncoder(EmbeddingSpec spec, StrategyKind strategy, EncodeOptions options = {})
      : spec_(std::move(spec)), strategy_(strategy), options_(std::move(options)) {
    check_compatible(strategy_, spec_.granularity);
  }

  const EmbeddingSpec& spec() const { return spec_; }
  StrategyKind strategy() const { return strategy_; }

  EncodedDataset fit_encode(const FeatureMatrix& m) {
    m.validate();
    if (is_class_conditional(strategy_) && !m.labels)
      throw ConfigError("strategy " + std::string(to_string(strategy_)) +
                        " needs labels on the training matrix");
    const auto start = std::chrono::steady_clock::now();
    bind(m.cols());
    EncodedDataset out = strategy_ == StrategyKind::DE ? encode_each(m) : encode_memoized(m);
    out.stats.wall_seconds = seconds_since(start);
    return out;
  }

  /// Encodes data the encoder was not fitted on (e.g. a test split). Cache
  /// misses are embedded on demand, without class information.
  EncodedDataset encode_unseen(const FeatureMatrix& m) {
    if (!embedder_)
      throw ConfigError("encode_unseen called before fit_encode");
    m.validate();
    if (m.cols() != fitted_d_)
      throw ValidationError("unseen data has " + std::to_string(m.cols()) + " columns, encoder was fitted on " +
                            std::to_string(fitted_d_));
    const auto start = std::chrono::steady_clock::now();
    EncodedDataset out;
    if (strategy_ == StrategyKind::DE) {
      out = encode_each(m);
    } else {
      out = shell(m);
      StateCache& cache = is_class_conditional(strategy_) ? *fallback_ : *global_;
      const std::size_t positions = out.states.size();
      for (std::size_t p = 0; p < positions; ++p) {
        auto input = detail::position_input(m, spec_.granularity, p);
        auto key = spec_.granularity == Granularity::row ? row_key(input, options_.key_policy)
                                                         : dedup_key(input[0], options_.key_policy);
        if (auto hit = cache.find(key)) {
          out.states[p] = std::move(hit);
          ++out.stats.cache_hits;
        } else {
          auto state = detail::with_context(detail::position_context(spec_.granularity, p, m.cols()), [&] {
            return std::make_shared<const QuantumState>((*embedder_)(input));
          });
          out.states[p] = cache.insert(key, std::move(state));
          ++out.stats.embed_calls;
        }
      }
      out.stats.unique_keys = out.stats.embed_calls;
      if (is_class_conditional(strategy_))
        out.fallback_requests = positions;
    }
    out.stats.wall_seconds = seconds_since(start);
    return out;
  }

  /// Entries in the shared cache (ILS/GDS) or in all class caches (CC variants).
  std::size_t cached_states() const {
    if (!is_class_conditional(strategy_))
      return global_ ? global_->size() : 0;
    std::size_t n = 0;
    for (const auto& [label, cache] : class_caches_)
      n += cache->size();
    return n;
  }

private:
  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  }

  void bind(std::size_t d) {
    const std::size_t width = spec_.granularity == Granularity::row ? d : 1;
    embedder_.emplace(spec_, width);
    embedder_->set_call_delay(options_.call_delay);
    fitted_d_ = d;
    global_ = std::make_unique<StateCache>();
    fallback_ = std::make_unique<StateCache>();
    class_caches_.clear();
  }

  EncodedDataset shell(const FeatureMatrix& m) const {
    EncodedDataset out;
    out.granularity = spec_.granularity;
    out.n = m.rows();
    out.d = m.cols();
    out.states.resize(spec_.granularity == Granularity::row ? m.rows() : m.rows() * m.cols());
    out.labels = m.labels;
    out.strategy = strategy_;
    out.embedding = spec_;
    out.stats.cells_total = m.rows() * m.cols();
    out.stats.rows_total = m.rows();
    return out;
  }

  QuantumState embed_item(const FeatureMatrix& m, std::size_t position, int label) const {
    auto input = detail::position_input(m, spec_.granularity, position);
    return detail::with_context(detail::position_context(spec_.granularity, position, m.cols()), [&] {
      if (label >= 0 && options_.class_hook)
        return options_.class_hook(input, label);
      return (*embedder_)(input);
    });
  }

  EncodedDataset encode_each(const FeatureMatrix& m) const {
    EncodedDataset out = shell(m);
    std::atomic<std::size_t> calls{0};
    detail::parallel_for(out.states.size(), options_.threads, [&](std::size_t p) {
      out.states[p] = std::make_shared<const QuantumState>(embed_item(m, p, -1));
      calls.fetch_add(1, std::memory_order_relaxed);
    });
    out.stats.embed_calls = calls.load();
    return out;
  }

  EncodedDataset encode_memoized(const FeatureMatrix& m) {
    EncodedDataset out = shell(m);
    const bool by_class = is_class_conditional(strategy_);
    const bool cells = spec_.granularity == Granularity::cell;
    const std::size_t d = m.cols();

    ClassPartition buckets;
    if (by_class) {
      buckets = partition_by_class(m);
    } else {
      buckets.class_ids = {-1};
      buckets.row_indices.emplace_back(m.rows());
      for (std::size_t i = 0; i < m.rows(); ++i)
        buckets.row_indices[0][i] = i;
    }

    // plan: positions -> distinct items, per bucket
    std::vector<detail::PlanItem> items;
    std::vector<std::size_t> item_of(out.states.size());
    std::vector<std::size_t> bucket_of_item;
    for (std::size_t b = 0; b < buckets.class_ids.size(); ++b) {
      std::unordered_map<DedupKey, std::size_t, DedupKeyHash> seen;
      ClassStats cs;
      cs.label = buckets.class_ids[b];
      cs.rows = buckets.row_indices[b].size();
      auto visit = [&](std::size_t p, DedupKey key) {
        auto [it, fresh] = seen.try_emplace(std::move(key), items.size());
        if (fresh) {
          items.push_back({it->first, p, by_class ? buckets.class_ids[b] : -1});
          bucket_of_item.push_back(b);
          ++cs.embed_calls;
        } else {
          ++cs.cache_hits;
        }
        item_of[p] = it->second;
      };
      for (std::size_t i : buckets.row_indices[b]) {
        if (cells) {
          for (std::size_t j = 0; j < d; ++j)
            visit(i * d + j, dedup_key(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                       options_.key_policy));
        } else {
          visit(i, row_key(m.row(i), options_.key_policy));
        }
      }
      if (by_class)
        out.per_class.push_back(cs);
    }

    // embed distinct items; each worker writes only its own slot
    std::vector<StateHandle> built(items.size());
    std::atomic<std::size_t> calls{0};
    detail::parallel_for(items.size(), options_.threads, [&](std::size_t k) {
      built[k] = std::make_shared<const QuantumState>(embed_item(m, items[k].position, items[k].label));
      calls.fetch_add(1, std::memory_order_relaxed);
    });

    // publish
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (by_class) {
        const int label = buckets.class_ids[bucket_of_item[k]];
        auto& cache = class_caches_[label];
        if (!cache)
          cache = std::make_unique<StateCache>();
        cache->insert(items[k].key, built[k]);
        if (!options_.class_hook)
          fallback_->insert(items[k].key, built[k]);
      } else {
        global_->insert(items[k].key, built[k]);
      }
    }

    for (std::size_t p = 0; p < out.states.size(); ++p)
      out.states[p] = built[item_of[p]];

    out.stats.embed_calls = calls.load();
    out.stats.unique_keys = items.size();
    out.stats.cache_hits = out.states.size() - items.size();
    return out;
  }

  EmbeddingSpec spec_;
  StrategyKind strategy_;
  EncodeOptions options_;
  std::optional<Embedder> embedder_;
  std::size_t fitted_d_ = 0;
  std::unique_ptr<StateCache> global_;
  std::unique_ptr<StateCache> fallback_;
  std::map<int, std::unique_ptr<StateCache>> class_caches_;
};

// ---------------------------------------------------------------------------
// One-shot entry points

namespace detail {

inline EncodedDataset encode_as(const FeatureMatrix& m, EmbeddingSpec spec, StrategyKind s,
                                const EncodeOptions& opt) {
  StrategyEncoder enc(std::move(spec), s, opt);
  return enc.fit_encode(m);
}

} // namespace detail

inline EncodedDataset encode_direct(const FeatureMatrix& m, const EmbeddingSpec& spec,
                                    const EncodeOptions& opt = {}) {
  return detail::encode_as(m, spec, StrategyKind::DE, opt);
}

inline EncodedDataset encode_ils(const FeatureMatrix& m, const EmbeddingSpec& spec, const EncodeOptions& opt = {}) {
  return detail::encode_as(m, spec, StrategyKind::ILS, opt);
}

inline EncodedDataset encode_gds(const FeatureMatrix& m, const EmbeddingSpec& spec, const EncodeOptions& opt = {}) {
  return detail::encode_as(m, spec, StrategyKind::GDS, opt);
}

inline EncodedDataset encode_cc_ils(const FeatureMatrix& m, const EmbeddingSpec& spec,
                                    const EncodeOptions& opt = {}) {
  return detail::encode_as(m, spec, StrategyKind::CC_ILS, opt);
}

inline EncodedDataset encode_cc_gds(const FeatureMatrix& m, const EmbeddingSpec& spec,
                                    const EncodeOptions& opt = {}) {
  return detail::encode_as(m, spec, StrategyKind::CC_GDS, opt);
}

inline EncodedDataset encode(const FeatureMatrix& m, const EmbeddingSpec& spec, StrategyKind s,
                             const EncodeOptions& opt = {}) {
  switch (s) {
  case StrategyKind::DE: return encode_direct(m, spec, opt);
  case StrategyKind::ILS: return encode_ils(m, spec, opt);
  case StrategyKind::GDS: return encode_gds(m, spec, opt);
  case StrategyKind::CC_ILS: return encode_cc_ils(m, spec, opt);
  case StrategyKind::CC_GDS: return encode_cc_gds(m, spec, opt);
  }
  throw ConfigError("unhandled strategy");
}

} // namespace qenc
