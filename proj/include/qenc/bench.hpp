#pragma once

// Experiment orchestration over an (embedding x strategy) grid.
//
// For every grid cell:
//   1. the whole prepared dataset is encoded `repeat` times; counters and the
//      median wall time form the encoding-cost row,
//   2. an encoder is fitted on the training split, the test split goes
//      through encode_unseen (fallback caches for class-conditional
//      strategies), and every configured classifier is scored on the test
//      split.
//
// Report files carry no timing data, so identical configs give identical
// bytes; timings go to a separate `<hash>.timing.csv`.

#include "qenc/classifiers.hpp"
#include "qenc/preprocess.hpp"
#include "qenc/readout.hpp"
#include "qenc/strategies.hpp"
#include "qenc/synthetic.hpp"

#include "json.hpp"

#include <ctime>
#include <filesystem>
#include <iomanip>

namespace qenc {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct EmbeddingEntry {
  std::string name; // unique within the config; defaults to the kind
  EmbeddingSpec spec;
  bool auto_granularity = true;

  bool operator==(const EmbeddingEntry&) const = default;
};

struct ExperimentConfig {
  std::optional<std::string> input_path;
  SyntheticConfig synthetic;
  bool preprocess_enabled = true;
  PreprocessConfig preprocess;
  std::vector<EmbeddingEntry> embeddings;
  std::vector<StrategyKind> strategies;
  ReadoutSpec readout;
  std::vector<ClassifierConfig> classifiers;
  std::optional<int> key_decimals;
  std::optional<double> binarize_threshold; // empty: per-column median
  unsigned threads = 1;
  long call_delay_us = 0;
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  int repeat = 1;
  std::string output_dir = "qenc-out";
  bool parallel_cells = false;
  double accuracy_bound = 0.02;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object())
    throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T> T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T> void read_opt(const json& j, const char* key, T& dst, const std::string& where) {
  if (j.contains(key))
    dst = get_as<T>(j, key, where);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace detail

inline ExperimentConfig default_config() {
  ExperimentConfig c;
  for (auto k : {EmbeddingKind::basis, EmbeddingKind::angle, EmbeddingKind::iqp, EmbeddingKind::qaoa,
                 EmbeddingKind::displacement, EmbeddingKind::squeezing}) {
    EmbeddingEntry e;
    e.name = std::string(to_string(k));
    e.spec.kind = k;
    c.embeddings.push_back(e);
  }
  c.strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
  c.preprocess.max_components = 8;
  for (auto k : {ClassifierKind::logreg, ClassifierKind::knn, ClassifierKind::linear_svm, ClassifierKind::cart}) {
    ClassifierConfig cc;
    cc.kind = k;
    c.classifiers.push_back(cc);
  }
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json input = {{"path", c.input_path ? json(*c.input_path) : json(nullptr)},
                {"synthetic",
                 {{"rows", c.synthetic.rows},
                  {"positives", c.synthetic.positives ? json(*c.synthetic.positives) : json(nullptr)},
                  {"seed", c.synthetic.seed}}}};
  const auto& p = c.preprocess;
  json pre = {{"enabled", c.preprocess_enabled},
              {"target", p.target},
              {"drop_columns", p.drop_columns},
              {"categorical_columns", p.categorical_columns},
              {"correlation_threshold", p.correlation_threshold ? json(*p.correlation_threshold) : json(nullptr)},
              {"vif_threshold", p.vif_threshold ? json(*p.vif_threshold) : json(nullptr)},
              {"balance", p.balance},
              {"pca", p.pca},
              {"pca_components", p.pca_components == 0 ? json("elbow") : json(p.pca_components)},
              {"max_components", p.max_components},
              {"scale", {p.scale_lo, p.scale_hi}}};
  json embs = json::array();
  for (const auto& e : c.embeddings)
    embs.push_back({{"name", e.name},
                    {"kind", to_string(e.spec.kind)},
                    {"granularity", e.auto_granularity ? "auto" : to_string(e.spec.granularity)},
                    {"layers", e.spec.layers},
                    {"qaoa_params", e.spec.qaoa_params},
                    {"seed", e.spec.rng_seed}});
  json strats = json::array();
  for (auto s : c.strategies)
    strats.push_back(to_string(s));
  const auto& r = c.readout;
  json readout = {{"z", r.z},           {"x", r.x},          {"zz", r.zz},         {"mean_x", r.mean_x},
                  {"mean_p", r.mean_p}, {"var_x", r.var_x}, {"var_p", r.var_p}};
  json clfs = json::array();
  for (const auto& k : c.classifiers) {
    json j = {{"kind", to_string(k.kind)}, {"seed", k.seed}};
    switch (k.kind) {
    case ClassifierKind::logreg: j.update({{"lr", k.lr}, {"epochs", k.epochs}, {"l2", k.l2}}); break;
    case ClassifierKind::knn: j["k"] = k.k; break;
    case ClassifierKind::linear_svm: j.update({{"lambda", k.lambda}, {"epochs", k.epochs}}); break;
    case ClassifierKind::cart: j.update({{"max_depth", k.max_depth}, {"min_leaf", k.min_leaf}}); break;
    }
    clfs.push_back(j);
  }
  json enc = {{"key_decimals", c.key_decimals ? json(*c.key_decimals) : json(nullptr)},
              {"binarize", c.binarize_threshold ? json(*c.binarize_threshold) : json("median")},
              {"threads", c.threads},
              {"call_delay_us", c.call_delay_us}};
  return {{"input", input},
          {"preprocess", pre},
          {"embeddings", embs},
          {"strategies", strats},
          {"readout", readout},
          {"classifiers", clfs},
          {"encoding", enc},
          {"seed", c.seed},
          {"train_fraction", c.train_fraction},
          {"repeat", c.repeat},
          {"output_dir", c.output_dir},
          {"parallel_cells", c.parallel_cells},
          {"accuracy_bound", c.accuracy_bound}};
}

/// Structural checks that do not need data.
inline void validate(const ExperimentConfig& c) {
  if (c.embeddings.empty())
    throw ConfigError("config lists no embeddings");
  if (c.strategies.empty())
    throw ConfigError("config lists no strategies");
  std::set<std::string> names;
  for (const auto& e : c.embeddings) {
    if (!names.insert(e.name).second)
      throw ConfigError("duplicate embedding name '" + e.name + "'");
    if (e.spec.layers < 1)
      throw ConfigError("embedding '" + e.name + "': layers must be >= 1");
    if (!e.auto_granularity)
      for (auto s : c.strategies)
        try {
          check_compatible(s, e.spec.granularity);
        } catch (const ConfigError& err) {
          throw ConfigError("embedding '" + e.name + "': " + err.what());
        }
  }
  std::set<StrategyKind> seen;
  for (auto s : c.strategies)
    if (!seen.insert(s).second)
      throw ConfigError("strategy " + std::string(to_string(s)) + " listed twice");
  c.readout.validate();
  if (!(c.train_fraction > 0 && c.train_fraction < 1))
    throw ConfigError("train_fraction must lie in (0, 1)");
  if (c.repeat < 1)
    throw ConfigError("repeat must be >= 1");
  if (c.call_delay_us < 0)
    throw ConfigError("call_delay_us must be >= 0");
  if (c.key_decimals && (*c.key_decimals < 0 || *c.key_decimals > 15))
    throw ConfigError("key_decimals must lie in [0, 15]");
  if (!c.preprocess_enabled && !c.input_path)
    throw ConfigError("preprocess.enabled=false needs input.path (a numeric matrix CSV)");
  if (!(c.preprocess.scale_lo < c.preprocess.scale_hi))
    throw ConfigError("preprocess.scale must be [lo, hi] with lo < hi");
  for (const auto& k : c.classifiers) {
    if (k.kind == ClassifierKind::knn && k.k < 1)
      throw ConfigError("knn k must be >= 1");
    if ((k.kind == ClassifierKind::logreg || k.kind == ClassifierKind::linear_svm) && k.epochs < 1)
      throw ConfigError("epochs must be >= 1");
    if (k.kind == ClassifierKind::linear_svm && !(k.lambda > 0))
      throw ConfigError("svm lambda must be > 0");
    if (k.kind == ClassifierKind::logreg && !(k.lr > 0))
      throw ConfigError("logreg lr must be > 0");
  }
}

/// Parses a config document over the defaults. Unknown keys are rejected at
/// every level.
inline ExperimentConfig config_from_json(const json& j) {
  using detail::get_as;
  using detail::read_opt;
  using detail::reject_unknown;
  ExperimentConfig c = default_config();
  reject_unknown(j,
                 {"input", "preprocess", "embeddings", "strategies", "readout", "classifiers", "encoding", "seed",
                  "train_fraction", "repeat", "output_dir", "parallel_cells", "accuracy_bound"},
                 "config");

  if (j.contains("input")) {
    const json& in = j["input"];
    reject_unknown(in, {"path", "synthetic"}, "input");
    if (in.contains("path") && !in["path"].is_null())
      c.input_path = get_as<std::string>(in, "path", "input");
    if (in.contains("synthetic")) {
      const json& s = in["synthetic"];
      reject_unknown(s, {"rows", "positives", "seed"}, "input.synthetic");
      read_opt(s, "rows", c.synthetic.rows, "input.synthetic");
      if (s.contains("positives") && !s["positives"].is_null())
        c.synthetic.positives = get_as<std::size_t>(s, "positives", "input.synthetic");
      read_opt(s, "seed", c.synthetic.seed, "input.synthetic");
    }
  }

  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    const std::string w = "preprocess";
    reject_unknown(p,
                   {"enabled", "target", "drop_columns", "categorical_columns", "correlation_threshold",
                    "vif_threshold", "balance", "pca", "pca_components", "max_components", "scale"},
                   w);
    read_opt(p, "enabled", c.preprocess_enabled, w);
    read_opt(p, "target", c.preprocess.target, w);
    read_opt(p, "drop_columns", c.preprocess.drop_columns, w);
    read_opt(p, "categorical_columns", c.preprocess.categorical_columns, w);
    for (const char* key : {"correlation_threshold", "vif_threshold"}) {
      auto& dst = std::string_view(key) == "vif_threshold" ? c.preprocess.vif_threshold
                                                           : c.preprocess.correlation_threshold;
      if (p.contains(key))
        dst = p[key].is_null() ? std::nullopt : std::optional<double>(get_as<double>(p, key, w));
    }
    read_opt(p, "balance", c.preprocess.balance, w);
    read_opt(p, "pca", c.preprocess.pca, w);
    if (p.contains("pca_components")) {
      if (p["pca_components"].is_string()) {
        if (p["pca_components"] != "elbow")
          throw ConfigError("preprocess.pca_components must be \"elbow\" or a positive integer");
        c.preprocess.pca_components = 0;
      } else {
        c.preprocess.pca_components = get_as<std::size_t>(p, "pca_components", w);
        if (c.preprocess.pca_components == 0)
          throw ConfigError("preprocess.pca_components must be \"elbow\" or a positive integer");
      }
    }
    read_opt(p, "max_components", c.preprocess.max_components, w);
    if (p.contains("scale")) {
      auto v = get_as<std::vector<double>>(p, "scale", w);
      if (v.size() != 2)
        throw ConfigError("preprocess.scale must be [lo, hi]");
      c.preprocess.scale_lo = v[0];
      c.preprocess.scale_hi = v[1];
    }
  }

  if (j.contains("embeddings")) {
    if (!j["embeddings"].is_array())
      throw ConfigError("embeddings must be an array");
    c.embeddings.clear();
    std::map<std::string, int> used;
    for (std::size_t i = 0; i < j["embeddings"].size(); ++i) {
      const json& e = j["embeddings"][i];
      const std::string w = "embeddings[" + std::to_string(i) + "]";
      EmbeddingEntry entry;
      if (e.is_string()) {
        entry.spec.kind = parse_embedding_kind(e.get<std::string>());
      } else {
        reject_unknown(e, {"name", "kind", "granularity", "layers", "qaoa_params", "seed"}, w);
        entry.spec.kind = parse_embedding_kind(get_as<std::string>(e, "kind", w));
        const std::string g = e.contains("granularity") ? get_as<std::string>(e, "granularity", w) : "auto";
        entry.auto_granularity = g == "auto";
        if (!entry.auto_granularity)
          entry.spec.granularity = parse_granularity(g);
        read_opt(e, "layers", entry.spec.layers, w);
        read_opt(e, "qaoa_params", entry.spec.qaoa_params, w);
        read_opt(e, "seed", entry.spec.rng_seed, w);
        read_opt(e, "name", entry.name, w);
      }
      if (entry.name.empty()) {
        entry.name = std::string(to_string(entry.spec.kind));
        if (int n = ++used[entry.name]; n > 1)
          entry.name += "#" + std::to_string(n);
      }
      c.embeddings.push_back(entry);
    }
  }

  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : detail::get_as<std::vector<std::string>>(j, "strategies", "config"))
      c.strategies.push_back(parse_strategy(s));
  }

  if (j.contains("readout")) {
    const json& r = j["readout"];
    reject_unknown(r, {"z", "x", "zz", "mean_x", "mean_p", "var_x", "var_p"}, "readout");
    read_opt(r, "z", c.readout.z, "readout");
    read_opt(r, "x", c.readout.x, "readout");
    read_opt(r, "zz", c.readout.zz, "readout");
    read_opt(r, "mean_x", c.readout.mean_x, "readout");
    read_opt(r, "mean_p", c.readout.mean_p, "readout");
    read_opt(r, "var_x", c.readout.var_x, "readout");
    read_opt(r, "var_p", c.readout.var_p, "readout");
  }

  if (j.contains("classifiers")) {
    if (!j["classifiers"].is_array())
      throw ConfigError("classifiers must be an array");
    c.classifiers.clear();
    for (std::size_t i = 0; i < j["classifiers"].size(); ++i) {
      const json& k = j["classifiers"][i];
      const std::string w = "classifiers[" + std::to_string(i) + "]";
      ClassifierConfig cc;
      if (k.is_string()) {
        cc.kind = parse_classifier_kind(k.get<std::string>());
      } else {
        reject_unknown(k, {"kind", "lr", "epochs", "l2", "k", "lambda", "max_depth", "min_leaf", "seed"}, w);
        cc.kind = parse_classifier_kind(get_as<std::string>(k, "kind", w));
        read_opt(k, "lr", cc.lr, w);
        read_opt(k, "epochs", cc.epochs, w);
        read_opt(k, "l2", cc.l2, w);
        read_opt(k, "k", cc.k, w);
        read_opt(k, "lambda", cc.lambda, w);
        read_opt(k, "max_depth", cc.max_depth, w);
        read_opt(k, "min_leaf", cc.min_leaf, w);
        read_opt(k, "seed", cc.seed, w);
      }
      c.classifiers.push_back(cc);
    }
  }

  if (j.contains("encoding")) {
    const json& e = j["encoding"];
    reject_unknown(e, {"key_decimals", "binarize", "threads", "call_delay_us"}, "encoding");
    if (e.contains("key_decimals"))
      c.key_decimals = e["key_decimals"].is_null() ? std::nullopt
                                                   : std::optional<int>(get_as<int>(e, "key_decimals", "encoding"));
    if (e.contains("binarize")) {
      if (e["binarize"].is_string()) {
        if (e["binarize"] != "median")
          throw ConfigError("encoding.binarize must be \"median\" or a number");
        c.binarize_threshold.reset();
      } else {
        c.binarize_threshold = get_as<double>(e, "binarize", "encoding");
      }
    }
    read_opt(e, "threads", c.threads, "encoding");
    read_opt(e, "call_delay_us", c.call_delay_us, "encoding");
  }

  read_opt(j, "seed", c.seed, "config");
  read_opt(j, "train_fraction", c.train_fraction, "config");
  read_opt(j, "repeat", c.repeat, "config");
  read_opt(j, "output_dir", c.output_dir, "config");
  read_opt(j, "parallel_cells", c.parallel_cells, "config");
  read_opt(j, "accuracy_bound", c.accuracy_bound, "config");
  validate(c);
  return c;
}

/// Applies `a.b.c=value` on a JSON document; the value is parsed as JSON when
/// possible and taken as a string otherwise. Numeric segments index arrays.
inline void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded())
    value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty())
      throw ConfigError("override path '" + path + "' has an empty segment");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), idx);
      if (ec != std::errc() || ptr != seg.data() + seg.size() || idx >= node->size())
        throw ConfigError("override path '" + path + "': bad array index '" + seg + "'");
      next = &(*node)[idx];
    } else {
      if (node->is_null())
        *node = json::object();
      if (!node->is_object())
        throw ConfigError("override path '" + path + "': '" + seg + "' is not inside an object");
      next = &(*node)[seg];
    }
    if (dot == std::string::npos) {
      *next = std::move(value);
      return;
    }
    node = next;
    start = dot + 1;
  }
}

/// Loads a config file (or the defaults when `path` is empty) and applies
/// overrides; the result is revalidated.
inline ExperimentConfig load_config(const std::string& path, std::span<const std::string> overrides = {}) {
  json doc = json::object();
  if (!path.empty()) {
    const std::string text = csv::read_file(path);
    doc = json::parse(text, nullptr, false);
    if (doc.is_discarded())
      throw ConfigError("config '" + path + "' is not valid JSON");
  }
  for (const auto& o : overrides)
    apply_override(doc, o);
  return config_from_json(doc);
}

/// 16 hex digits over the normalized config (output_dir excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(j.dump());
  return os.str();
}

// ---------------------------------------------------------------------------
// Grid

struct GridEntry {
  std::string embedding; // EmbeddingEntry::name
  EmbeddingSpec spec;
  StrategyKind strategy;
};

/// Expands the config into grid rows ordered by embedding (as configured),
/// then DE, ILS, GDS, CC_ILS, CC_GDS. With automatic granularity, memoizing
/// strategies take the granularity they are defined over and DE runs at every
/// granularity some other strategy uses (cell when DE is alone).
inline std::vector<GridEntry> expand_grid(const ExperimentConfig& c) {
  validate(c);
  std::vector<GridEntry> grid;
  std::set<StrategyKind> wanted(c.strategies.begin(), c.strategies.end());
  const bool any_cell = wanted.count(StrategyKind::GDS) || wanted.count(StrategyKind::CC_GDS);
  const bool any_row = wanted.count(StrategyKind::ILS) || wanted.count(StrategyKind::CC_ILS);
  for (const auto& e : c.embeddings) {
    for (auto s : kAllStrategies) {
      if (!wanted.count(s))
        continue;
      if (!e.auto_granularity) {
        grid.push_back({e.name, e.spec, s});
        continue;
      }
      std::vector<Granularity> gs;
      if (auto req = required_granularity(s))
        gs = {*req};
      else {
        if (any_cell || !any_row)
          gs.push_back(Granularity::cell);
        if (any_row)
          gs.push_back(Granularity::row);
      }
      for (auto g : gs) {
        EmbeddingSpec spec = e.spec;
        spec.granularity = g;
        grid.push_back({e.name, spec, s});
      }
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Report

struct ClassifierResult {
  std::string name;
  std::optional<double> accuracy;
  std::string error;

  bool operator==(const ClassifierResult&) const = default;
};

struct GridCellResult {
  std::string embedding;
  EmbeddingKind kind = EmbeddingKind::angle;
  Granularity granularity = Granularity::cell;
  StrategyKind strategy = StrategyKind::DE;
  bool ok = true;
  std::string reason;
  CacheStats stats;
  std::vector<ClassStats> per_class;
  std::size_t test_embed_calls = 0;
  std::size_t test_cache_hits = 0;
  std::size_t test_fallback = 0;
  std::vector<ClassifierResult> classifiers;
  double encode_seconds = 0.0; // median over repeats; timing section only

  /// Everything except timing.
  bool same_content(const GridCellResult& o) const {
    return embedding == o.embedding && kind == o.kind && granularity == o.granularity && strategy == o.strategy &&
           ok == o.ok && reason == o.reason && stats.same_counts(o.stats) && per_class == o.per_class &&
           test_embed_calls == o.test_embed_calls && test_cache_hits == o.test_cache_hits &&
           test_fallback == o.test_fallback && classifiers == o.classifiers;
  }
};

struct BenchReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  long call_delay_us = 0;
  std::vector<std::string> classifier_names;
  std::vector<GridCellResult> cells;
  // timing section
  std::string timestamp;
  int repeat = 1;
  bool timings_comparable = true;

  bool same_content(const BenchReport& o) const {
    if (config_hash != o.config_hash || seed != o.seed || call_delay_us != o.call_delay_us ||
        classifier_names != o.classifier_names || cells.size() != o.cells.size())
      return false;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!cells[i].same_content(o.cells[i]))
        return false;
    return true;
  }
};

inline std::vector<std::string> classifier_names(const std::vector<ClassifierConfig>& cs) {
  std::vector<std::string> names;
  std::map<std::string, int> used;
  for (const auto& c : cs) {
    std::string n(to_string(c.kind));
    if (int k = ++used[n]; k > 1)
      n += "#" + std::to_string(k);
    names.push_back(n);
  }
  return names;
}

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
  FeatureMatrix full;  // every prepared row, reduced and scaled
  std::optional<FeatureMatrix> train;
  std::optional<FeatureMatrix> test;
  PreprocessSummary summary;
};

inline RawTable load_raw_table(const ExperimentConfig& c) {
  const CsvSchema schema = schema_for(c.preprocess);
  if (c.input_path)
    return load_csv(*c.input_path, schema);
  std::string text;
  for (const auto& rec : generate_churn(c.synthetic))
    text += csv::format_record(rec);
  return parse_table(text, schema);
}

/// Loads, filters, balances and splits; reduction (PCA + scaling) is fitted on
/// the training split when there is one, otherwise on everything.
inline PreparedData prepare_data(const ExperimentConfig& c, bool split = true) {
  PreparedData out;
  FeatureMatrix base;
  if (c.preprocess_enabled) {
    base = prepare_features(load_raw_table(c), c.preprocess, c.seed, out.summary);
  } else {
    base = csv::parse_matrix(csv::read_file(*c.input_path));
    out.summary.rows_loaded = base.rows();
    out.summary.components = base.cols();
  }

  if (split && base.labels && base.distinct_labels().size() >= 2) {
    auto [tr, te] = train_test_split(base, c.train_fraction, c.seed);
    out.train = std::move(tr);
    out.test = std::move(te);
  }

  if (c.preprocess_enabled) {
    const FeatureMatrix& fit_on = out.train ? *out.train : base;
    Reduction red = Reduction::fit(fit_on, c.preprocess, out.summary);
    out.full = red.apply(base);
    if (out.train) {
      out.train = red.apply(*out.train);
      out.test = red.apply(*out.test);
    }
  } else {
    out.full = base;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

inline EncodeOptions encode_options(const ExperimentConfig& c) {
  EncodeOptions o;
  if (c.key_decimals)
    o.key_policy = KeyPolicy::rounded(*c.key_decimals);
  o.threads = std::max(1u, c.threads);
  o.call_delay = std::chrono::microseconds(c.call_delay_us);
  return o;
}

inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

} // namespace detail

/// Runs one grid cell. Any stage error marks the cell failed with a reason;
/// classifier errors are recorded per classifier.
inline GridCellResult run_cell(const GridEntry& g, const PreparedData& data, const ExperimentConfig& c) {
  GridCellResult r;
  r.embedding = g.embedding;
  r.kind = g.spec.kind;
  r.granularity = g.spec.granularity;
  r.strategy = g.strategy;
  const auto names = classifier_names(c.classifiers);
  try {
    const EncodeOptions opt = detail::encode_options(c);

    FeatureMatrix full = data.full;
    std::optional<FeatureMatrix> train = data.train, test = data.test;
    if (g.spec.kind == EmbeddingKind::basis) {
      const FeatureMatrix& ref = train ? *train : full;
      Binarizer b = c.binarize_threshold ? Binarizer::fixed(ref.cols(), *c.binarize_threshold)
                                         : Binarizer::fit_median(ref);
      full = b.transform(full);
      if (train) {
        train = b.transform(*train);
        test = b.transform(*test);
      }
    }

    std::vector<double> times;
    for (int rep = 0; rep < c.repeat; ++rep) {
      StrategyEncoder enc(g.spec, g.strategy, opt);
      EncodedDataset e = enc.fit_encode(full);
      times.push_back(e.stats.wall_seconds);
      if (rep == 0) {
        r.stats = e.stats;
        r.per_class = e.per_class;
      }
    }
    r.encode_seconds = detail::median(times);
    r.stats.wall_seconds = r.encode_seconds;

    if (!train || !test) {
      for (const auto& n : names)
        r.classifiers.push_back({n, std::nullopt, "no labelled train/test split"});
      return r;
    }

    StrategyEncoder enc(g.spec, g.strategy, opt);
    FeatureMatrix ftrain = dataset_features(enc.fit_encode(*train), c.readout);
    EncodedDataset etest = enc.encode_unseen(*test);
    r.test_embed_calls = etest.stats.embed_calls;
    r.test_cache_hits = etest.stats.cache_hits;
    r.test_fallback = etest.fallback_requests;
    FeatureMatrix ftest = dataset_features(etest, c.readout);

    const StandardScaler scaler = StandardScaler::fit(ftrain.values);
    const Matrix xtr = scaler.transform(ftrain.values), xte = scaler.transform(ftest.values);
    for (std::size_t k = 0; k < c.classifiers.size(); ++k) {
      ClassifierResult cr{names[k], std::nullopt, {}};
      try {
        if (test->rows() == 0)
          throw ValidationError("test split is empty");
        TrainedModel model = fit(c.classifiers[k], xtr, *ftrain.labels);
        cr.accuracy = accuracy(predict(model, xte).labels, *ftest.labels);
      } catch (const std::exception& e) {
        cr.error = e.what();
      }
      r.classifiers.push_back(cr);
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.reason = e.what();
    r.classifiers.clear();
    for (const auto& n : names)
      r.classifiers.push_back({n, std::nullopt, "cell failed"});
  }
  return r;
}

inline BenchReport run_experiment(const ExperimentConfig& c) {
  const auto grid = expand_grid(c);
  const PreparedData data = prepare_data(c);
  BenchReport rep;
  rep.config_hash = config_hash(c);
  rep.seed = c.seed;
  rep.call_delay_us = c.call_delay_us;
  rep.classifier_names = classifier_names(c.classifiers);
  rep.timestamp = detail::utc_timestamp();
  rep.repeat = c.repeat;
  rep.timings_comparable = !c.parallel_cells;
  rep.cells.resize(grid.size());
  detail::parallel_for(grid.size(), c.parallel_cells ? std::max(2u, std::thread::hardware_concurrency()) : 1u,
                       [&](std::size_t i) { rep.cells[i] = run_cell(grid[i], data, c); });
  return rep;
}

// ---------------------------------------------------------------------------
// Emitting and parsing

enum class ReportFormat { table, csv, jsonl };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "table")
    return ReportFormat::table;
  if (s == "csv")
    return ReportFormat::csv;
  if (s == "jsonl")
    return ReportFormat::jsonl;
  throw ConfigError("unknown report format '" + std::string(s) + "' (table, csv, jsonl)");
}

inline std::string_view to_string(ReportFormat f) {
  return f == ReportFormat::table ? "table" : f == ReportFormat::csv ? "csv" : "jsonl";
}

namespace detail {

inline std::string format_class_stats(const std::vector<ClassStats>& cs) {
  std::string s;
  for (const auto& c : cs) {
    if (!s.empty())
      s += ";";
    s += std::to_string(c.label) + ":" + std::to_string(c.embed_calls) + "/" + std::to_string(c.cache_hits) + "/" +
         std::to_string(c.rows);
  }
  return s;
}

inline std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError("report: bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

inline std::vector<ClassStats> parse_class_stats(std::string_view s) {
  std::vector<ClassStats> out;
  while (!s.empty()) {
    auto semi = s.find(';');
    std::string_view part = s.substr(0, semi);
    // label:calls/hits/rows
    std::vector<std::string_view> f;
    std::size_t from = 0;
    for (std::size_t i = 0; i <= part.size(); ++i)
      if (i == part.size() || part[i] == (f.empty() ? ':' : '/')) {
        f.push_back(part.substr(from, i - from));
        from = i + 1;
      }
    if (f.size() != 4)
      throw ValidationError("report: bad class stats '" + std::string(part) + "'");
    ClassStats c;
    c.label = static_cast<int>(parse_count(f[0], "class label"));
    c.embed_calls = parse_count(f[1], "class calls");
    c.cache_hits = parse_count(f[2], "class hits");
    c.rows = parse_count(f[3], "class rows");
    out.push_back(c);
    if (semi == std::string_view::npos)
      break;
    s.remove_prefix(semi + 1);
  }
  return out;
}

inline const std::vector<std::string>& csv_fixed_columns() {
  static const std::vector<std::string> cols = {
      "config_hash", "seed",        "call_delay_us", "embedding",    "kind",             "granularity",
      "strategy",    "status",      "reason",        "embed_calls",  "cache_hits",       "unique_keys",
      "cells_total", "rows_total",  "class_stats",   "test_embed_calls", "test_cache_hits", "test_fallback"};
  return cols;
}

inline std::string classifier_notes(const GridCellResult& c) {
  std::string s;
  for (const auto& k : c.classifiers)
    if (!k.error.empty()) {
      if (!s.empty())
        s += " | ";
      s += k.name + ": " + k.error;
    }
  return s;
}

inline std::string accuracy_text(const std::optional<double>& a) { return a ? csv::format_number(*a) : ""; }

} // namespace detail

inline std::string format_report_csv(const BenchReport& r) {
  csv::Record header = detail::csv_fixed_columns();
  for (const auto& n : r.classifier_names)
    header.push_back("acc:" + n);
  header.push_back("classifier_notes");
  std::string out = csv::format_record(header);
  for (const auto& c : r.cells) {
    csv::Record rec = {r.config_hash,
                       std::to_string(r.seed),
                       std::to_string(r.call_delay_us),
                       c.embedding,
                       std::string(to_string(c.kind)),
                       std::string(to_string(c.granularity)),
                       std::string(to_string(c.strategy)),
                       c.ok ? "ok" : "failed",
                       c.reason,
                       std::to_string(c.stats.embed_calls),
                       std::to_string(c.stats.cache_hits),
                       std::to_string(c.stats.unique_keys),
                       std::to_string(c.stats.cells_total),
                       std::to_string(c.stats.rows_total),
                       detail::format_class_stats(c.per_class),
                       std::to_string(c.test_embed_calls),
                       std::to_string(c.test_cache_hits),
                       std::to_string(c.test_fallback)};
    for (const auto& n : r.classifier_names) {
      auto it = std::find_if(c.classifiers.begin(), c.classifiers.end(),
                             [&](const ClassifierResult& k) { return k.name == n; });
      rec.push_back(it == c.classifiers.end() ? "" : detail::accuracy_text(it->accuracy));
    }
    rec.push_back(detail::classifier_notes(c));
    out += csv::format_record(rec);
  }
  return out;
}

inline BenchReport parse_report_csv(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty())
    throw ValidationError("report CSV is empty");
  const auto& header = records[0];
  const auto& fixed = detail::csv_fixed_columns();
  if (header.size() < fixed.size() + 1 || !std::equal(fixed.begin(), fixed.end(), header.begin()) ||
      header.back() != "classifier_notes")
    throw ValidationError("report CSV header does not match the report layout");
  BenchReport r;
  for (std::size_t j = fixed.size(); j + 1 < header.size(); ++j) {
    if (header[j].rfind("acc:", 0) != 0)
      throw ValidationError("report CSV: unexpected column '" + header[j] + "'");
    r.classifier_names.push_back(header[j].substr(4));
  }
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != header.size())
      throw ValidationError("report CSV line " + std::to_string(i + 1) + " has the wrong number of fields");
    if (i == 1) {
      r.config_hash = rec[0];
      r.seed = std::stoull(rec[1]);
      r.call_delay_us = std::stol(rec[2]);
    }
    GridCellResult c;
    c.embedding = rec[3];
    c.kind = parse_embedding_kind(rec[4]);
    c.granularity = parse_granularity(rec[5]);
    c.strategy = parse_strategy(rec[6]);
    c.ok = rec[7] == "ok";
    c.reason = rec[8];
    c.stats.embed_calls = detail::parse_count(rec[9], "embed_calls");
    c.stats.cache_hits = detail::parse_count(rec[10], "cache_hits");
    c.stats.unique_keys = detail::parse_count(rec[11], "unique_keys");
    c.stats.cells_total = detail::parse_count(rec[12], "cells_total");
    c.stats.rows_total = detail::parse_count(rec[13], "rows_total");
    c.per_class = detail::parse_class_stats(rec[14]);
    c.test_embed_calls = detail::parse_count(rec[15], "test_embed_calls");
    c.test_cache_hits = detail::parse_count(rec[16], "test_cache_hits");
    c.test_fallback = detail::parse_count(rec[17], "test_fallback");
    // per-classifier errors come back from the notes column
    std::map<std::string, std::string> notes;
    {
      std::string_view s = rec.back();
      while (!s.empty()) {
        auto bar = s.find(" | ");
        std::string_view part = s.substr(0, bar);
        auto colon = part.find(": ");
        if (colon != std::string_view::npos)
          notes[std::string(part.substr(0, colon))] = std::string(part.substr(colon + 2));
        if (bar == std::string_view::npos)
          break;
        s.remove_prefix(bar + 3);
      }
    }
    for (std::size_t k = 0; k < r.classifier_names.size(); ++k) {
      ClassifierResult cr;
      cr.name = r.classifier_names[k];
      const auto& cell = rec[fixed.size() + k];
      if (!cell.empty())
        cr.accuracy = csv::parse_number(cell);
      if (auto it = notes.find(cr.name); it != notes.end())
        cr.error = it->second;
      c.classifiers.push_back(cr);
    }
    r.cells.push_back(std::move(c));
  }
  return r;
}

inline std::string format_report_jsonl(const BenchReport& r) {
  std::string out = json{{"type", "header"},
                         {"config_hash", r.config_hash},
                         {"seed", r.seed},
                         {"call_delay_us", r.call_delay_us},
                         {"classifiers", r.classifier_names}}
                        .dump() +
                    "\n";
  for (const auto& c : r.cells) {
    json per_class = json::array();
    for (const auto& p : c.per_class)
      per_class.push_back({{"label", p.label}, {"embed_calls", p.embed_calls}, {"cache_hits", p.cache_hits},
                           {"rows", p.rows}});
    json clf = json::array();
    for (const auto& k : c.classifiers)
      clf.push_back({{"name", k.name},
                     {"accuracy", k.accuracy ? json(*k.accuracy) : json(nullptr)},
                     {"error", k.error}});
    json j = {{"type", "cell"},
              {"embedding", c.embedding},
              {"kind", to_string(c.kind)},
              {"granularity", to_string(c.granularity)},
              {"strategy", to_string(c.strategy)},
              {"status", c.ok ? "ok" : "failed"},
              {"reason", c.reason},
              {"embed_calls", c.stats.embed_calls},
              {"cache_hits", c.stats.cache_hits},
              {"unique_keys", c.stats.unique_keys},
              {"cells_total", c.stats.cells_total},
              {"rows_total", c.stats.rows_total},
              {"per_class", per_class},
              {"test_embed_calls", c.test_embed_calls},
              {"test_cache_hits", c.test_cache_hits},
              {"test_fallback", c.test_fallback},
              {"classifiers", clf}};
    out += j.dump() + "\n";
  }
  return out;
}

inline BenchReport parse_report_jsonl(std::string_view text) {
  BenchReport r;
  bool header = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty())
      continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError("report JSONL line " + std::to_string(line_no) + " is not valid JSON");
    try {
      if (j.at("type") == "header") {
        r.config_hash = j.at("config_hash").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.call_delay_us = j.at("call_delay_us").get<long>();
        r.classifier_names = j.at("classifiers").get<std::vector<std::string>>();
        header = true;
        continue;
      }
      GridCellResult c;
      c.embedding = j.at("embedding").get<std::string>();
      c.kind = parse_embedding_kind(j.at("kind").get<std::string>());
      c.granularity = parse_granularity(j.at("granularity").get<std::string>());
      c.strategy = parse_strategy(j.at("strategy").get<std::string>());
      c.ok = j.at("status") == "ok";
      c.reason = j.at("reason").get<std::string>();
      c.stats.embed_calls = j.at("embed_calls").get<std::size_t>();
      c.stats.cache_hits = j.at("cache_hits").get<std::size_t>();
      c.stats.unique_keys = j.at("unique_keys").get<std::size_t>();
      c.stats.cells_total = j.at("cells_total").get<std::size_t>();
      c.stats.rows_total = j.at("rows_total").get<std::size_t>();
      for (const auto& p : j.at("per_class"))
        c.per_class.push_back({p.at("label").get<int>(), p.at("embed_calls").get<std::size_t>(),
                               p.at("cache_hits").get<std::size_t>(), p.at("rows").get<std::size_t>()});
      c.test_embed_calls = j.at("test_embed_calls").get<std::size_t>();
      c.test_cache_hits = j.at("test_cache_hits").get<std::size_t>();
      c.test_fallback = j.at("test_fallback").get<std::size_t>();
      for (const auto& k : j.at("classifiers")) {
        ClassifierResult cr;
        cr.name = k.at("name").get<std::string>();
        if (!k.at("accuracy").is_null())
          cr.accuracy = k.at("accuracy").get<double>();
        cr.error = k.at("error").get<std::string>();
        c.classifiers.push_back(cr);
      }
      r.cells.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw ValidationError("report JSONL line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header)
    throw ValidationError("report JSONL has no header line");
  return r;
}

inline std::string format_report_table(const BenchReport& r) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"embedding", "gran", "strategy", "status", "embed_calls", "cache_hits",
                                   "unique",    "cells", "rows",    "per_class", "test_fallback"};
  for (const auto& n : r.classifier_names)
    head.push_back(n);
  rows.push_back(head);
  for (const auto& c : r.cells) {
    std::vector<std::string> row = {c.embedding,
                                    std::string(to_string(c.granularity)),
                                    std::string(to_string(c.strategy)),
                                    c.ok ? "ok" : "FAILED",
                                    std::to_string(c.stats.embed_calls),
                                    std::to_string(c.stats.cache_hits),
                                    std::to_string(c.stats.unique_keys),
                                    std::to_string(c.stats.cells_total),
                                    std::to_string(c.stats.rows_total),
                                    c.per_class.empty() ? "-" : detail::format_class_stats(c.per_class),
                                    std::to_string(c.test_fallback)};
    for (const auto& k : c.classifiers) {
      if (k.accuracy) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *k.accuracy);
        row.emplace_back(buf);
      } else {
        row.emplace_back("-");
      }
    }
    rows.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t j = 0; j < row.size() && j < width.size(); ++j)
      width[j] = std::max(width[j], row[j].size());
  std::string out = "config " + r.config_hash + "  seed " + std::to_string(r.seed);
  if (r.call_delay_us > 0)
    out += "  artificial call delay " + std::to_string(r.call_delay_us) + "us";
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (j)
        line += "  ";
      line += rows[i][j];
      if (j + 1 < rows[i].size())
        line.append(width[j] - rows[i][j].size(), ' ');
    }
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width)
        total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  for (const auto& c : r.cells)
    if (!c.ok)
      out += "failed " + c.embedding + "/" + std::string(to_string(c.granularity)) + " " +
             std::string(to_string(c.strategy)) + ": " + c.reason + "\n";
  return out;
}

inline std::string format_report(const BenchReport& r, ReportFormat f) {
  switch (f) {
  case ReportFormat::table: return format_report_table(r);
  case ReportFormat::csv: return format_report_csv(r);
  case ReportFormat::jsonl: return format_report_jsonl(r);
  }
  return {};
}

inline std::string format_timing_csv(const BenchReport& r) {
  std::string out = csv::format_record({"config_hash", "timestamp", "repeat", "comparable", "embedding",
                                        "granularity", "strategy", "encode_seconds_median"});
  for (const auto& c : r.cells)
    out += csv::format_record({r.config_hash, r.timestamp, std::to_string(r.repeat),
                               r.timings_comparable ? "yes" : "no", c.embedding,
                               std::string(to_string(c.granularity)), std::string(to_string(c.strategy)),
                               csv::format_number(c.encode_seconds)});
  return out;
}

/// Reads a report written as CSV or JSON-lines (detected from content).
inline BenchReport read_report(const std::string& path) {
  const std::string text = csv::read_file(path);
  if (!text.empty() && text.front() == '{')
    return parse_report_jsonl(text);
  return parse_report_csv(text);
}

/// Writes `<dir>/<config-hash>.<format>` for each format plus the timing
/// file; returns the report paths.
inline std::vector<std::string> emit_report(const BenchReport& r, const std::string& dir,
                                            std::span<const ReportFormat> formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> paths;
  for (auto f : formats) {
    const std::string path = (std::filesystem::path(dir) / (r.config_hash + "." + std::string(to_string(f)))).string();
    csv::write_file(path, format_report(r, f));
    paths.push_back(path);
  }
  csv::write_file((std::filesystem::path(dir) / (r.config_hash + ".timing.csv")).string(), format_timing_csv(r));
  return paths;
}

// ---------------------------------------------------------------------------
// Strategy comparison

struct DeltaRow {
  std::string embedding;
  Granularity granularity = Granularity::cell;
  StrategyKind strategy = StrategyKind::DE;
  std::string classifier;
  double baseline_accuracy = 0.0;
  double accuracy = 0.0;
  double delta = 0.0;
  double call_reduction = 1.0; // DE embed_calls / strategy embed_calls
  bool flagged = false;
};

struct DeltaSummary {
  std::vector<DeltaRow> rows;
  std::size_t flagged = 0;
};

/// Accuracy deltas and call-count reductions of every strategy against DE of
/// the same embedding and granularity. Rows with a missing accuracy on either
/// side are skipped.
inline DeltaSummary compare_strategies(const BenchReport& r, double bound = 0.02) {
  DeltaSummary out;
  for (const auto& c : r.cells) {
    if (c.strategy == StrategyKind::DE)
      continue;
    auto base = std::find_if(r.cells.begin(), r.cells.end(), [&](const GridCellResult& b) {
      return b.strategy == StrategyKind::DE && b.embedding == c.embedding && b.granularity == c.granularity;
    });
    if (base == r.cells.end())
      throw ConfigError("missing DE baseline for " + c.embedding + "/" + std::string(to_string(c.granularity)));
    if (!c.ok || !base->ok)
      continue;
    for (const auto& k : c.classifiers) {
      auto bk = std::find_if(base->classifiers.begin(), base->classifiers.end(),
                             [&](const ClassifierResult& x) { return x.name == k.name; });
      if (!k.accuracy || bk == base->classifiers.end() || !bk->accuracy)
        continue;
      DeltaRow d;
      d.embedding = c.embedding;
      d.granularity = c.granularity;
      d.strategy = c.strategy;
      d.classifier = k.name;
      d.baseline_accuracy = *bk->accuracy;
      d.accuracy = *k.accuracy;
      d.delta = d.accuracy - d.baseline_accuracy;
      d.call_reduction = c.stats.embed_calls == 0 ? 0.0
                                                  : static_cast<double>(base->stats.embed_calls) /
                                                        static_cast<double>(c.stats.embed_calls);
      d.flagged = std::abs(d.delta) > bound;
      out.flagged += d.flagged;
      out.rows.push_back(d);
    }
  }
  return out;
}

inline std::string format_deltas_csv(const DeltaSummary& s) {
  std::string out = csv::format_record(
      {"embedding", "granularity", "strategy", "classifier", "de_accuracy", "accuracy", "delta", "call_reduction", "flagged"});
  for (const auto& d : s.rows)
    out += csv::format_record({d.embedding, std::string(to_string(d.granularity)), std::string(to_string(d.strategy)),
                               d.classifier, csv::format_number(d.baseline_accuracy), csv::format_number(d.accuracy),
                               csv::format_number(d.delta), csv::format_number(d.call_reduction),
                               d.flagged ? "yes" : "no"});
  return out;
}

} // namespace qenc
