#pragma once

// Small deterministic learners used to compare encodings: logistic
// regression, k-nearest neighbours, linear SVM and a CART tree. All fitting
// is full batch; identical inputs give identical models.

#include "qenc/core.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <variant>

namespace qenc {

enum class ClassifierKind { logreg, knn, linear_svm, cart };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
  case ClassifierKind::logreg: return "logreg";
  case ClassifierKind::knn: return "knn";
  case ClassifierKind::linear_svm: return "linear_svm";
  case ClassifierKind::cart: return "cart";
  }
  return "?";
}

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  for (auto k : {ClassifierKind::logreg, ClassifierKind::knn, ClassifierKind::linear_svm, ClassifierKind::cart})
    if (to_string(k) == s)
      return k;
  throw ConfigError("unknown classifier '" + std::string(s) + "'");
}

struct FitMetadata {
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
};

struct Prediction {
  Labels labels;
  std::vector<double> probabilities; // P(positive class) for binary models
};

namespace detail {

/// Sorted pair of the two labels; throws unless exactly two are present.
inline std::array<int, 2> binary_classes(std::span<const int> y, std::string_view who) {
  std::set<int> s(y.begin(), y.end());
  if (s.size() < 2)
    throw ValidationError(std::string(who) + " needs two classes in the training data, found " +
                          std::to_string(s.size()));
  if (s.size() > 2)
    throw ValidationError(std::string(who) + " supports binary labels only, found " + std::to_string(s.size()) +
                          " classes");
  return {*s.begin(), *s.rbegin()};
}

inline void check_xy(const Matrix& x, std::span<const int> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw ValidationError("feature rows (" + std::to_string(x.rows()) + ") and labels (" +
                          std::to_string(y.size()) + ") differ in length");
  if (x.rows() == 0)
    throw ValidationError("cannot fit on an empty training set");
  if (!x.allFinite())
    throw ValidationError("training features contain non-finite values");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticModel {
  Vector weights;
  double bias = 0.0;
  std::array<int, 2> classes{0, 1};
  FitMetadata meta;
};

namespace detail {

inline double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logistic_loss(const Matrix& x, const Vector& t, const Vector& w, double b, double l2) {
  const Vector z = (x * w).array() + b;
  double loss = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    loss += log1p_exp(z(i)) - t(i) * z(i);
  return loss / static_cast<double>(z.size()) + 0.5 * l2 * w.squaredNorm();
}

} // namespace detail

/// Full-batch gradient descent on mean log-loss + (l2/2)|w|^2. A step that
/// would raise the loss is retried with half the learning rate.
inline LogisticModel logreg_fit(const Matrix& x, std::span<const int> y, double lr = 0.1, int epochs = 500,
                                double l2 = 1e-4, std::uint64_t seed = 0) {
  detail::check_xy(x, y);
  LogisticModel m;
  m.classes = detail::binary_classes(y, "logistic regression");
  m.meta.seed = seed;
  m.weights = Vector::Zero(x.cols());
  Vector t(x.rows());
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t(i) = y[static_cast<std::size_t>(i)] == m.classes[1] ? 1.0 : 0.0;
  const double n = static_cast<double>(x.rows());

  double loss = detail::logistic_loss(x, t, m.weights, m.bias, l2);
  double step = lr;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Vector z = (x * m.weights).array() + m.bias;
    Vector r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      r(i) = detail::sigmoid(z(i)) - t(i);
    const Vector gw = x.transpose() * r / n + l2 * m.weights;
    const double gb = r.sum() / n;
    m.meta.iterations = epoch + 1;
    if (std::sqrt(gw.squaredNorm() + gb * gb) < 1e-10) {
      m.meta.converged = true;
      break;
    }
    for (int halvings = 0; halvings < 60; ++halvings) {
      Vector w2 = m.weights - step * gw;
      double b2 = m.bias - step * gb;
      double l2loss = detail::logistic_loss(x, t, w2, b2, l2);
      if (l2loss <= loss + 1e-12) {
        m.weights = std::move(w2);
        m.bias = b2;
        loss = l2loss;
        break;
      }
      step *= 0.5;
    }
  }
  return m;
}

inline Prediction predict(const LogisticModel& m, const Matrix& x) {
  Prediction p;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double prob = detail::sigmoid(x.row(i).dot(m.weights) + m.bias);
    p.probabilities.push_back(prob);
    p.labels.push_back(prob >= 0.5 ? m.classes[1] : m.classes[0]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// k nearest neighbours

struct KnnModel {
  Matrix train;
  Labels labels;
  int k = 5;
  FitMetadata meta;
};

inline KnnModel knn_fit(const Matrix& x, std::span<const int> y, int k = 5) {
  detail::check_xy(x, y);
  if (k < 1 || static_cast<Eigen::Index>(k) > x.rows())
    throw ValidationError("knn needs 1 <= k <= training rows (k=" + std::to_string(k) + ", rows=" +
                          std::to_string(x.rows()) + ")");
  return KnnModel{x, Labels(y.begin(), y.end()), k, {}};
}

/// Euclidean k-NN vote. Vote ties go to the class with the smaller mean
/// neighbour distance, then to the smaller label. Equal distances are
/// ordered by training index.
inline int knn_predict(const Matrix& train, std::span<const int> labels, std::span<const double> query, int k,
                       double* positive_fraction = nullptr, int positive_label = 1) {
  const auto n = static_cast<std::size_t>(train.rows());
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw ValidationError("knn needs 1 <= k <= training rows");
  if (static_cast<Eigen::Index>(query.size()) != train.cols())
    throw ValidationError("knn query width mismatch");
  Eigen::Map<const Eigen::RowVectorXd> q(query.data(), static_cast<Eigen::Index>(query.size()));
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = {(train.row(static_cast<Eigen::Index>(i)) - q).norm(), i};
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  std::map<int, std::pair<int, double>> votes; // label -> (count, distance sum)
  for (int r = 0; r < k; ++r) {
    auto& v = votes[labels[dist[static_cast<std::size_t>(r)].second]];
    ++v.first;
    v.second += dist[static_cast<std::size_t>(r)].first;
  }
  int best = votes.begin()->first;
  for (const auto& [label, v] : votes) {
    const auto& b = votes[best];
    const double mean = v.second / v.first, bmean = b.second / b.first;
    if (v.first > b.first || (v.first == b.first && mean < bmean))
      best = label;
  }
  if (positive_fraction) {
    auto it = votes.find(positive_label);
    *positive_fraction = it == votes.end() ? 0.0 : static_cast<double>(it->second.first) / k;
  }
  return best;
}

inline Prediction predict(const KnnModel& m, const Matrix& x) {
  Prediction p;
  const int positive = *std::max_element(m.labels.begin(), m.labels.end());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double frac = 0;
    std::vector<double> q(x.row(i).begin(), x.row(i).end());
    p.labels.push_back(knn_predict(m.train, m.labels, q, m.k, &frac, positive));
    p.probabilities.push_back(frac);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Linear SVM

struct SvmModel {
  Vector weights;
  double bias = 0.0;
  std::array<int, 2> classes{0, 1};
  FitMetadata meta;
};

/// Full-batch Pegasos: subgradient steps of size 1/(lambda t) on
/// lambda/2 |w|^2 + mean hinge loss, with the bias folded in as a constant
/// feature, followed by projection onto the ball of radius 1/sqrt(lambda).
inline SvmModel linear_svm_fit(const Matrix& x, std::span<const int> y, double lambda = 1e-3, int epochs = 500,
                               std::uint64_t seed = 0) {
  detail::check_xy(x, y);
  if (!(lambda > 0))
    throw ConfigError("svm lambda must be positive");
  SvmModel m;
  m.classes = detail::binary_classes(y, "linear svm");
  m.meta.seed = seed;
  const Eigen::Index d = x.cols();
  const double n = static_cast<double>(x.rows());
  Vector w = Vector::Zero(d + 1);
  Vector s(x.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    s(i) = y[static_cast<std::size_t>(i)] == m.classes[1] ? 1.0 : -1.0;
  const double radius = 1.0 / std::sqrt(lambda);
  for (int t = 1; t <= epochs; ++t) {
    const double eta = 1.0 / (lambda * t);
    const Vector margin = s.cwiseProduct((x * w.head(d)).array().matrix() + Vector::Constant(x.rows(), w(d)));
    Vector g = Vector::Zero(d + 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (margin(i) < 1.0) {
        g.head(d) += s(i) * x.row(i).transpose();
        g(d) += s(i);
      }
    w = (1.0 - eta * lambda) * w + (eta / n) * g;
    const double norm = w.norm();
    if (norm > radius)
      w *= radius / norm;
    m.meta.iterations = t;
  }
  m.weights = w.head(d);
  m.bias = w(d);
  return m;
}

/// sign(w.x + b); a zero decision value maps to the positive class.
inline Prediction predict(const SvmModel& m, const Matrix& x) {
  Prediction p;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double v = x.row(i).dot(m.weights) + m.bias;
    p.labels.push_back(v >= 0 ? m.classes[1] : m.classes[0]);
    p.probabilities.push_back(v >= 0 ? 1.0 : 0.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// CART

struct TreeNode {
  int feature = -1; // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] <= threshold
  int right = -1;
  int label = 0;
  double positive_fraction = 0.0;
};

struct TreeModel {
  std::vector<TreeNode> nodes;
  int positive_label = 1;
  FitMetadata meta;
};

namespace detail {

inline double gini(const std::map<int, std::size_t>& counts, std::size_t n) {
  if (n == 0)
    return 0.0;
  double g = 1.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    g -= p * p;
  }
  return g;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

/// Exhaustive axis-aligned search. Thresholds are midpoints between
/// consecutive distinct values; ties keep the lowest feature, then the lowest
/// threshold.
inline SplitChoice best_split(const Matrix& x, std::span<const int> y, std::span<const std::size_t> idx,
                              std::size_t min_leaf) {
  SplitChoice best;
  const std::size_t n = idx.size();
  std::vector<std::size_t> order(idx.begin(), idx.end());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
    });
    std::map<int, std::size_t> left, right;
    for (std::size_t i : order)
      ++right[y[i]];
    for (std::size_t pos = 0; pos + 1 < n; ++pos) {
      const int lab = y[order[pos]];
      ++left[lab];
      if (--right[lab] == 0)
        right.erase(lab);
      const double a = x(static_cast<Eigen::Index>(order[pos]), f);
      const double b = x(static_cast<Eigen::Index>(order[pos + 1]), f);
      if (a == b)
        continue;
      const std::size_t nl = pos + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf)
        continue;
      const double imp = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                         static_cast<double>(n);
      if (imp < best.impurity - 1e-15) {
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (a + b);
        best.impurity = imp;
      }
    }
  }
  return best;
}

inline int majority(const std::map<int, std::size_t>& counts) {
  int best = counts.begin()->first;
  for (const auto& [label, c] : counts)
    if (c > counts.at(best))
      best = label;
  return best;
}

} // namespace detail

inline TreeModel cart_fit(const Matrix& x, std::span<const int> y, int max_depth = 6, int min_leaf = 5) {
  detail::check_xy(x, y);
  if (max_depth < 0 || min_leaf < 1)
    throw ConfigError("cart needs max_depth >= 0 and min_leaf >= 1");
  TreeModel tree;
  tree.positive_label = *std::max_element(y.begin(), y.end());

  auto grow = [&](auto&& self, std::vector<std::size_t> idx, int depth) -> int {
    std::map<int, std::size_t> counts;
    for (std::size_t i : idx)
      ++counts[y[i]];
    TreeNode node;
    node.label = detail::majority(counts);
    node.positive_fraction = counts.count(tree.positive_label)
                                 ? static_cast<double>(counts[tree.positive_label]) / static_cast<double>(idx.size())
                                 : 0.0;
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (depth >= max_depth || counts.size() == 1 || idx.size() < 2 * static_cast<std::size_t>(min_leaf))
      return id;
    auto split = detail::best_split(x, y, idx, static_cast<std::size_t>(min_leaf));
    if (split.feature < 0 || split.impurity > detail::gini(counts, idx.size()) + 1e-15)
      return id;
    std::vector<std::size_t> l, r;
    for (std::size_t i : idx)
      (x(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? l : r).push_back(i);
    const int left = self(self, std::move(l), depth + 1);
    const int right = self(self, std::move(r), depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].feature = split.feature;
    tree.nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
    tree.nodes[static_cast<std::size_t>(id)].left = left;
    tree.nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  };
  std::vector<std::size_t> all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), 0);
  grow(grow, std::move(all), 0);
  tree.meta.iterations = static_cast<int>(tree.nodes.size());
  tree.meta.converged = true;
  return tree;
}

inline Prediction predict(const TreeModel& t, const Matrix& x) {
  Prediction p;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const TreeNode* node = &t.nodes.front();
    while (node->feature >= 0)
      node = &t.nodes[static_cast<std::size_t>(x(i, node->feature) <= node->threshold ? node->left : node->right)];
    p.labels.push_back(node->label);
    p.probabilities.push_back(node->positive_fraction);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Uniform front

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::logreg;
  double lr = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  int k = 5;
  double lambda = 1e-3;
  int max_depth = 6;
  int min_leaf = 5;
  std::uint64_t seed = 0;

  bool operator==(const ClassifierConfig&) const = default;
};

using TrainedModel = std::variant<LogisticModel, KnnModel, SvmModel, TreeModel>;

inline TrainedModel fit(const ClassifierConfig& c, const Matrix& x, std::span<const int> y) {
  switch (c.kind) {
  case ClassifierKind::logreg: return logreg_fit(x, y, c.lr, c.epochs, c.l2, c.seed);
  case ClassifierKind::knn: return knn_fit(x, y, c.k);
  case ClassifierKind::linear_svm: return linear_svm_fit(x, y, c.lambda, c.epochs, c.seed);
  case ClassifierKind::cart: return cart_fit(x, y, c.max_depth, c.min_leaf);
  }
  throw ConfigError("unhandled classifier");
}

inline Prediction predict(const TrainedModel& m, const Matrix& x) {
  return std::visit([&](const auto& model) { return predict(model, x); }, m);
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw ValidationError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(truth.size()) + " labels");
  if (truth.empty())
    throw ValidationError("accuracy of an empty set is undefined");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ok += predicted[i] == truth[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

/// Seeded, stratified split; `train_fraction` of each class goes to train.
/// Both parts keep the original row order.
inline std::pair<FeatureMatrix, FeatureMatrix> train_test_split(const FeatureMatrix& m, double train_fraction,
                                                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("split fraction must lie in (0, 1)");
  if (!m.labels)
    throw ValidationError("stratified split needs labels");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, test;
  for (int c : m.distinct_labels()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < m.rows(); ++i)
      if ((*m.labels)[i] == c)
        members.push_back(i);
    for (std::size_t k = members.size(); k > 1; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(members[k - 1], members[pick(rng)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {m.select_rows(train), m.select_rows(test)};
}

/// Zero mean / unit variance per column, fitted on training features.
struct StandardScaler {
  Vector mean;
  Vector scale;

  static StandardScaler fit(const Matrix& x) {
    StandardScaler s;
    s.mean = x.colwise().mean().transpose();
    s.scale = Vector::Ones(x.cols());
    if (x.rows() > 1)
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(x.rows()));
        if (sd > 0)
          s.scale(j) = sd;
      }
    return s;
  }

  Matrix transform(const Matrix& x) const {
    Matrix out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out.col(j) = (x.col(j).array() - mean(j)) / scale(j);
    return out;
  }
};

} // namespace qenc
