#pragma once

#include "oracles.hpp"

#include <qenc/qenc.hpp>

#include <filesystem>

namespace testing_support {

inline qenc::FeatureMatrix to_matrix(const oracle::Grid& g, std::optional<std::vector<int>> labels = std::nullopt) {
  const std::size_t n = g.size(), d = n ? g[0].size() : 0;
  qenc::Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[i][j];
  return qenc::FeatureMatrix(std::move(m), std::move(labels));
}

// worked examples
inline oracle::Grid gds_example() {
  return {{0.2, 0.2, 0.9}, {0.4, 0.4, 0.1}, {0.6, 0.6, 0.3}, {0.2, 0.4, 0.3}};
}
inline oracle::Grid ils_example() { return {{0.2, 0.4, 0.6}, {0.2, 0.4, 0.6}, {0.9, 0.1, 0.3}}; }
inline oracle::Grid cc_ils_example() { return {{0.2, 0.3}, {0.4, 0.3}, {0.2, 0.1}, {0.2, 0.1}}; }
inline oracle::Grid cc_gds_example() { return {{0.2, 0.3}, {0.4, 0.3}, {0.2, 0.1}, {0.6, 0.1}}; }
inline std::vector<int> ab_labels() { return {0, 0, 1, 1}; }

inline qenc::EmbeddingSpec spec(qenc::EmbeddingKind k, qenc::Granularity g) {
  qenc::EmbeddingSpec s;
  s.kind = k;
  s.granularity = g;
  return s;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qenc-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) { return qenc::csv::read_file(p.string()); }

} // namespace testing_support
