#pragma once

// Turns encoded states back into real features for classical models:
// per-qubit Pauli expectations for statevectors, first and second moments
// for Gaussian states.

#include "qenc/strategies.hpp"

namespace qenc {

struct ReadoutSpec {
  bool z = true;
  bool x = false;
  bool zz = false; // <Z_i Z_j> for i < j; width grows quadratically
  bool mean_x = true;
  bool mean_p = true;
  bool var_x = true;
  bool var_p = true;

  void validate() const {
    if (!(z || x || zz))
      throw ConfigError("readout needs at least one qubit observable");
    if (!(mean_x || mean_p || var_x || var_p))
      throw ConfigError("readout needs at least one Gaussian moment");
  }

  std::size_t qubit_width(int q) const {
    const auto n = static_cast<std::size_t>(q);
    return (z ? n : 0) + (x ? n : 0) + (zz ? n * (n - (n > 0 ? 1 : 0)) / 2 : 0);
  }

  std::size_t mode_width(int modes) const {
    return static_cast<std::size_t>(modes) *
           static_cast<std::size_t>(int(mean_x) + int(mean_p) + int(var_x) + int(var_p));
  }
};

/// <Z_i> for each qubit, then <X_i>, then <Z_i Z_j> (i < j), as selected.
inline std::vector<double> qubit_expectations(const PureState& s, const ReadoutSpec& spec = {}) {
  const int q = s.qubit_count;
  const auto& a = s.amplitudes;
  std::vector<double> out;
  out.reserve(spec.qubit_width(q));
  Eigen::VectorXd prob = a.cwiseAbs2();
  if (spec.z)
    for (int i = 0; i < q; ++i) {
      double e = 0;
      for (Eigen::Index b = 0; b < prob.size(); ++b)
        e += detail::z_sign(static_cast<std::size_t>(b), i, q) * prob(b);
      out.push_back(e);
    }
  if (spec.x)
    for (int i = 0; i < q; ++i) {
      const std::size_t mask = detail::bit_mask(i, q);
      double e = 0;
      for (Eigen::Index b = 0; b < a.size(); ++b)
        if (!(static_cast<std::size_t>(b) & mask))
          e += 2.0 * std::real(std::conj(a(b)) * a(static_cast<Eigen::Index>(static_cast<std::size_t>(b) | mask)));
      out.push_back(e);
    }
  if (spec.zz)
    for (int i = 0; i < q; ++i)
      for (int j = i + 1; j < q; ++j) {
        double e = 0;
        for (Eigen::Index b = 0; b < prob.size(); ++b) {
          const auto u = static_cast<std::size_t>(b);
          e += detail::z_sign(u, i, q) * detail::z_sign(u, j, q) * prob(b);
        }
        out.push_back(e);
      }
  return out;
}

/// Per mode: selected entries of (mean_x, mean_p, var_x, var_p).
inline std::vector<double> gaussian_moments(const GaussianState& g, const ReadoutSpec& spec = {}) {
  std::vector<double> out;
  out.reserve(spec.mode_width(g.mode_count));
  for (int m = 0; m < g.mode_count; ++m) {
    const Eigen::Index k = 2 * m;
    if (spec.mean_x)
      out.push_back(g.mean(k));
    if (spec.mean_p)
      out.push_back(g.mean(k + 1));
    if (spec.var_x)
      out.push_back(g.covariance(k, k));
    if (spec.var_p)
      out.push_back(g.covariance(k + 1, k + 1));
  }
  return out;
}

inline std::vector<double> state_features(const QuantumState& s, const ReadoutSpec& spec = {}) {
  if (const auto* p = std::get_if<PureState>(&s))
    return qubit_expectations(*p, spec);
  return gaussian_moments(std::get<GaussianState>(s), spec);
}

namespace detail {

inline std::vector<std::string> feature_names(const QuantumState& s, const ReadoutSpec& spec,
                                              const std::string& prefix) {
  std::vector<std::string> names;
  if (const auto* p = std::get_if<PureState>(&s)) {
    const int q = p->qubit_count;
    if (spec.z)
      for (int i = 0; i < q; ++i)
        names.push_back(prefix + "q" + std::to_string(i) + ":Z");
    if (spec.x)
      for (int i = 0; i < q; ++i)
        names.push_back(prefix + "q" + std::to_string(i) + ":X");
    if (spec.zz)
      for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j)
          names.push_back(prefix + "q" + std::to_string(i) + "q" + std::to_string(j) + ":ZZ");
  } else {
    const auto& g = std::get<GaussianState>(s);
    for (int m = 0; m < g.mode_count; ++m) {
      const std::string mode = prefix + "m" + std::to_string(m);
      if (spec.mean_x)
        names.push_back(mode + ":mean_x");
      if (spec.mean_p)
        names.push_back(mode + ":mean_p");
      if (spec.var_x)
        names.push_back(mode + ":var_x");
      if (spec.var_p)
        names.push_back(mode + ":var_p");
    }
  }
  return names;
}

} // namespace detail

/// Cell granularity concatenates the per-cell readouts along each row; row
/// granularity reads one vector per row. Labels are carried through.
inline FeatureMatrix dataset_features(const EncodedDataset& enc, const ReadoutSpec& spec = {}) {
  spec.validate();
  const std::size_t per_row = enc.granularity == Granularity::cell ? enc.d : 1;
  if (enc.n == 0 || enc.states.empty())
    return FeatureMatrix(Matrix(static_cast<Eigen::Index>(enc.n), 0), enc.labels, {});

  std::vector<std::string> names;
  for (std::size_t j = 0; j < per_row; ++j) {
    const std::string prefix = enc.granularity == Granularity::cell ? "c" + std::to_string(j) + "." : "";
    auto part = detail::feature_names(*enc.states[j], spec, prefix);
    names.insert(names.end(), part.begin(), part.end());
  }

  Matrix out(static_cast<Eigen::Index>(enc.n), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < enc.n; ++i) {
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < per_row; ++j) {
      const auto& handle = enc.states[i * per_row + j];
      if (!handle)
        throw ValidationError("encoded dataset has no state at row " + std::to_string(i));
      for (double v : state_features(*handle, spec)) {
        if (col >= out.cols())
          throw ValidationError("inconsistent readout width at row " + std::to_string(i));
        out(static_cast<Eigen::Index>(i), col++) = v;
      }
    }
    if (col != out.cols())
      throw ValidationError("inconsistent readout width at row " + std::to_string(i));
  }
  return FeatureMatrix(std::move(out), enc.labels, std::move(names));
}

} // namespace qenc
